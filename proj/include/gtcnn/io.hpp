#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtcnn/errors.hpp"
#include "gtcnn/graph.hpp"
#include "gtcnn/nn.hpp"
#include "gtcnn/perturbation.hpp"
#include "gtcnn/product.hpp"
#include "gtcnn/train.hpp"

namespace gtcnn {

using json = nlohmann::json;

/// Round-trip-exact decimal form, used everywhere a double lands in a CSV
/// so repeated runs emit byte-identical files.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Graph JSON: {"n": int, "edges": [[i, j, w], ...], "symmetric": bool}
// with one entry per directed nonzero of the shift operator.
// ---------------------------------------------------------------------------

inline json graph_to_json(const Graph& g) {
  json j;
  j["n"] = g.size();
  j["symmetric"] = g.symmetric;
  json edges = json::array();
  for (const Triplet& t : g.gso.to_triplets()) edges.push_back({t.row, t.col, t.value});
  j["edges"] = std::move(edges);
  return j;
}

inline Graph graph_from_json(const json& j, GraphKind kind = GraphKind::spatial) {
  try {
    const int n = j.at("n").get<int>();
    const bool symmetric = j.at("symmetric").get<bool>();
    std::vector<Triplet> t;
    for (const json& e : j.at("edges"))
      t.push_back({e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>()});
    return make_graph(SparseMatrix::from_triplets(n, n, std::move(t)), kind, symmetric);
  } catch (const json::exception& ex) {
    throw IoError(std::string("bad graph json: ") + ex.what());
  }
}

inline void save_graph(const std::string& path, const Graph& g) {
  write_text_file(path, graph_to_json(g).dump(2) + "\n");
}

inline Graph load_graph(const std::string& path, GraphKind kind = GraphKind::spatial) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& ex) {
    throw IoError(std::string("cannot parse ") + path + ": " + ex.what());
  }
  return graph_from_json(j, kind);
}

// ---------------------------------------------------------------------------
// Signal CSV: one row per node, one column per time step, no header.
// ---------------------------------------------------------------------------

inline std::string signal_to_csv(const Eigen::MatrixXd& x) {
  std::string out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (c) out += ',';
      out += format_double(x(r, c));
    }
    out += '\n';
  }
  return out;
}

inline Eigen::MatrixXd signal_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw IoError("bad csv cell: " + cell);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("ragged csv signal");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty csv signal");
  Eigen::MatrixXd x(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return x;
}

// ---------------------------------------------------------------------------
// ProductSpec JSON: {"kind": "kronecker"|"cartesian"|"strong"|"parametric",
//                    "s": [[s00, s01], [s10, s11]]}  (s only for parametric)
// ---------------------------------------------------------------------------

inline std::string product_kind_name(ProductKind k) {
  switch (k) {
    case ProductKind::kronecker: return "kronecker";
    case ProductKind::cartesian: return "cartesian";
    case ProductKind::strong: return "strong";
    case ProductKind::parametric: return "parametric";
  }
  throw ContractError("product_kind_name: unknown kind");
}

inline json product_spec_to_json(const ProductSpec& spec) {
  json j;
  j["kind"] = product_kind_name(spec.kind);
  if (spec.kind == ProductKind::parametric)
    j["s"] = {{spec.s[0][0], spec.s[0][1]}, {spec.s[1][0], spec.s[1][1]}};
  return j;
}

inline ProductSpec product_spec_from_json(const json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "kronecker") return ProductSpec::kronecker();
    if (kind == "cartesian") return ProductSpec::cartesian();
    if (kind == "strong") return ProductSpec::strong();
    if (kind == "parametric") {
      const json& s = j.at("s");
      return ProductSpec::parametric(
          {{{s.at(0).at(0).get<double>(), s.at(0).at(1).get<double>()},
            {s.at(1).at(0).get<double>(), s.at(1).at(1).get<double>()}}});
    }
    throw IoError("unknown product kind: " + kind);
  } catch (const json::exception& ex) {
    throw IoError(std::string("bad product spec json: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Joint filter coefficients: {"k_bar": int, "k_tilde": int, "h": [[...]]}
// with h[k][l] rows over the spatial power.
// ---------------------------------------------------------------------------

inline json joint_coeffs_to_json(const JointFilterCoeffs& h) {
  json j;
  j["k_bar"] = h.k_bar();
  j["k_tilde"] = h.k_tilde();
  json rows = json::array();
  for (int k = 0; k <= h.k_bar(); ++k) {
    json row = json::array();
    for (int l = 0; l <= h.k_tilde(); ++l) row.push_back(h.h(k, l));
    rows.push_back(std::move(row));
  }
  j["h"] = std::move(rows);
  return j;
}

inline JointFilterCoeffs joint_coeffs_from_json(const json& j) {
  try {
    const int k_bar = j.at("k_bar").get<int>();
    const int k_tilde = j.at("k_tilde").get<int>();
    JointFilterCoeffs h = JointFilterCoeffs::zero(k_bar, k_tilde);
    for (int k = 0; k <= k_bar; ++k)
      for (int l = 0; l <= k_tilde; ++l) h.h(k, l) = j.at("h").at(k).at(l).get<double>();
    h.validate();
    return h;
  } catch (const json::exception& ex) {
    throw IoError(std::string("bad filter json: ") + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Model checkpoint: one JSON file with the config and every parameter
// tensor as a row-major array.
// ---------------------------------------------------------------------------

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw IoError("matrix json: data length mismatch");
  Eigen::MatrixXd m(rows, cols);
  Eigen::Index i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data.at(i++).get<double>();
  return m;
}

}  // namespace detail

inline json model_config_to_json(const GTCNNConfig& c) {
  json j;
  j["layers"] = c.layers;
  j["features"] = c.features;
  json orders = json::array();
  for (const LayerSpec& o : c.orders)
    orders.push_back({{"order", o.order}, {"k_bar", o.k_bar}, {"k_tilde", o.k_tilde}});
  j["orders"] = std::move(orders);
  j["mode"] = c.mode == CouplingMode::product ? "product" : "joint";
  j["product"] = product_spec_to_json(c.product);
  j["readout"] = c.readout == ReadoutKind::classification ? "classification" : "last_slice_regression";
  j["classes"] = c.classes;
  j["l1_weight"] = c.l1_weight;
  j["nonlinearity"] = c.nonlinearity == Nonlinearity::relu ? "relu" : "none";
  j["final_relu"] = c.final_relu;
  return j;
}

inline GTCNNConfig model_config_from_json(const json& j) {
  try {
    GTCNNConfig c;
    c.layers = j.at("layers").get<int>();
    c.features = j.at("features").get<std::vector<int>>();
    for (const json& o : j.at("orders"))
      c.orders.push_back({o.at("order").get<int>(), o.at("k_bar").get<int>(), o.at("k_tilde").get<int>()});
    const std::string mode = j.at("mode").get<std::string>();
    if (mode != "product" && mode != "joint") throw IoError("bad coupling mode: " + mode);
    c.mode = mode == "product" ? CouplingMode::product : CouplingMode::joint;
    c.product = product_spec_from_json(j.at("product"));
    const std::string readout = j.at("readout").get<std::string>();
    if (readout != "classification" && readout != "last_slice_regression")
      throw IoError("bad readout: " + readout);
    c.readout = readout == "classification" ? ReadoutKind::classification
                                            : ReadoutKind::last_slice_regression;
    c.classes = j.at("classes").get<int>();
    c.l1_weight = j.at("l1_weight").get<double>();
    const std::string nl = j.at("nonlinearity").get<std::string>();
    if (nl != "relu" && nl != "none") throw IoError("bad nonlinearity: " + nl);
    c.nonlinearity = nl == "relu" ? Nonlinearity::relu : Nonlinearity::none;
    c.final_relu = j.at("final_relu").get<bool>();
    c.validate();
    return c;
  } catch (const json::exception& ex) {
    throw IoError(std::string("bad model config json: ") + ex.what());
  }
}

inline json model_to_json(const GTCNNModel& m) {
  json j;
  j["config"] = model_config_to_json(m.config);
  json layers = json::array();
  for (const LayerParams& lp : m.layers) {
    json taps = json::array();
    for (const Eigen::MatrixXd& t : lp.taps) taps.push_back(detail::matrix_to_json(t));
    layers.push_back({{"taps", std::move(taps)}});
  }
  j["layers"] = std::move(layers);
  j["coupling"] = {{m.coupling[0][0], m.coupling[0][1]}, {m.coupling[1][0], m.coupling[1][1]}};
  j["readout_weight"] = detail::matrix_to_json(m.readout_weight);
  json bias = json::array();
  for (Eigen::Index i = 0; i < m.readout_bias.size(); ++i) bias.push_back(m.readout_bias[i]);
  j["readout_bias"] = std::move(bias);
  return j;
}

inline GTCNNModel model_from_json(const json& j) {
  try {
    GTCNNModel m;
    m.config = model_config_from_json(j.at("config"));
    for (const json& lj : j.at("layers")) {
      LayerParams lp;
      for (const json& tj : lj.at("taps")) lp.taps.push_back(detail::matrix_from_json(tj));
      m.layers.push_back(std::move(lp));
    }
    const json& s = j.at("coupling");
    m.coupling = {{{s.at(0).at(0).get<double>(), s.at(0).at(1).get<double>()},
                   {s.at(1).at(0).get<double>(), s.at(1).at(1).get<double>()}}};
    m.readout_weight = detail::matrix_from_json(j.at("readout_weight"));
    const json& bias = j.at("readout_bias");
    m.readout_bias.resize(static_cast<Eigen::Index>(bias.size()));
    for (Eigen::Index i = 0; i < m.readout_bias.size(); ++i)
      m.readout_bias[i] = bias.at(i).get<double>();
    if (static_cast<int>(m.layers.size()) != m.config.layers)
      throw IoError("checkpoint layer count does not match config");
    return m;
  } catch (const json::exception& ex) {
    throw IoError(std::string("bad checkpoint json: ") + ex.what());
  }
}

inline void save_checkpoint(const std::string& path, const GTCNNModel& m) {
  write_text_file(path, model_to_json(m).dump(2) + "\n");
}

inline GTCNNModel load_checkpoint(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& ex) {
    throw IoError(std::string("cannot parse ") + path + ": " + ex.what());
  }
  return model_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV reports
// ---------------------------------------------------------------------------

inline std::string history_to_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,val_loss,val_metric\n";
  for (const EpochStats& e : history) {
    out += std::to_string(e.epoch);
    out += ',';
    out += format_double(e.train_loss);
    out += ',';
    out += format_double(e.val_loss);
    out += ',';
    out += format_double(e.val_metric);
    out += '\n';
  }
  return out;
}

/// Exact field order of PerturbationReport, one row per trial.
inline std::string reports_to_csv(const std::vector<PerturbationReport>& reports) {
  std::string out =
      "epsilon,snr_db,delta,C_est,L,F,N,T,bound,empirical_distance,input_norm\n";
  for (const PerturbationReport& r : reports) {
    out += format_double(r.epsilon);
    out += ',';
    out += format_double(r.snr_db);
    out += ',';
    out += format_double(r.delta);
    out += ',';
    out += format_double(r.c_est);
    out += ',';
    out += std::to_string(r.layers);
    out += ',';
    out += std::to_string(r.features);
    out += ',';
    out += std::to_string(r.n_spatial);
    out += ',';
    out += std::to_string(r.n_temporal);
    out += ',';
    out += format_double(r.bound);
    out += ',';
    out += format_double(r.empirical_distance);
    out += ',';
    out += format_double(r.input_norm);
    out += '\n';
  }
  return out;
}

}  // namespace gtcnn
