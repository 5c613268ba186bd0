#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gtcnn/errors.hpp"
#include "gtcnn/filters.hpp"
#include "gtcnn/graph.hpp"
#include "gtcnn/product.hpp"
#include "gtcnn/rng.hpp"

namespace gtcnn {

enum class ReadoutKind { classification, last_slice_regression };
enum class CouplingMode { product, joint };
enum class Nonlinearity { relu, none };
enum class LossKind { cross_entropy, mse };
enum class Metric { accuracy, mae, rmse, mape };

struct LayerSpec {
  int order = 2;    // K, product mode
  int k_bar = 2;    // joint mode spatial order
  int k_tilde = 2;  // joint mode temporal order
};

/// Architecture description. `product` mode runs monolithic filters over a
/// fixed or parametric product graph (the coupling scalars train when the
/// spec is parametric); `joint` mode trains a full (k, l) coefficient grid
/// per layer pair.
struct GTCNNConfig {
  int layers = 1;
  std::vector<int> features;  // F_0..F_L
  std::vector<LayerSpec> orders;
  CouplingMode mode = CouplingMode::product;
  ProductSpec product = ProductSpec::cartesian();
  ReadoutKind readout = ReadoutKind::classification;
  int classes = 2;
  double l1_weight = 0.0;  // beta, on the coupling scalars only
  Nonlinearity nonlinearity = Nonlinearity::relu;
  bool final_relu = true;  // apply the nonlinearity after the last conv layer

  void validate() const {
    if (layers < 1) throw ParameterError("GTCNNConfig: need at least one layer");
    if (static_cast<int>(features.size()) != layers + 1)
      throw ParameterError("GTCNNConfig: features must list F_0..F_L");
    if (static_cast<int>(orders.size()) != layers)
      throw ParameterError("GTCNNConfig: one order spec per layer");
    for (int f : features)
      if (f < 1) throw ParameterError("GTCNNConfig: feature counts must be positive");
    for (const LayerSpec& o : orders)
      if (o.order < 0 || o.k_bar < 0 || o.k_tilde < 0)
        throw ParameterError("GTCNNConfig: negative filter order");
    if (readout == ReadoutKind::classification && classes < 2)
      throw ParameterError("GTCNNConfig: classification needs >= 2 classes");
    if (l1_weight < 0.0) throw ParameterError("GTCNNConfig: l1 weight must be >= 0");
  }

  bool trains_coupling() const {
    return mode == CouplingMode::product && product.kind == ProductKind::parametric;
  }

  int readout_outputs() const { return readout == ReadoutKind::classification ? classes : 1; }
};

struct LayerParams {
  // product mode: taps[k] for S_diamond^k, k = 0..order.
  // joint mode: taps[k*(k_tilde+1)+l] for S_T^l (x) S^k.
  std::vector<Eigen::MatrixXd> taps;
};

struct GTCNNModel {
  GTCNNConfig config;
  std::vector<LayerParams> layers;
  std::array<std::array<double, 2>, 2> coupling{{{0, 1}, {1, 0}}};  // s_ij, product mode
  Eigen::MatrixXd readout_weight;  // outputs x F_L
  Eigen::VectorXd readout_bias;    // outputs
};

/// Spatial/temporal pair with cached transposes for the backward shifts.
struct GraphPair {
  Graph spatial;
  Graph temporal;
  SparseMatrix spatial_t;
  SparseMatrix temporal_t;

  GraphPair(Graph s, Graph t)
      : spatial(std::move(s)),
        temporal(std::move(t)),
        spatial_t(spatial.gso.transposed()),
        temporal_t(temporal.gso.transposed()) {}

  int n() const { return spatial.size(); }
  int t() const { return temporal.size(); }
};

inline GTCNNModel init_model(const GTCNNConfig& config, Rng& rng) {
  config.validate();
  GTCNNModel m;
  m.config = config;
  m.layers.resize(static_cast<std::size_t>(config.layers));
  for (int l = 0; l < config.layers; ++l) {
    const LayerSpec& spec = config.orders[static_cast<std::size_t>(l)];
    const int f_in = config.features[static_cast<std::size_t>(l)];
    const int f_out = config.features[static_cast<std::size_t>(l) + 1];
    const int taps = config.mode == CouplingMode::product
                         ? spec.order + 1
                         : (spec.k_bar + 1) * (spec.k_tilde + 1);
    const double bound = 1.0 / std::sqrt(static_cast<double>(f_in) * taps);
    auto& lp = m.layers[static_cast<std::size_t>(l)];
    lp.taps.resize(static_cast<std::size_t>(taps));
    for (auto& tap : lp.taps) {
      tap.resize(f_out, f_in);
      for (int c = 0; c < f_in; ++c)
        for (int r = 0; r < f_out; ++r) tap(r, c) = rng.uniform(-bound, bound);
    }
  }
  if (config.mode == CouplingMode::product) {
    m.coupling = config.product.scalars();
    if (config.trains_coupling()) {
      // start near the Cartesian coupling
      m.coupling = ProductSpec::cartesian().scalars();
      for (auto& row : m.coupling)
        for (double& v : row) v += rng.uniform(-0.01, 0.01);
    }
  }
  const int outputs = config.readout_outputs();
  const int f_l = config.features.back();
  const double rb = 1.0 / std::sqrt(static_cast<double>(f_l));
  m.readout_weight.resize(outputs, f_l);
  for (int c = 0; c < f_l; ++c)
    for (int r = 0; r < outputs; ++r) m.readout_weight(r, c) = rng.uniform(-rb, rb);
  m.readout_bias = Eigen::VectorXd::Zero(outputs);
  return m;
}

namespace detail {

/// Joint filter banks actually applied per layer. In product mode the bank
/// is the multinomial expansion of the mono taps through the coupling
/// scalars; the expansion object is kept for routing gradients back to the
/// taps and to s_ij.
struct LayerEffective {
  FilterBank bank;
  ParametricExpansion expansion{{{{0, 0}, {0, 0}}}, 0};
  bool mono = false;
};

inline std::vector<LayerEffective> build_effective(const GTCNNModel& m) {
  std::vector<LayerEffective> out;
  out.reserve(m.layers.size());
  for (int l = 0; l < m.config.layers; ++l) {
    const LayerSpec& spec = m.config.orders[static_cast<std::size_t>(l)];
    const auto& taps = m.layers[static_cast<std::size_t>(l)].taps;
    const int f_in = m.config.features[static_cast<std::size_t>(l)];
    const int f_out = m.config.features[static_cast<std::size_t>(l) + 1];
    LayerEffective eff;
    if (m.config.mode == CouplingMode::joint) {
      eff.bank = FilterBank{taps, spec.k_bar, spec.k_tilde, f_out, f_in};
    } else {
      eff.mono = true;
      eff.expansion = ParametricExpansion(m.coupling, spec.order);
      eff.bank = FilterBank::zero(spec.order, spec.order, f_out, f_in);
      for (int k = 0; k <= spec.order; ++k) {
        const Eigen::MatrixXd& grid = eff.expansion.powers(k);
        for (int b = 0; b <= spec.order; ++b)
          for (int a = 0; a <= spec.order; ++a)
            if (grid(b, a) != 0.0) eff.bank.tap(b, a) += grid(b, a) * taps[static_cast<std::size_t>(k)];
      }
    }
    out.push_back(std::move(eff));
  }
  return out;
}

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

}  // namespace detail

struct LayerCache {
  Eigen::MatrixXd x_in;  // NT x F_in
  Eigen::MatrixXd z;     // NT x F_out, pre-activation
  bool relu_applied = false;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Eigen::MatrixXd features;  // NT x F_L, post-activation (pre-readout)
  Eigen::VectorXd pooled;    // classification: global feature mean
};

struct ForwardResult {
  Eigen::VectorXd output;    // class scores (pre-softmax) or per-node predictions
  Eigen::MatrixXd features;  // NT x F_L pre-readout activations
};

/// Runs the layer stack and readout. Classification readout: average the
/// final features over the temporal axis per node, map them through a
/// shared linear layer to per-node logits, then average node logits into
/// class scores. Regression readout: shared linear map on the last time
/// slice, one prediction per node.
inline ForwardResult forward(const GTCNNModel& m, const GraphPair& g, const Eigen::MatrixXd& x0,
                             ForwardCache* cache = nullptr) {
  m.config.validate();
  const int n = g.n(), t = g.t();
  if (x0.rows() != static_cast<Eigen::Index>(n) * t ||
      x0.cols() != m.config.features.front())
    throw ParameterError("forward: input must be NT x F_0");
  const auto effective = detail::build_effective(m);
  if (cache) cache->layers.clear();
  Eigen::MatrixXd x = x0;
  for (int l = 0; l < m.config.layers; ++l) {
    Eigen::MatrixXd z = apply_filter_bank(g.spatial, g.temporal, effective[static_cast<std::size_t>(l)].bank, x);
    if (!z.allFinite())
      throw NumericalError("forward: non-finite activation at layer " + std::to_string(l));
    const bool use_relu = m.config.nonlinearity == Nonlinearity::relu &&
                          (l + 1 < m.config.layers || m.config.final_relu);
    if (cache) cache->layers.push_back({x, z, use_relu});
    x = use_relu ? detail::relu(z) : z;
  }

  ForwardResult res;
  res.features = x;
  if (m.config.readout == ReadoutKind::classification) {
    const Eigen::VectorXd pooled = x.colwise().mean();
    res.output = m.readout_weight * pooled + m.readout_bias;
    if (cache) cache->pooled = pooled;
  } else {
    const Eigen::MatrixXd last = x.bottomRows(n);  // slice t = T-1
    res.output = (last * m.readout_weight.transpose()).col(0) +
                 Eigen::VectorXd::Constant(n, m.readout_bias[0]);
  }
  if (cache) cache->features = x;
  return res;
}

/// Baseline that ignores temporal connections: with a single-node temporal
/// graph the Cartesian product collapses to the spatial shift and the T
/// window columns enter as plain node features.
inline GraphPair gcnn_pair(const Graph& spatial) { return GraphPair(spatial, line_graph(1)); }

inline ForwardResult gcnn_baseline_forward(const GTCNNModel& m, const Graph& spatial,
                                           const Eigen::MatrixXd& x, ForwardCache* cache = nullptr) {
  return forward(m, gcnn_pair(spatial), x, cache);
}

/// Same structure as the trainable parameters of a model.
struct Gradients {
  std::vector<LayerParams> layers;
  std::array<std::array<double, 2>, 2> coupling{{{0, 0}, {0, 0}}};
  Eigen::MatrixXd readout_weight;
  Eigen::VectorXd readout_bias;
};

inline Gradients zero_gradients(const GTCNNModel& m) {
  Gradients gr;
  gr.layers.resize(m.layers.size());
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    gr.layers[l].taps.resize(m.layers[l].taps.size());
    for (std::size_t k = 0; k < m.layers[l].taps.size(); ++k)
      gr.layers[l].taps[k] = Eigen::MatrixXd::Zero(m.layers[l].taps[k].rows(), m.layers[l].taps[k].cols());
  }
  gr.readout_weight = Eigen::MatrixXd::Zero(m.readout_weight.rows(), m.readout_weight.cols());
  gr.readout_bias = Eigen::VectorXd::Zero(m.readout_bias.size());
  return gr;
}

/// Accumulates parameter gradients for one sample into `gr`.
/// `d_output` is the upstream gradient on the readout output.
inline void backward(const GTCNNModel& m, const GraphPair& g, const ForwardCache& cache,
                     const Eigen::VectorXd& d_output, Gradients& gr) {
  const int n = g.n(), t = g.t();
  if (static_cast<int>(cache.layers.size()) != m.config.layers ||
      cache.features.rows() != static_cast<Eigen::Index>(n) * t)
    throw ContractError("backward: cache does not match model and graphs");
  if (d_output.size() != (m.config.readout == ReadoutKind::classification
                              ? m.config.classes
                              : n))
    throw ContractError("backward: upstream gradient has wrong size");
  const auto effective = detail::build_effective(m);

  Eigen::MatrixXd d_x;  // gradient flowing into the current layer's output
  if (m.config.readout == ReadoutKind::classification) {
    gr.readout_weight += d_output * cache.pooled.transpose();
    gr.readout_bias += d_output;
    const Eigen::VectorXd d_pooled = m.readout_weight.transpose() * d_output;
    d_x = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n) * t) * d_pooled.transpose() /
          static_cast<double>(n * t);
  } else {
    const Eigen::MatrixXd last = cache.features.bottomRows(n);
    gr.readout_weight.row(0) += d_output.transpose() * last;
    gr.readout_bias[0] += d_output.sum();
    d_x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n) * t, cache.features.cols());
    d_x.bottomRows(n) = d_output * m.readout_weight.row(0);
  }

  for (int l = m.config.layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    const detail::LayerEffective& eff = effective[static_cast<std::size_t>(l)];
    Eigen::MatrixXd d_z = lc.relu_applied
                              ? Eigen::MatrixXd((lc.z.array() > 0.0).cast<double>() * d_x.array())
                              : d_x;

    // Gradients of the effective joint taps: dH'_{kl} = dZ^T Shift_{kl}(X).
    FilterBank d_eff = FilterBank::zero(eff.bank.k_bar, eff.bank.k_tilde, eff.bank.f_out, eff.bank.f_in);
    detail::sweep_shift_table(
        g.spatial.gso, g.temporal.gso, n, t, lc.x_in, eff.bank.k_bar, eff.bank.k_tilde,
        [&](int k, int tl, const Eigen::MatrixXd& block) {
          d_eff.tap(k, tl).noalias() += d_z.transpose() * block;
        },
        nullptr);

    // Input gradient via the adjoint shifts: dX = sum (S_T^l x S^k)^T dZ H'_{kl}.
    if (l > 0) {
      Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(lc.x_in.rows(), lc.x_in.cols());
      detail::sweep_shift_table(
          g.spatial_t, g.temporal_t, n, t, d_z, eff.bank.k_bar, eff.bank.k_tilde,
          [&](int k, int tl, const Eigen::MatrixXd& block) {
            const Eigen::MatrixXd& h = eff.bank.tap(k, tl);
            if (!h.isZero(0.0)) d_in.noalias() += block * h;
          },
          nullptr);
      d_x = std::move(d_in);
    }

    // Route the effective-tap gradients back to the stored parameters.
    auto& d_taps = gr.layers[static_cast<std::size_t>(l)].taps;
    if (!eff.mono) {
      for (int k = 0; k <= eff.bank.k_bar; ++k)
        for (int tl = 0; tl <= eff.bank.k_tilde; ++tl)
          d_taps[static_cast<std::size_t>(k * (eff.bank.k_tilde + 1) + tl)] += d_eff.tap(k, tl);
    } else {
      const int order = m.config.orders[static_cast<std::size_t>(l)].order;
      const auto& taps = m.layers[static_cast<std::size_t>(l)].taps;
      for (int k = 0; k <= order; ++k) {
        const Eigen::MatrixXd& grid = eff.expansion.powers(k);
        for (int b = 0; b <= order; ++b)
          for (int a = 0; a <= order; ++a)
            if (grid(b, a) != 0.0) d_taps[static_cast<std::size_t>(k)] += grid(b, a) * d_eff.tap(b, a);
      }
      if (m.config.trains_coupling()) {
        // dL/ds_ij through the expansion: d(base^k)/ds_ij = k base^{k-1}
        // shifted by (spatial j, temporal i).
        for (int k = 1; k <= order; ++k) {
          const Eigen::MatrixXd& prev = eff.expansion.powers(k - 1);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
              double acc = 0.0;
              for (int b = 0; b + j <= order; ++b)
                for (int a = 0; a + i <= order; ++a) {
                  const double c = prev(b, a);
                  if (c != 0.0)
                    acc += c * d_eff.tap(b + j, a + i)
                                   .cwiseProduct(taps[static_cast<std::size_t>(k)])
                                   .sum();
                }
              gr.coupling[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
                  static_cast<double>(k) * acc;
            }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossGrad {
  double loss = 0.0;
  Eigen::VectorXd d_output;
};

inline LossGrad cross_entropy_loss(const Eigen::VectorXd& scores, int label) {
  if (label < 0 || label >= scores.size()) throw ParameterError("cross_entropy_loss: bad label");
  const double m = scores.maxCoeff();
  const Eigen::VectorXd shifted = (scores.array() - m).exp();
  const double z = shifted.sum();
  LossGrad lg;
  lg.loss = std::log(z) - (scores[label] - m);
  lg.d_output = shifted / z;
  lg.d_output[label] -= 1.0;
  return lg;
}

inline LossGrad mse_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& target) {
  if (prediction.size() != target.size()) throw ParameterError("mse_loss: size mismatch");
  const Eigen::VectorXd diff = prediction - target;
  LossGrad lg;
  lg.loss = diff.squaredNorm() / static_cast<double>(diff.size());
  lg.d_output = 2.0 * diff / static_cast<double>(diff.size());
  return lg;
}

// ---------------------------------------------------------------------------
// Parameter packing (one flat vector drives ADAM, serialization and the
// finite-difference checks)
// ---------------------------------------------------------------------------

inline int parameter_count(const GTCNNModel& m) {
  int count = 0;
  for (const auto& layer : m.layers)
    for (const auto& tap : layer.taps) count += static_cast<int>(tap.size());
  if (m.config.trains_coupling()) count += 4;
  count += static_cast<int>(m.readout_weight.size()) + static_cast<int>(m.readout_bias.size());
  return count;
}

namespace detail {

template <typename ModelLike, typename Visit>
inline void visit_parameters(ModelLike& m, bool trains_coupling, Visit&& visit) {
  for (auto& layer : m.layers)
    for (auto& tap : layer.taps)
      for (Eigen::Index c = 0; c < tap.cols(); ++c)
        for (Eigen::Index r = 0; r < tap.rows(); ++r) visit(tap(r, c));
  if (trains_coupling)
    for (auto& row : m.coupling)
      for (auto& v : row) visit(v);
  for (Eigen::Index c = 0; c < m.readout_weight.cols(); ++c)
    for (Eigen::Index r = 0; r < m.readout_weight.rows(); ++r) visit(m.readout_weight(r, c));
  for (Eigen::Index i = 0; i < m.readout_bias.size(); ++i) visit(m.readout_bias[i]);
}

}  // namespace detail

inline Eigen::VectorXd pack_parameters(const GTCNNModel& m) {
  Eigen::VectorXd flat(parameter_count(m));
  int i = 0;
  detail::visit_parameters(m, m.config.trains_coupling(), [&](const double& v) { flat[i++] = v; });
  return flat;
}

inline void unpack_parameters(GTCNNModel& m, const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count(m)) throw ParameterError("unpack_parameters: size mismatch");
  int i = 0;
  detail::visit_parameters(m, m.config.trains_coupling(), [&](double& v) { v = flat[i++]; });
}

inline Eigen::VectorXd pack_gradients(const GTCNNModel& m, const Gradients& gr) {
  Eigen::VectorXd flat(parameter_count(m));
  int i = 0;
  detail::visit_parameters(gr, m.config.trains_coupling(), [&](const double& v) { flat[i++] = v; });
  return flat;
}

}  // namespace gtcnn
