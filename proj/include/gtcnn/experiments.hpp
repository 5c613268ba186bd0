#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gtcnn/errors.hpp"
#include "gtcnn/io.hpp"
#include "gtcnn/nn.hpp"
#include "gtcnn/perturbation.hpp"
#include "gtcnn/spectral.hpp"
#include "gtcnn/train.hpp"

namespace gtcnn {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct GraphConfig {
  int n = 40;
  int communities = 4;
  double p_in = 0.3;
  double p_out = 0.05;
};

struct TemporalConfig {
  std::string kind = "line";  // line | cycle | path
  int window = 4;             // T
};

struct DiffusionConfig {
  int t_min = 15;
  int t_max = 30;
  int fixed_start = -1;  // >= 0 pins the window start (debug aid)
};

struct DatasetConfig {
  int samples = 600;
  bool standardize = true;
};

struct ModelConfig {
  int layers = 2;
  std::vector<int> hidden{4, 4};  // F_1..F_L
  int order = 2;                  // K, product mode
  int k_bar = 2;
  int k_tilde = 2;
};

struct StabilityConfig {
  std::string checkpoint;
  std::vector<double> snr_db{0, 5, 10, 20, 40};
  std::vector<double> eps{0.01, 0.02, 0.05, 0.1};
  int trials = 100;
  int probes = 25;
  int grid = 1024;
};

struct SpectralConfig {
  std::string checkpoint;
  int grid = 64;
};

struct ExperimentConfig {
  std::string task = "source_localization";
  std::uint64_t seed = 1;
  GraphConfig graph;
  TemporalConfig temporal;
  DiffusionConfig diffusion;
  DatasetConfig dataset;
  ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> train_seeds{0, 1, 2, 3, 4};
  double l1_weight = 0.05;
  std::vector<std::string> models{"gcnn", "kronecker", "cartesian", "strong", "parametric"};
  StabilityConfig stability;
  SpectralConfig spectral;

  void validate() const {
    if (task != "source_localization" && task != "stability_sweep" && task != "spectral_dump")
      throw ConfigError("unknown task: " + task);
    if (graph.communities < 1 || graph.n < graph.communities)
      throw ConfigError("graph: need n >= communities >= 1");
    if (!(graph.p_out >= 0.0 && graph.p_in >= graph.p_out && graph.p_in <= 1.0))
      throw ConfigError("graph: need 0 <= p_out <= p_in <= 1");
    if (temporal.kind != "line" && temporal.kind != "cycle" && temporal.kind != "path")
      throw ConfigError("temporal: unknown kind " + temporal.kind);
    if (temporal.window < 1) throw ConfigError("temporal: window must be >= 1");
    if (diffusion.t_min > diffusion.t_max) throw ConfigError("diffusion: t_min must be <= t_max");
    if (diffusion.fixed_start < 0) {
      if (temporal.window > diffusion.t_min)
        throw ConfigError("diffusion: window must be <= t_min");
      if (temporal.window > diffusion.t_max - diffusion.t_min)
        throw ConfigError("diffusion: window exceeds t_max - t_min");
    }
    if (dataset.samples < 1) throw ConfigError("dataset: need at least one sample");
    if (model.layers < 1 || static_cast<int>(model.hidden.size()) != model.layers)
      throw ConfigError("model: hidden feature list must have one entry per layer");
    if (model.order < 0 || model.k_bar < 0 || model.k_tilde < 0)
      throw ConfigError("model: negative order");
    if (std::abs(train.split[0] + train.split[1] + train.split[2] - 1.0) > 1e-9)
      throw ConfigError("train: split fractions must sum to 1");
    if (train.epochs < 0 || train.batch_size < 1) throw ConfigError("train: bad epochs/batch size");
    if (train_seeds.empty()) throw ConfigError("train: need at least one seed");
    if (models.empty()) throw ConfigError("need at least one model");
    for (const std::string& m : models)
      if (m != "gcnn" && m != "kronecker" && m != "cartesian" && m != "strong" &&
          m != "parametric" && m != "joint")
        throw ConfigError("unknown model variant: " + m);
    if (l1_weight < 0.0) throw ConfigError("l1_weight must be >= 0");
    if (stability.trials < 1 || stability.probes < 1 || stability.grid < 2)
      throw ConfigError("stability: trials/probes/grid out of range");
    if (spectral.grid < 2) throw ConfigError("spectral: grid must be >= 2");
  }
};

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["task"] = c.task;
  j["seed"] = c.seed;
  j["graph"] = {{"n", c.graph.n},
                {"communities", c.graph.communities},
                {"p_in", c.graph.p_in},
                {"p_out", c.graph.p_out}};
  j["temporal"] = {{"kind", c.temporal.kind}, {"window", c.temporal.window}};
  j["diffusion"] = {{"t_min", c.diffusion.t_min},
                    {"t_max", c.diffusion.t_max},
                    {"fixed_start", c.diffusion.fixed_start}};
  j["dataset"] = {{"samples", c.dataset.samples}, {"standardize", c.dataset.standardize}};
  j["model"] = {{"layers", c.model.layers},
                {"hidden", c.model.hidden},
                {"order", c.model.order},
                {"k_bar", c.model.k_bar},
                {"k_tilde", c.model.k_tilde}};
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"adam_eps", c.train.adam_eps},
                {"split", {c.train.split[0], c.train.split[1], c.train.split[2]}},
                {"seeds", c.train_seeds}};
  j["l1_weight"] = c.l1_weight;
  j["models"] = c.models;
  j["stability"] = {{"checkpoint", c.stability.checkpoint}, {"snr_db", c.stability.snr_db},
                    {"eps", c.stability.eps},               {"trials", c.stability.trials},
                    {"probes", c.stability.probes},         {"grid", c.stability.grid}};
  j["spectral"] = {{"checkpoint", c.spectral.checkpoint}, {"grid", c.spectral.grid}};
  return j;
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.task = j.value("task", c.task);
    c.seed = j.value("seed", c.seed);
    if (j.contains("graph")) {
      const json& g = j.at("graph");
      c.graph.n = g.value("n", c.graph.n);
      c.graph.communities = g.value("communities", c.graph.communities);
      c.graph.p_in = g.value("p_in", c.graph.p_in);
      c.graph.p_out = g.value("p_out", c.graph.p_out);
    }
    if (j.contains("temporal")) {
      const json& t = j.at("temporal");
      c.temporal.kind = t.value("kind", c.temporal.kind);
      c.temporal.window = t.value("window", c.temporal.window);
    }
    if (j.contains("diffusion")) {
      const json& d = j.at("diffusion");
      c.diffusion.t_min = d.value("t_min", c.diffusion.t_min);
      c.diffusion.t_max = d.value("t_max", c.diffusion.t_max);
      c.diffusion.fixed_start = d.value("fixed_start", c.diffusion.fixed_start);
    }
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      c.dataset.samples = d.value("samples", c.dataset.samples);
      c.dataset.standardize = d.value("standardize", c.dataset.standardize);
    }
    if (j.contains("model")) {
      const json& m = j.at("model");
      c.model.layers = m.value("layers", c.model.layers);
      c.model.hidden = m.value("hidden", c.model.hidden);
      c.model.order = m.value("order", c.model.order);
      c.model.k_bar = m.value("k_bar", c.model.k_bar);
      c.model.k_tilde = m.value("k_tilde", c.model.k_tilde);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.beta1 = t.value("beta1", c.train.beta1);
      c.train.beta2 = t.value("beta2", c.train.beta2);
      c.train.adam_eps = t.value("adam_eps", c.train.adam_eps);
      if (t.contains("split")) {
        const json& s = t.at("split");
        c.train.split = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
      }
      if (t.contains("seeds")) c.train_seeds = t.at("seeds").get<std::vector<std::uint64_t>>();
    }
    c.l1_weight = j.value("l1_weight", c.l1_weight);
    if (j.contains("models")) c.models = j.at("models").get<std::vector<std::string>>();
    if (j.contains("stability")) {
      const json& s = j.at("stability");
      c.stability.checkpoint = s.value("checkpoint", c.stability.checkpoint);
      if (s.contains("snr_db")) c.stability.snr_db = s.at("snr_db").get<std::vector<double>>();
      if (s.contains("eps")) c.stability.eps = s.at("eps").get<std::vector<double>>();
      c.stability.trials = s.value("trials", c.stability.trials);
      c.stability.probes = s.value("probes", c.stability.probes);
      c.stability.grid = s.value("grid", c.stability.grid);
    }
    if (j.contains("spectral")) {
      const json& s = j.at("spectral");
      c.spectral.checkpoint = s.value("checkpoint", c.spectral.checkpoint);
      c.spectral.grid = s.value("grid", c.spectral.grid);
    }
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("bad experiment config: ") + ex.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("cannot parse ") + path + ": " + ex.what());
  }
  return config_from_json(j);
}

inline Graph make_temporal(const std::string& kind, int t) {
  if (kind == "line") return line_graph(t);
  if (kind == "cycle") return cyclic_graph(t);
  if (kind == "path") return path_graph(t);
  throw ConfigError("unknown temporal kind: " + kind);
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct SourceLocalizationData {
  Graph graph;
  std::vector<int> labels;
  Dataset data;  // raw windows, no standardization
};

/// Unit impulse at a random node, diffused as e^{-tau L}; the emitted
/// window starts at a uniform time in [t_min, t_max - T]. Bit-exact for a
/// fixed seed: one generator drives the source and start-time draws in
/// sample order.
inline SourceLocalizationData gen_source_localization(const ExperimentConfig& cfg) {
  cfg.validate();
  SourceLocalizationData out;
  auto [g, labels] = sbm_generate(cfg.graph.n, cfg.graph.communities, cfg.graph.p_in,
                                  cfg.graph.p_out, cfg.seed);
  out.graph = std::move(g);
  out.labels = std::move(labels);
  const HeatKernel kernel(out.graph);
  const int n = cfg.graph.n;
  const int window = cfg.temporal.window;
  Rng rng(cfg.seed + 0x51ab5eedull);
  out.data.samples.reserve(static_cast<std::size_t>(cfg.dataset.samples));
  for (int i = 0; i < cfg.dataset.samples; ++i) {
    const int src = rng.uniform_int(0, n - 1);
    const int start = cfg.diffusion.fixed_start >= 0
                          ? cfg.diffusion.fixed_start
                          : rng.uniform_int(cfg.diffusion.t_min, cfg.diffusion.t_max - window);
    Eigen::VectorXd impulse = Eigen::VectorXd::Zero(n);
    impulse[src] = 1.0;
    Sample s;
    s.x.resize(n, window);
    for (int c = 0; c < window; ++c)
      s.x.col(c) = kernel.at(impulse, static_cast<double>(start + c));
    s.label = out.labels[static_cast<std::size_t>(src)];
    out.data.samples.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model variants
// ---------------------------------------------------------------------------

inline GTCNNConfig build_model_config(const ExperimentConfig& cfg, const std::string& variant) {
  GTCNNConfig c;
  c.layers = cfg.model.layers;
  c.features.push_back(variant == "gcnn" ? cfg.temporal.window : 1);
  for (int f : cfg.model.hidden) c.features.push_back(f);
  for (int l = 0; l < cfg.model.layers; ++l)
    c.orders.push_back({cfg.model.order, cfg.model.k_bar, cfg.model.k_tilde});
  c.readout = ReadoutKind::classification;
  c.classes = cfg.graph.communities;
  if (variant == "joint") {
    c.mode = CouplingMode::joint;
  } else {
    c.mode = CouplingMode::product;
    if (variant == "kronecker") c.product = ProductSpec::kronecker();
    else if (variant == "strong") c.product = ProductSpec::strong();
    else if (variant == "parametric") {
      c.product = ProductSpec::parametric(ProductSpec::cartesian().scalars());
      c.l1_weight = cfg.l1_weight;
    } else {
      c.product = ProductSpec::cartesian();  // cartesian and gcnn
    }
  }
  return c;
}

inline Graph variant_temporal(const ExperimentConfig& cfg, const std::string& variant) {
  return variant == "gcnn" ? line_graph(1) : make_temporal(cfg.temporal.kind, cfg.temporal.window);
}

// ---------------------------------------------------------------------------
// Source localization experiment
// ---------------------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  bool failed = false;
  double test_accuracy = 0.0;
};

struct ModelSummary {
  std::string name;
  std::vector<SeedRun> runs;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  int failed = 0;
};

struct SourceLocalizationResult {
  std::vector<ModelSummary> models;
};

/// Trains every requested variant with identical budgets over the seed
/// list; each seed regenerates the graph and dataset so all variants see
/// the same data. Emits results.csv (per seed) and summary.csv, plus one
/// checkpoint and history per (variant, seed).
inline SourceLocalizationResult run_source_localization(const ExperimentConfig& cfg,
                                                        const std::string& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  SourceLocalizationResult result;

  struct SeedData {
    SourceLocalizationData gen;
    Dataset prepared;
  };
  std::vector<SeedData> seed_data;
  for (std::uint64_t s : cfg.train_seeds) {
    ExperimentConfig c = cfg;
    c.seed = cfg.seed + s;
    SeedData sd{gen_source_localization(c), {}};
    sd.prepared = sd.gen.data;
    if (cfg.dataset.standardize) standardize_samples(sd.prepared);
    seed_data.push_back(std::move(sd));
  }

  for (const std::string& variant : cfg.models) {
    ModelSummary summary;
    summary.name = variant;
    for (std::size_t si = 0; si < cfg.train_seeds.size(); ++si) {
      const std::uint64_t seed = cfg.train_seeds[si];
      const SeedData& sd = seed_data[si];
      const Graph temporal = variant_temporal(cfg, variant);
      GraphPair pair(sd.gen.graph, temporal);

      Rng init_rng(cfg.seed * 1000003ull + seed * 101ull + std::hash<std::string>{}(variant));
      GTCNNModel model = init_model(build_model_config(cfg, variant), init_rng);
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      TrainResult tr = train(std::move(model), sd.prepared, tc, LossKind::cross_entropy, pair);

      SeedRun run;
      run.seed = seed;
      run.failed = tr.diverged;
      if (!tr.diverged) {
        const SplitIndices idx = split_indices(sd.prepared.size(), tc.split, tc.seed);
        run.test_accuracy = evaluate(tr.model, pair, subset(sd.prepared, idx.test), Metric::accuracy);
      }
      summary.runs.push_back(run);

      const std::string tag = variant + "_seed" + std::to_string(seed);
      save_checkpoint(out_dir + "/checkpoint_" + tag + ".json", tr.model);
      write_text_file(out_dir + "/history_" + tag + ".csv", history_to_csv(tr.history));
    }
    double sum = 0.0;
    int ok = 0;
    for (const SeedRun& r : summary.runs) {
      if (r.failed) ++summary.failed;
      else {
        sum += r.test_accuracy;
        ++ok;
      }
    }
    summary.mean_accuracy = ok ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    double var = 0.0;
    for (const SeedRun& r : summary.runs)
      if (!r.failed) var += std::pow(r.test_accuracy - summary.mean_accuracy, 2);
    summary.std_accuracy = ok ? std::sqrt(var / ok) : std::numeric_limits<double>::quiet_NaN();
    result.models.push_back(std::move(summary));
  }

  std::string rows = "model,seed,failed,test_accuracy\n";
  for (const ModelSummary& m : result.models)
    for (const SeedRun& r : m.runs) {
      rows += m.name + "," + std::to_string(r.seed) + "," + (r.failed ? "1" : "0") + "," +
              format_double(r.test_accuracy) + "\n";
    }
  write_text_file(out_dir + "/results.csv", rows);

  std::string summary_csv = "model,seeds,failed,mean_accuracy,std_accuracy\n";
  for (const ModelSummary& m : result.models)
    summary_csv += m.name + "," + std::to_string(m.runs.size()) + "," + std::to_string(m.failed) +
                   "," + format_double(m.mean_accuracy) + "," + format_double(m.std_accuracy) + "\n";
  write_text_file(out_dir + "/summary.csv", summary_csv);
  return result;
}

// ---------------------------------------------------------------------------
// Stability sweep
// ---------------------------------------------------------------------------

/// Scales every tap of each layer so the layer's largest filter response on
/// the evaluation grid is one (the normalized-response hypothesis of the
/// stability theorem). Positive per-layer scaling preserves the feature
/// geometry up to a constant, so bound checks on the scaled model are
/// meaningful.
inline GTCNNModel normalize_model_layers(const GTCNNModel& model, double lambda_min,
                                         double lambda_max, const std::vector<double>& lambda_t_set,
                                         int grid) {
  GTCNNModel out = model;
  const auto effective = detail::build_effective(model);
  for (std::size_t l = 0; l < effective.size(); ++l) {
    const FilterBank& bank = effective[l].bank;
    double peak = 0.0;
    for (int f = 0; f < bank.f_out; ++f)
      for (int g = 0; g < bank.f_in; ++g) {
        JointFilterCoeffs h = JointFilterCoeffs::zero(bank.k_bar, bank.k_tilde);
        for (int k = 0; k <= bank.k_bar; ++k)
          for (int tl = 0; tl <= bank.k_tilde; ++tl) h.h(k, tl) = bank.tap(k, tl)(f, g);
        peak = std::max(peak, max_response(h, lambda_min, lambda_max, lambda_t_set, grid));
      }
    if (peak > 0.0)
      for (auto& tap : out.layers[l].taps) tap /= peak;
  }
  return out;
}

/// Largest integral-Lipschitz estimate over every filter of the model.
inline double model_lipschitz_constant(const GTCNNModel& model, double lambda_min, double lambda_max,
                                       const std::vector<double>& lambda_t_set, int grid) {
  double c_est = 0.0;
  const auto effective = detail::build_effective(model);
  for (const auto& eff : effective) {
    const FilterBank& bank = eff.bank;
    for (int f = 0; f < bank.f_out; ++f)
      for (int g = 0; g < bank.f_in; ++g) {
        JointFilterCoeffs h = JointFilterCoeffs::zero(bank.k_bar, bank.k_tilde);
        for (int k = 0; k <= bank.k_bar; ++k)
          for (int tl = 0; tl <= bank.k_tilde; ++tl) h.h(k, tl) = bank.tap(k, tl)(f, g);
        c_est = std::max(c_est, lipschitz_constant(h, lambda_min, lambda_max, lambda_t_set, grid));
      }
  }
  return c_est;
}

struct StabilityRow {
  std::string kind;  // "snr" or "eps"
  double level = 0.0;
  int trial = 0;
  PerturbationReport report;
  double accuracy = 0.0;
};

struct StabilitySweepResult {
  double unperturbed_accuracy = 0.0;
  std::vector<StabilityRow> rows;
  std::vector<std::pair<double, double>> direction_sweep;  // (epsilon, distance), one direction
};

/// Perturbation trials for every SNR and epsilon level: accuracy of the
/// trained checkpoint on the perturbed graph, plus the Theorem bound and
/// the measured feature distance for the layer-normalized model. Also
/// sweeps one fixed error direction across the epsilon list for the
/// linear-scaling check.
inline StabilitySweepResult run_stability_sweep(const ExperimentConfig& cfg,
                                                const std::string& out_dir) {
  cfg.validate();
  if (cfg.stability.checkpoint.empty())
    throw ConfigError("stability: checkpoint path is required");
  if (cfg.temporal.kind == "line" && cfg.temporal.window > 1)
    throw ConfigError(
        "stability: the directed line temporal graph has no eigendecomposition; use 'path' or "
        "'cycle'");
  const GTCNNModel model = load_checkpoint(cfg.stability.checkpoint);
  std::filesystem::create_directories(out_dir);

  ExperimentConfig data_cfg = cfg;
  data_cfg.seed = cfg.seed + cfg.train_seeds.front();
  SourceLocalizationData gen = gen_source_localization(data_cfg);
  Dataset prepared = gen.data;
  if (cfg.dataset.standardize) standardize_samples(prepared);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.train_seeds.front();
  const SplitIndices idx = split_indices(prepared.size(), tc.split, tc.seed);
  const Dataset test_set = subset(prepared, idx.test);

  const Graph temporal = make_temporal(cfg.temporal.kind, cfg.temporal.window);
  if (model.config.features.front() != 1)
    throw ConfigError("stability: checkpoint must be a product-signal model (F_0 = 1)");
  GraphPair nominal(gen.graph, temporal);

  const EigenDecomposition spatial_eig = sym_eig(gen.graph.gso);
  const EigenDecomposition temporal_eig = sym_eig(temporal.gso);
  const double lambda_min = spatial_eig.eigenvalues.minCoeff();
  const double lambda_max = spatial_eig.eigenvalues.maxCoeff();
  std::vector<double> lambda_t_set(temporal_eig.eigenvalues.data(),
                                   temporal_eig.eigenvalues.data() + temporal_eig.size());

  const GTCNNModel normalized =
      normalize_model_layers(model, lambda_min, lambda_max, lambda_t_set, cfg.stability.grid);
  const double c_est =
      model_lipschitz_constant(normalized, lambda_min, lambda_max, lambda_t_set, cfg.stability.grid);
  const int features = *std::max_element(model.config.features.begin(), model.config.features.end());

  StabilitySweepResult result;
  result.unperturbed_accuracy = evaluate(model, nominal, test_set, Metric::accuracy);

  Rng rng(cfg.seed + 0x57ab1e5ull);
  const auto probes =
      random_unit_probes(gen.graph.size() * temporal.size(), cfg.stability.probes, rng);

  auto run_trial = [&](const std::string& kind, double level, int trial, const ErrorMatrix& e) {
    const Graph perturbed = relative_perturb(gen.graph, e);
    StabilityRow row;
    row.kind = kind;
    row.level = level;
    row.trial = trial;
    row.report.epsilon = e.operator_norm;
    row.report.snr_db = snr_db_of(gen.graph, e);
    row.report.delta = misalignment_delta(gen.graph, e);
    row.report.c_est = c_est;
    row.report.layers = model.config.layers;
    row.report.features = features;
    row.report.n_spatial = gen.graph.size();
    row.report.n_temporal = temporal.size();
    row.report.input_norm = 1.0;
    row.report.bound = row.report.recompute_bound();
    row.report.empirical_distance =
        empirical_gtcnn_distance(normalized, gen.graph, perturbed, temporal, probes);
    GraphPair hat(perturbed, temporal);
    row.accuracy = evaluate(model, hat, test_set, Metric::accuracy);
    result.rows.push_back(std::move(row));
  };

  for (double snr : cfg.stability.snr_db)
    for (int trial = 0; trial < cfg.stability.trials; ++trial)
      run_trial("snr", snr, trial, sample_error_at_snr(gen.graph, snr, rng));
  for (double eps : cfg.stability.eps)
    for (int trial = 0; trial < cfg.stability.trials; ++trial)
      run_trial("eps", eps, trial, sample_error_at_eps(gen.graph, eps, rng));

  // one fixed direction scaled across the epsilon list
  if (!cfg.stability.eps.empty()) {
    const ErrorMatrix direction = sample_error_at_eps(gen.graph, 1.0, rng);
    for (double eps : cfg.stability.eps) {
      const Graph perturbed = relative_perturb(gen.graph, scale_error(direction, eps));
      result.direction_sweep.emplace_back(
          eps, empirical_gtcnn_distance(normalized, gen.graph, perturbed, temporal, probes));
    }
  }

  std::vector<PerturbationReport> reports;
  reports.reserve(result.rows.size());
  std::string sweep = "kind,level,trial,accuracy,epsilon,delta,bound,empirical_distance\n";
  for (const StabilityRow& r : result.rows) {
    reports.push_back(r.report);
    sweep += r.kind + "," + format_double(r.level) + "," + std::to_string(r.trial) + "," +
             format_double(r.accuracy) + "," + format_double(r.report.epsilon) + "," +
             format_double(r.report.delta) + "," + format_double(r.report.bound) + "," +
             format_double(r.report.empirical_distance) + "\n";
  }
  write_text_file(out_dir + "/reports.csv", reports_to_csv(reports));
  write_text_file(out_dir + "/sweep.csv", sweep);

  std::string direction = "epsilon,empirical_distance\n";
  for (const auto& [eps, dist] : result.direction_sweep)
    direction += format_double(eps) + "," + format_double(dist) + "\n";
  write_text_file(out_dir + "/direction_sweep.csv", direction);
  return result;
}

// ---------------------------------------------------------------------------
// Spectral dump
// ---------------------------------------------------------------------------

struct SpectralDumpResult {
  // rows of (layer, filter, lambda_T, lambda, normalized |response|)
  struct Row {
    int layer;
    int filter;
    double lambda_t;
    double lambda;
    double response;
  };
  std::vector<Row> rows;
  std::vector<std::pair<int, int>> degenerate;  // (layer, filter) with zero response
};

/// |h(lambda_T, lambda)| of every learned filter on a grid, normalized to
/// [0, 1] per filter. The lambda range comes from the experiment graph's
/// spectrum; lambda_T from the temporal spectrum when it exists, else a
/// unit grid.
inline SpectralDumpResult run_spectral_dump(const ExperimentConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  if (cfg.spectral.checkpoint.empty()) throw ConfigError("spectral: checkpoint path is required");
  const GTCNNModel model = load_checkpoint(cfg.spectral.checkpoint);
  std::filesystem::create_directories(out_dir);

  ExperimentConfig data_cfg = cfg;
  data_cfg.seed = cfg.seed + cfg.train_seeds.front();
  auto [graph, labels] = sbm_generate(data_cfg.graph.n, data_cfg.graph.communities,
                                      data_cfg.graph.p_in, data_cfg.graph.p_out, data_cfg.seed);
  const EigenDecomposition spatial_eig = sym_eig(graph.gso);
  const double lambda_min = spatial_eig.eigenvalues.minCoeff();
  const double lambda_max = spatial_eig.eigenvalues.maxCoeff();

  const Graph temporal = make_temporal(cfg.temporal.kind, cfg.temporal.window);
  double lt_min = -1.0, lt_max = 1.0;
  if (temporal.symmetric) {
    const EigenDecomposition temporal_eig = sym_eig(temporal.gso);
    lt_min = temporal_eig.eigenvalues.minCoeff();
    lt_max = temporal_eig.eigenvalues.maxCoeff();
  }

  const int grid = cfg.spectral.grid;
  SpectralDumpResult result;
  const auto effective = detail::build_effective(model);
  std::string csv = "layer,filter,lambda_T,lambda,response\n";
  for (std::size_t l = 0; l < effective.size(); ++l) {
    const FilterBank& bank = effective[l].bank;
    for (int f = 0; f < bank.f_out; ++f)
      for (int g = 0; g < bank.f_in; ++g) {
        const int filter_index = f * bank.f_in + g;
        JointFilterCoeffs h = JointFilterCoeffs::zero(bank.k_bar, bank.k_tilde);
        for (int k = 0; k <= bank.k_bar; ++k)
          for (int tl = 0; tl <= bank.k_tilde; ++tl) h.h(k, tl) = bank.tap(k, tl)(f, g);
        double peak = 0.0;
        for (int i = 0; i <= grid; ++i)
          for (int jj = 0; jj <= grid; ++jj) {
            const double lt = lt_min + (lt_max - lt_min) * i / grid;
            const double lam = lambda_min + (lambda_max - lambda_min) * jj / grid;
            peak = std::max(peak, std::abs(frequency_response(h, lt, lam)));
          }
        if (peak <= 0.0) result.degenerate.emplace_back(static_cast<int>(l), filter_index);
        for (int i = 0; i <= grid; ++i)
          for (int jj = 0; jj <= grid; ++jj) {
            const double lt = lt_min + (lt_max - lt_min) * i / grid;
            const double lam = lambda_min + (lambda_max - lambda_min) * jj / grid;
            const double resp = peak > 0.0 ? std::abs(frequency_response(h, lt, lam)) / peak : 0.0;
            result.rows.push_back({static_cast<int>(l), filter_index, lt, lam, resp});
            csv += std::to_string(l) + "," + std::to_string(filter_index) + "," +
                   format_double(lt) + "," + format_double(lam) + "," + format_double(resp) + "\n";
          }
      }
  }
  write_text_file(out_dir + "/response_grid.csv", csv);
  return result;
}

// ---------------------------------------------------------------------------
// Dataset materialization (the `gen` subcommand)
// ---------------------------------------------------------------------------

/// Writes graph.json, communities.csv, samples.csv (label then the
/// vectorized window per row) and meta.json.
inline void write_dataset_files(const ExperimentConfig& cfg, const std::string& out_dir) {
  const SourceLocalizationData gen = gen_source_localization(cfg);
  std::filesystem::create_directories(out_dir);
  save_graph(out_dir + "/graph.json", gen.graph);

  std::string communities;
  for (int c : gen.labels) communities += std::to_string(c) + "\n";
  write_text_file(out_dir + "/communities.csv", communities);

  std::string samples;
  for (const Sample& s : gen.data.samples) {
    samples += std::to_string(s.label);
    const ProductSignal ps = vectorize(s.x);
    for (Eigen::Index i = 0; i < ps.values.size(); ++i)
      samples += "," + format_double(ps.values[i]);
    samples += "\n";
  }
  write_text_file(out_dir + "/samples.csv", samples);

  json meta;
  meta["n"] = cfg.graph.n;
  meta["window"] = cfg.temporal.window;
  meta["samples"] = cfg.dataset.samples;
  meta["communities"] = cfg.graph.communities;
  meta["seed"] = cfg.seed;
  write_text_file(out_dir + "/meta.json", meta.dump(2) + "\n");
}

}  // namespace gtcnn
