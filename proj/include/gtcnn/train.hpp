#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "gtcnn/errors.hpp"
#include "gtcnn/nn.hpp"

namespace gtcnn {

/// One supervised example: an N x T signal window with either a class label
/// or a per-node regression target.
struct Sample {
  Eigen::MatrixXd x;  // N x T
  int label = -1;
  Eigen::VectorXd target;
};

struct Dataset {
  std::vector<Sample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  bool empty() const { return samples.empty(); }
};

/// Shifts and scales each sample to zero mean, unit deviation over its
/// N*T window. Windows taken late in a diffusion sit on a large uniform
/// component with tiny informative contrasts; standardization makes those
/// contrasts O(1) for every model identically.
inline void standardize_samples(Dataset& data) {
  for (Sample& s : data.samples) {
    const double mean = s.x.mean();
    const double var = (s.x.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd > 1e-300) s.x = (s.x.array() - mean) / sd;
  }
}

/// Deterministic shuffled split into train/val/test index sets. Train and
/// validation sizes floor their fractions; the remainder is test.
struct SplitIndices {
  std::vector<int> train, val, test;
};

inline SplitIndices split_indices(int n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("split_indices: fractions must sum to 1");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const int n_train = static_cast<int>(std::floor(fractions[0] * n));
  const int n_val = static_cast<int>(std::floor(fractions[1] * n));
  SplitIndices s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

inline Dataset subset(const Dataset& data, const std::vector<int>& idx) {
  Dataset out;
  out.samples.reserve(idx.size());
  for (int i : idx) out.samples.push_back(data.samples[static_cast<std::size_t>(i)]);
  return out;
}

/// Builds the NT x F_0 input block for a sample. A window enters a product
/// model as one vectorized feature column; a baseline with a single
/// temporal node consumes the T columns as node features.
inline Eigen::MatrixXd input_block(const GTCNNModel& m, const GraphPair& g, const Sample& s) {
  const int f0 = m.config.features.front();
  if (f0 == 1 && static_cast<int>(s.x.cols()) == g.t())
    return vectorize(s.x).values;
  if (g.t() == 1 && static_cast<int>(s.x.cols()) == f0)
    return s.x;
  throw ParameterError("input_block: sample window does not fit the model input");
}

struct TrainConfig {
  int epochs = 200;
  int batch_size = 100;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::array<double, 3> split{0.8, 0.1, 0.1};
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainResult {
  GTCNNModel model;
  std::vector<EpochStats> history;
  bool diverged = false;
  int diverged_epoch = -1;
  int diverged_batch = -1;
};

namespace detail {

inline LossGrad sample_loss(const GTCNNModel& m, const GraphPair& g, const Sample& s,
                            LossKind loss, ForwardCache* cache) {
  const ForwardResult fr = forward(m, g, input_block(m, g, s), cache);
  if (loss == LossKind::cross_entropy) return cross_entropy_loss(fr.output, s.label);
  return mse_loss(fr.output, s.target);
}

inline double coupling_l1(const GTCNNModel& m) {
  double acc = 0.0;
  for (const auto& row : m.coupling)
    for (double v : row) acc += std::abs(v);
  return acc;
}

}  // namespace detail

/// Average loss (no regularization term) over a dataset.
inline double mean_loss(const GTCNNModel& m, const GraphPair& g, const Dataset& data, LossKind loss) {
  if (data.empty()) throw ParameterError("mean_loss: empty dataset");
  double acc = 0.0;
  for (const Sample& s : data.samples) acc += detail::sample_loss(m, g, s, loss, nullptr).loss;
  return acc / data.size();
}

/// Loss of one sample including the l1 coupling term; used by the gradient
/// checks, which need the exact objective the backward pass differentiates.
inline double objective(const GTCNNModel& m, const GraphPair& g, const Sample& s, LossKind loss) {
  double v = detail::sample_loss(m, g, s, loss, nullptr).loss;
  if (m.config.trains_coupling()) v += m.config.l1_weight * detail::coupling_l1(m);
  return v;
}

/// Full objective gradient for one sample (data term plus l1 subgradient,
/// sign convention 0 at 0).
inline Gradients objective_gradient(const GTCNNModel& m, const GraphPair& g, const Sample& s,
                                    LossKind loss) {
  ForwardCache cache;
  const LossGrad lg = detail::sample_loss(m, g, s, loss, &cache);
  Gradients gr = zero_gradients(m);
  backward(m, g, cache, lg.d_output, gr);
  if (m.config.trains_coupling()) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const double v = m.coupling[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        gr.coupling[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
            m.config.l1_weight * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
      }
  }
  return gr;
}

struct MetricResult {
  double value = 0.0;
  int skipped = 0;  // MAPE targets below threshold
};

inline MetricResult evaluate_detail(const GTCNNModel& m, const GraphPair& g, const Dataset& data,
                                    Metric metric) {
  if (data.empty()) throw ParameterError("evaluate: empty dataset");
  MetricResult res;
  if (metric == Metric::accuracy) {
    int hits = 0;
    for (const Sample& s : data.samples) {
      const ForwardResult fr = forward(m, g, input_block(m, g, s));
      int arg = 0;
      fr.output.maxCoeff(&arg);
      if (arg == s.label) ++hits;
    }
    res.value = static_cast<double>(hits) / data.size();
    return res;
  }
  double acc = 0.0;
  long count = 0;
  for (const Sample& s : data.samples) {
    const ForwardResult fr = forward(m, g, input_block(m, g, s));
    for (Eigen::Index i = 0; i < fr.output.size(); ++i) {
      const double err = fr.output[i] - s.target[i];
      switch (metric) {
        case Metric::mae: acc += std::abs(err); ++count; break;
        case Metric::rmse: acc += err * err; ++count; break;
        case Metric::mape:
          if (std::abs(s.target[i]) < 1e-8) {
            ++res.skipped;
          } else {
            acc += std::abs(err / s.target[i]);
            ++count;
          }
          break;
        default: break;
      }
    }
  }
  if (metric == Metric::mape && count == 0)
    throw DegenerateError("evaluate: all MAPE targets below threshold");
  res.value = metric == Metric::rmse ? std::sqrt(acc / count) : acc / count;
  if (metric == Metric::mape) res.value *= 100.0;
  return res;
}

inline double evaluate(const GTCNNModel& m, const GraphPair& g, const Dataset& data, Metric metric,
                       int* skipped = nullptr) {
  const MetricResult r = evaluate_detail(m, g, data, metric);
  if (skipped) *skipped = r.skipped;
  return r.value;
}

/// Mini-batch ADAM over the train split; history records losses per epoch.
/// Single-threaded and bitwise deterministic for a fixed seed. A non-finite
/// loss stops training and flags the result with the epoch/batch index.
inline TrainResult train(GTCNNModel model, const Dataset& data, const TrainConfig& tc, LossKind loss,
                         const GraphPair& g) {
  if (data.empty()) throw ParameterError("train: empty dataset");
  if (tc.epochs < 0 || tc.batch_size < 1) throw ParameterError("train: bad epochs/batch size");
  const SplitIndices split = split_indices(data.size(), tc.split, tc.seed);
  const Dataset train_set = subset(data, split.train);
  const Dataset val_set = subset(data, split.val);
  if (train_set.empty()) throw ParameterError("train: empty training split");

  Rng rng(tc.seed + 0x9e3779b97f4a7c15ull);
  Eigen::VectorXd theta = pack_parameters(model);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(theta.size());
  long step = 0;

  TrainResult result;
  std::vector<int> order(static_cast<std::size_t>(train_set.size()));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    long seen = 0;
    const int batches = (train_set.size() + tc.batch_size - 1) / tc.batch_size;
    for (int b = 0; b < batches; ++b) {
      const int lo = b * tc.batch_size;
      const int hi = std::min(train_set.size(), lo + tc.batch_size);
      Gradients gr = zero_gradients(model);
      double batch_loss = 0.0;
      try {
        for (int idx = lo; idx < hi; ++idx) {
          const Sample& s = train_set.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(idx)])];
          ForwardCache cache;
          const LossGrad lg = detail::sample_loss(model, g, s, loss, &cache);
          batch_loss += lg.loss;
          backward(model, g, cache, lg.d_output, gr);
        }
      } catch (const NumericalError&) {
        batch_loss = std::numeric_limits<double>::quiet_NaN();
      }
      const double scale = 1.0 / (hi - lo);
      Eigen::VectorXd grad = pack_gradients(model, gr) * scale;
      batch_loss *= scale;
      if (model.config.trains_coupling()) {
        batch_loss += model.config.l1_weight * detail::coupling_l1(model);
        // l1 subgradient on the coupling scalars, sign(0) = 0
        Gradients l1g = zero_gradients(model);
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            const double v = model.coupling[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            l1g.coupling[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                model.config.l1_weight * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
          }
        grad += pack_gradients(model, l1g);
      }
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        result.diverged = true;
        result.diverged_epoch = epoch;
        result.diverged_batch = b;
        result.model = std::move(model);
        return result;
      }
      epoch_loss += batch_loss * (hi - lo);
      seen += hi - lo;

      ++step;
      adam_m = tc.beta1 * adam_m + (1.0 - tc.beta1) * grad;
      adam_v.array() = tc.beta2 * adam_v.array() + (1.0 - tc.beta2) * grad.array().square();
      const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      theta.array() -= tc.learning_rate * (adam_m.array() / bc1) /
                       ((adam_v.array() / bc2).sqrt() + tc.adam_eps);
      unpack_parameters(model, theta);
    }

    EpochStats es;
    es.epoch = epoch;
    es.train_loss = epoch_loss / seen;
    if (!val_set.empty()) {
      es.val_loss = mean_loss(model, g, val_set, loss);
      es.val_metric = loss == LossKind::cross_entropy
                          ? evaluate(model, g, val_set, Metric::accuracy)
                          : evaluate(model, g, val_set, Metric::rmse);
    }
    result.history.push_back(es);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace gtcnn
