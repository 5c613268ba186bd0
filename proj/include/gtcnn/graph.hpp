#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gtcnn/eig.hpp"
#include "gtcnn/errors.hpp"
#include "gtcnn/rng.hpp"
#include "gtcnn/sparse.hpp"

namespace gtcnn {

enum class GraphKind { spatial, temporal };

/// A graph represented by its shift operator. The symmetric flag is a
/// promise checked at construction: ||S - S^T||_max <= 1e-12.
struct Graph {
  SparseMatrix gso;
  GraphKind kind = GraphKind::spatial;
  bool symmetric = false;

  int size() const { return gso.rows(); }
};

inline Graph make_graph(SparseMatrix gso, GraphKind kind, bool symmetric) {
  if (gso.rows() != gso.cols()) throw ContractError("make_graph: shift operator not square");
  if (symmetric && !is_symmetric(gso)) throw ContractError("make_graph: symmetric flag set on asymmetric operator");
  return Graph{std::move(gso), kind, symmetric};
}

/// Bijection on {0..n-1}. Node i moves to position mapping[i]; the matrix
/// view is P with [P]_{i,mapping[i]} = 1, and graphs/signals transform as
/// P^T S P and P^T x.
class Permutation {
public:
  explicit Permutation(std::vector<int> mapping) : map_(std::move(mapping)) {
    std::vector<int> sorted = map_;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i)
      if (sorted[i] != static_cast<int>(i))
        throw ParameterError("Permutation: mapping is not a bijection on 0..n-1");
  }

  static Permutation identity(int n) {
    std::vector<int> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), 0);
    return Permutation(std::move(m));
  }

  static Permutation random(int n, Rng& rng) {
    std::vector<int> m(static_cast<std::size_t>(n));
    std::iota(m.begin(), m.end(), 0);
    rng.shuffle(m);
    return Permutation(std::move(m));
  }

  Permutation inverse() const {
    std::vector<int> inv(map_.size());
    for (std::size_t i = 0; i < map_.size(); ++i) inv[static_cast<std::size_t>(map_[i])] = static_cast<int>(i);
    return Permutation(std::move(inv));
  }

  int size() const { return static_cast<int>(map_.size()); }
  int operator[](int i) const { return map_[static_cast<std::size_t>(i)]; }

private:
  std::vector<int> map_;
};

/// P^T S P: entry (a, b) of the input lands at (p[a], p[b]).
inline Graph permute_graph(const Graph& g, const Permutation& p) {
  if (p.size() != g.size()) throw ParameterError("permute_graph: size mismatch");
  std::vector<Triplet> t = g.gso.to_triplets();
  for (Triplet& e : t) {
    e.row = p[e.row];
    e.col = p[e.col];
  }
  Graph out = g;
  out.gso = SparseMatrix::from_triplets(g.size(), g.size(), std::move(t));
  return out;
}

/// P^T x: entry a lands at p[a].
inline Eigen::VectorXd permute_signal(const Eigen::VectorXd& x, const Permutation& p) {
  if (p.size() != static_cast<int>(x.size())) throw ParameterError("permute_signal: size mismatch");
  Eigen::VectorXd y(x.size());
  for (int i = 0; i < x.size(); ++i) y[p[i]] = x[i];
  return y;
}

/// Stochastic block model with round-robin community assignment
/// (node i belongs to community i mod C). Each unordered pair draws one
/// Bernoulli variable, scanned in order (i, j) with i < j, so a seeded run
/// is exactly replayable.
inline std::pair<Graph, std::vector<int>> sbm_generate(int n, int communities, double p_in,
                                                       double p_out, std::uint64_t seed) {
  if (communities < 1 || n < communities) throw ParameterError("sbm_generate: need n >= communities >= 1");
  if (!(p_out >= 0.0 && p_in >= p_out && p_in <= 1.0))
    throw ParameterError("sbm_generate: need 0 <= p_out <= p_in <= 1");
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = i % communities;
  Rng rng(seed);
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double p = labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? p_in : p_out;
      if (rng.uniform() < p) {
        t.push_back({i, j, 1.0});
        t.push_back({j, i, 1.0});
      }
    }
  }
  Graph g = make_graph(SparseMatrix::from_triplets(n, n, std::move(t)), GraphKind::spatial, true);
  return {std::move(g), std::move(labels)};
}

/// Directed line graph on t nodes: entry (tau, tau-1) = 1, so S_T x shifts
/// a time series forward by one step. Nilpotent; t = 1 gives the 1x1 zero.
inline Graph line_graph(int t) {
  if (t < 1) throw ParameterError("line_graph: need t >= 1");
  std::vector<Triplet> e;
  for (int tau = 1; tau < t; ++tau) e.push_back({tau, tau - 1, 1.0});
  return make_graph(SparseMatrix::from_triplets(t, t, std::move(e)), GraphKind::temporal, false);
}

/// Directed cycle: entry (tau, (tau-1) mod t) = 1. Normal matrix; t = 1 is
/// the self-loop [1] and t = 2 the symmetric swap.
inline Graph cyclic_graph(int t) {
  if (t < 1) throw ParameterError("cyclic_graph: need t >= 1");
  std::vector<Triplet> e;
  for (int tau = 0; tau < t; ++tau) e.push_back({tau, (tau - 1 + t) % t, 1.0});
  SparseMatrix s = SparseMatrix::from_triplets(t, t, std::move(e));
  const bool sym = is_symmetric(s);
  return make_graph(std::move(s), GraphKind::temporal, sym);
}

/// Undirected path on t nodes. The symmetric temporal graph used whenever
/// spectral analysis needs a diagonalizable shift with a real spectrum.
inline Graph path_graph(int t) {
  if (t < 1) throw ParameterError("path_graph: need t >= 1");
  std::vector<Triplet> e;
  for (int tau = 1; tau < t; ++tau) {
    e.push_back({tau, tau - 1, 1.0});
    e.push_back({tau - 1, tau, 1.0});
  }
  return make_graph(SparseMatrix::from_triplets(t, t, std::move(e)), GraphKind::temporal, true);
}

/// Combinatorial Laplacian L = D - A of a symmetric graph.
inline SparseMatrix laplacian(const Graph& g) {
  if (!g.symmetric) throw ContractError("laplacian: graph must be symmetric");
  const int n = g.size();
  std::vector<Triplet> t = g.gso.to_triplets();
  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (Triplet& e : t) {
    degree[static_cast<std::size_t>(e.row)] += e.value;
    e.value = -e.value;
  }
  for (int i = 0; i < n; ++i) t.push_back({i, i, degree[static_cast<std::size_t>(i)]});
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

/// Heat propagator e^{-time L} applied through the eigendecomposition of
/// the Laplacian. Caches the decomposition so that repeated times over one
/// graph cost a dense multiply each.
class HeatKernel {
public:
  explicit HeatKernel(const Graph& g) {
    if (!g.symmetric) throw ContractError("HeatKernel: graph must be symmetric");
    EigenDecomposition d = sym_eig(laplacian(g));
    vectors_ = std::move(d.eigenvectors);
    lambdas_ = std::move(d.eigenvalues);
  }

  Eigen::VectorXd at(const Eigen::VectorXd& x0, double time) const {
    if (time < 0.0) throw ParameterError("HeatKernel: time must be >= 0");
    if (x0.size() != vectors_.rows()) throw ParameterError("HeatKernel: signal size mismatch");
    const Eigen::VectorXd coeffs = vectors_.transpose() * x0;
    const Eigen::VectorXd damped = (-time * lambdas_.array()).exp() * coeffs.array();
    return vectors_ * damped;
  }

private:
  Eigen::MatrixXd vectors_;
  Eigen::VectorXd lambdas_;
};

inline Eigen::VectorXd heat_diffusion(const Graph& g, const Eigen::VectorXd& x0, double time) {
  return HeatKernel(g).at(x0, time);
}

}  // namespace gtcnn
