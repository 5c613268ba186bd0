#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "gtcnn/errors.hpp"
#include "gtcnn/graph.hpp"
#include "gtcnn/sparse.hpp"

namespace gtcnn {

enum class ProductKind { kronecker, cartesian, strong, parametric };

/// Scalars s[i][j] weight the term S_T^i (x) S^j: i is the temporal power,
/// j the spatial power. The three classic products are the fixed patterns
/// returned by scalars().
struct ProductSpec {
  ProductKind kind = ProductKind::cartesian;
  std::array<std::array<double, 2>, 2> s{{{0.0, 0.0}, {0.0, 0.0}}};

  static ProductSpec kronecker() { return {ProductKind::kronecker, {{{0, 0}, {0, 1}}}}; }
  static ProductSpec cartesian() { return {ProductKind::cartesian, {{{0, 1}, {1, 0}}}}; }
  static ProductSpec strong() { return {ProductKind::strong, {{{0, 1}, {1, 1}}}}; }

  static ProductSpec parametric(const std::array<std::array<double, 2>, 2>& scalars) {
    for (const auto& row : scalars)
      for (double v : row)
        if (!std::isfinite(v)) throw ParameterError("ProductSpec: parametric scalar not finite");
    return {ProductKind::parametric, scalars};
  }

  /// The coupling scalars, also for the fixed kinds.
  std::array<std::array<double, 2>, 2> scalars() const {
    switch (kind) {
      case ProductKind::kronecker: return {{{0, 0}, {0, 1}}};
      case ProductKind::cartesian: return {{{0, 1}, {1, 0}}};
      case ProductKind::strong: return {{{0, 1}, {1, 1}}};
      case ProductKind::parametric: return s;
    }
    throw ContractError("ProductSpec: unknown kind");
  }
};

struct ProductGraph {
  SparseMatrix gso;  // NT x NT
  int n_spatial = 0;
  int n_temporal = 0;
  ProductSpec spec;
};

/// S_diamond = sum_{i,j in {0,1}} s_ij (S_T^i (x) S^j), built term by term
/// with sparse Kronecker products; no dense NT x NT intermediate.
inline ProductGraph build_product(const Graph& spatial, const Graph& temporal,
                                  const ProductSpec& spec) {
  if (spatial.gso.rows() != spatial.gso.cols() || temporal.gso.rows() != temporal.gso.cols())
    throw ParameterError("build_product: factor shift operators must be square");
  const int n = spatial.size();
  const int t = temporal.size();
  const SparseMatrix in = SparseMatrix::identity(n);
  const SparseMatrix it = SparseMatrix::identity(t);
  const auto s = spec.scalars();
  SparseMatrix acc = SparseMatrix::from_triplets(n * t, n * t, {});
  const SparseMatrix* tfac[2] = {&it, &temporal.gso};
  const SparseMatrix* sfac[2] = {&in, &spatial.gso};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      if (s[i][j] != 0.0)
        acc = add(1.0, acc, s[i][j], kron(*tfac[i], *sfac[j]));
  return ProductGraph{std::move(acc), n, t, spec};
}

/// vec(X) for X = [x_1 ... x_T]: node index varies fastest, entry (i, t)
/// lands at flat index t*N + i.
struct ProductSignal {
  Eigen::VectorXd values;  // length N*T
  int n_spatial = 0;
  int n_temporal = 0;
};

inline ProductSignal vectorize(const Eigen::MatrixXd& x_matrix) {
  ProductSignal ps;
  ps.n_spatial = static_cast<int>(x_matrix.rows());
  ps.n_temporal = static_cast<int>(x_matrix.cols());
  ps.values = Eigen::Map<const Eigen::VectorXd>(x_matrix.data(), x_matrix.size());
  return ps;
}

inline Eigen::MatrixXd devectorize(const ProductSignal& ps) {
  if (ps.values.size() != static_cast<Eigen::Index>(ps.n_spatial) * ps.n_temporal)
    throw ParameterError("devectorize: length != N*T");
  return Eigen::Map<const Eigen::MatrixXd>(ps.values.data(), ps.n_spatial, ps.n_temporal);
}

}  // namespace gtcnn
