#pragma once

#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "gtcnn/graph.hpp"
#include "gtcnn/rng.hpp"
#include "gtcnn/sparse.hpp"

namespace testutil {

/// Random sparse matrix with the given fill density; dense-oracle tests
/// compare against Eigen built from the same entries.
inline gtcnn::SparseMatrix random_sparse(int rows, int cols, double density, gtcnn::Rng& rng) {
  std::vector<gtcnn::Triplet> t;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (rng.uniform() < density) t.push_back({r, c, rng.uniform(-1.0, 1.0)});
  return gtcnn::SparseMatrix::from_triplets(rows, cols, std::move(t));
}

inline gtcnn::Graph random_symmetric_graph(int n, double density, gtcnn::Rng& rng,
                                           gtcnn::GraphKind kind = gtcnn::GraphKind::spatial) {
  std::vector<gtcnn::Triplet> t;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < density) {
        const double w = rng.uniform(0.2, 1.0);
        t.push_back({i, j, w});
        t.push_back({j, i, w});
      }
  return gtcnn::make_graph(gtcnn::SparseMatrix::from_triplets(n, n, std::move(t)), kind, true);
}

inline Eigen::VectorXd random_vector(int n, gtcnn::Rng& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, gtcnn::Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.normal();
  return m;
}

/// Dense Kronecker oracle, independent of the library's sparse kron.
inline Eigen::MatrixXd dense_kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

inline Eigen::MatrixXd dense_power(const Eigen::MatrixXd& a, int k) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int i = 0; i < k; ++i) p = p * a;
  return p;
}

}  // namespace testutil
