#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "gtcnn/errors.hpp"
#include "gtcnn/sparse.hpp"

namespace gtcnn {

/// Full symmetric eigendecomposition. Eigenvalues descending; column i of
/// eigenvectors pairs with eigenvalue i. Sign convention: the largest-modulus
/// entry of each eigenvector is positive, ties broken by the lowest index.
/// The fixed ordering and signs make eigenvector comparisons across matrices
/// (misalignment computations) deterministic.
struct EigenDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  int size() const { return static_cast<int>(eigenvalues.size()); }
};

namespace detail {

inline void fix_eigenvector_signs(Eigen::MatrixXd& v) {
  for (int c = 0; c < v.cols(); ++c) {
    int arg = 0;
    double best = -1.0;
    for (int r = 0; r < v.rows(); ++r) {
      const double a = std::abs(v(r, c));
      if (a > best) {  // strict improvement keeps ties at the lowest index
        best = a;
        arg = r;
      }
    }
    if (v(arg, c) < 0.0) v.col(c) = -v.col(c);
  }
}

}  // namespace detail

/// Dense-input overload; the matrix must be symmetric within 1e-12.
inline EigenDecomposition sym_eig(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ContractError("sym_eig: matrix not square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ContractError("sym_eig: matrix not symmetric within 1e-12");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    throw NumericalError("sym_eig: eigensolver failed to converge");
  EigenDecomposition d;
  // Eigen returns ascending order; flip to descending.
  d.eigenvalues = solver.eigenvalues().reverse();
  d.eigenvectors = solver.eigenvectors().rowwise().reverse();
  detail::fix_eigenvector_signs(d.eigenvectors);
  return d;
}

inline EigenDecomposition sym_eig(const SparseMatrix& m) {
  return sym_eig(m.to_dense());
}

}  // namespace gtcnn
