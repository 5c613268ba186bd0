#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gtcnn/errors.hpp"

namespace gtcnn {

/// Entries with |value| at or below this threshold are never stored.
inline constexpr double kSparseDropTol = 1e-15;

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

/// Compressed sparse row matrix of doubles. Immutable after construction;
/// every graph shift operator in the library is one of these.
///
/// Invariants: row_offsets has n_rows+1 non-decreasing entries ending at
/// nnz; column indices are strictly increasing within a row; no entry with
/// |value| <= kSparseDropTol is stored.
class SparseMatrix {
public:
  SparseMatrix() : rows_(0), cols_(0), offsets_{0} {}

  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries) {
    if (rows < 0 || cols < 0) throw ParameterError("SparseMatrix: negative dimension");
    for (const Triplet& t : entries) {
      if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
        throw ParameterError("SparseMatrix: triplet index out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
    std::size_t i = 0;
    for (int r = 0; r < rows; ++r) {
      while (i < entries.size() && entries[i].row == r) {
        double v = entries[i].value;
        const int c = entries[i].col;
        ++i;
        while (i < entries.size() && entries[i].row == r && entries[i].col == c) {
          v += entries[i].value;  // duplicates accumulate
          ++i;
        }
        if (std::abs(v) > kSparseDropTol) {
          m.cols_idx_.push_back(c);
          m.values_.push_back(v);
        }
      }
      m.offsets_[static_cast<std::size_t>(r) + 1] = static_cast<int>(m.values_.size());
    }
    return m;
  }

  static SparseMatrix identity(int n) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
  }

  static SparseMatrix from_dense(const Eigen::MatrixXd& d, double drop_tol = kSparseDropTol) {
    std::vector<Triplet> t;
    for (int r = 0; r < d.rows(); ++r)
      for (int c = 0; c < d.cols(); ++c)
        if (std::abs(d(r, c)) > drop_tol) t.push_back({r, c, d(r, c)});
    return from_triplets(static_cast<int>(d.rows()), static_cast<int>(d.cols()), std::move(t));
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nnz() const { return static_cast<int>(values_.size()); }

  const std::vector<int>& row_offsets() const { return offsets_; }
  const std::vector<int>& col_indices() const { return cols_idx_; }
  const std::vector<double>& values() const { return values_; }

  std::vector<Triplet> to_triplets() const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (int r = 0; r < rows_; ++r)
      for (int i = offsets_[r]; i < offsets_[r + 1]; ++i)
        t.push_back({r, cols_idx_[static_cast<std::size_t>(i)], values_[static_cast<std::size_t>(i)]});
    return t;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows_, cols_);
    for (int r = 0; r < rows_; ++r)
      for (int i = offsets_[r]; i < offsets_[r + 1]; ++i)
        d(r, cols_idx_[static_cast<std::size_t>(i)]) = values_[static_cast<std::size_t>(i)];
    return d;
  }

  /// y = A x.
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    if (x.size() != cols_) throw ParameterError("SparseMatrix::apply: size mismatch");
    Eigen::VectorXd y(rows_);
    for (int r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (int i = offsets_[r]; i < offsets_[r + 1]; ++i)
        acc += values_[static_cast<std::size_t>(i)] * x[cols_idx_[static_cast<std::size_t>(i)]];
      y[r] = acc;
    }
    return y;
  }

  /// Y = A X for a dense block of column signals.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    if (x.rows() != cols_) throw ParameterError("SparseMatrix::apply: size mismatch");
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(rows_, x.cols());
    for (int r = 0; r < rows_; ++r)
      for (int i = offsets_[r]; i < offsets_[r + 1]; ++i)
        y.row(r) += values_[static_cast<std::size_t>(i)] * x.row(cols_idx_[static_cast<std::size_t>(i)]);
    return y;
  }

  SparseMatrix transposed() const {
    std::vector<Triplet> t = to_triplets();
    for (Triplet& e : t) std::swap(e.row, e.col);
    return from_triplets(cols_, rows_, std::move(t));
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  double coeff(int r, int c) const {
    for (int i = offsets_[r]; i < offsets_[r + 1]; ++i)
      if (cols_idx_[static_cast<std::size_t>(i)] == c) return values_[static_cast<std::size_t>(i)];
    return 0.0;
  }

private:
  int rows_, cols_;
  std::vector<int> offsets_;
  std::vector<int> cols_idx_;
  std::vector<double> values_;
};

/// a*A + b*B with the drop rule applied to cancellations.
inline SparseMatrix add(double a, const SparseMatrix& A, double b, const SparseMatrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw ParameterError("sparse add: shape mismatch");
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(A.nnz() + B.nnz()));
  for (Triplet e : A.to_triplets()) {
    e.value *= a;
    t.push_back(e);
  }
  for (Triplet e : B.to_triplets()) {
    e.value *= b;
    t.push_back(e);
  }
  return SparseMatrix::from_triplets(A.rows(), A.cols(), std::move(t));
}

inline SparseMatrix scale(double a, const SparseMatrix& A) {
  std::vector<Triplet> t = A.to_triplets();
  for (Triplet& e : t) e.value *= a;
  return SparseMatrix::from_triplets(A.rows(), A.cols(), std::move(t));
}

/// Kronecker product A (x) B, built sparsely. Row (ia*B.rows + ib) holds
/// the products of A's row ia with B's row ib, so output indices stay
/// sorted without an extra pass.
inline SparseMatrix kron(const SparseMatrix& A, const SparseMatrix& B) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(A.nnz()) * static_cast<std::size_t>(B.nnz()));
  const auto& ao = A.row_offsets();
  const auto& ac = A.col_indices();
  const auto& av = A.values();
  const auto& bo = B.row_offsets();
  const auto& bc = B.col_indices();
  const auto& bv = B.values();
  for (int ia = 0; ia < A.rows(); ++ia) {
    for (int ib = 0; ib < B.rows(); ++ib) {
      const int row = ia * B.rows() + ib;
      for (int p = ao[static_cast<std::size_t>(ia)]; p < ao[static_cast<std::size_t>(ia) + 1]; ++p) {
        for (int q = bo[static_cast<std::size_t>(ib)]; q < bo[static_cast<std::size_t>(ib) + 1]; ++q) {
          t.push_back({row, ac[static_cast<std::size_t>(p)] * B.cols() + bc[static_cast<std::size_t>(q)],
                       av[static_cast<std::size_t>(p)] * bv[static_cast<std::size_t>(q)]});
        }
      }
    }
  }
  return SparseMatrix::from_triplets(A.rows() * B.rows(), A.cols() * B.cols(), std::move(t));
}

/// Max-norm symmetry check, ||A - A^T||_max <= tol. Only meaningful for
/// tol above kSparseDropTol (the difference matrix drops smaller entries).
inline bool is_symmetric(const SparseMatrix& A, double tol = 1e-12) {
  if (A.rows() != A.cols()) return false;
  return add(1.0, A, -1.0, A.transposed()).max_abs() <= tol;
}

}  // namespace gtcnn
