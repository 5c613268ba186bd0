#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "gtcnn/errors.hpp"
#include "gtcnn/graph.hpp"
#include "gtcnn/product.hpp"
#include "gtcnn/sparse.hpp"

namespace gtcnn {

/// Coefficients h_0..h_K of a polynomial filter in a single shift operator.
struct MonoFilterCoeffs {
  std::vector<double> h;

  int order() const { return static_cast<int>(h.size()) - 1; }

  void validate() const {
    if (h.empty()) throw ParameterError("MonoFilterCoeffs: empty coefficient list");
    for (double v : h)
      if (!std::isfinite(v)) throw ParameterError("MonoFilterCoeffs: non-finite coefficient");
  }
};

/// Coefficient grid h_kl of a joint filter: row k is the spatial power,
/// column l the temporal power.
struct JointFilterCoeffs {
  Eigen::MatrixXd h;  // (k_bar+1) x (k_tilde+1)

  int k_bar() const { return static_cast<int>(h.rows()) - 1; }
  int k_tilde() const { return static_cast<int>(h.cols()) - 1; }

  static JointFilterCoeffs zero(int k_bar, int k_tilde) {
    return {Eigen::MatrixXd::Zero(k_bar + 1, k_tilde + 1)};
  }

  void validate() const {
    if (h.rows() < 1 || h.cols() < 1) throw ParameterError("JointFilterCoeffs: empty grid");
    if (!h.allFinite()) throw ParameterError("JointFilterCoeffs: non-finite coefficient");
  }
};

/// Counts shift passes so tests can certify the linear-cost claim. One
/// spatial pass applies (I_T (x) S) to a full N x T block; one temporal pass
/// sweeps (S_T (x) I_N) across the whole table row of spatial shifts.
struct ShiftStats {
  int spatial_passes = 0;
  int temporal_passes = 0;
};

/// Y = (I_T (x) S) X for X of shape NT x F: per time slice, one sparse
/// multiply of an N x F block.
inline Eigen::MatrixXd spatial_shift(const SparseMatrix& s, const Eigen::MatrixXd& x, int n, int t) {
  if (x.rows() != static_cast<Eigen::Index>(n) * t || s.rows() != n || s.cols() != n)
    throw ParameterError("spatial_shift: shape mismatch");
  Eigen::MatrixXd y(x.rows(), x.cols());
  for (int slice = 0; slice < t; ++slice)
    y.middleRows(slice * n, n) = s.apply(Eigen::MatrixXd(x.middleRows(slice * n, n)));
  return y;
}

/// Y = (S_T (x) I_N) X for X of shape NT x F: row tau of S_T mixes whole
/// N x F blocks.
inline Eigen::MatrixXd temporal_shift(const SparseMatrix& s_t, const Eigen::MatrixXd& x, int n, int t) {
  if (x.rows() != static_cast<Eigen::Index>(n) * t || s_t.rows() != t || s_t.cols() != t)
    throw ParameterError("temporal_shift: shape mismatch");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  const auto& off = s_t.row_offsets();
  const auto& col = s_t.col_indices();
  const auto& val = s_t.values();
  for (int tau = 0; tau < t; ++tau)
    for (int i = off[static_cast<std::size_t>(tau)]; i < off[static_cast<std::size_t>(tau) + 1]; ++i)
      y.middleRows(tau * n, n) +=
          val[static_cast<std::size_t>(i)] * x.middleRows(col[static_cast<std::size_t>(i)] * n, n);
  return y;
}

/// y = sum_k h_k S_diamond^k x by repeated sparse mat-vec; exactly K
/// applications of the product shift, no materialized powers.
inline ProductSignal apply_mono_filter(const ProductGraph& pg, const MonoFilterCoeffs& h,
                                       const ProductSignal& x) {
  h.validate();
  if (x.values.size() != pg.gso.rows() || x.n_spatial != pg.n_spatial || x.n_temporal != pg.n_temporal)
    throw ParameterError("apply_mono_filter: signal does not match product graph");
  Eigen::VectorXd shifted = x.values;
  Eigen::VectorXd y = h.h[0] * shifted;
  for (int k = 1; k <= h.order(); ++k) {
    shifted = pg.gso.apply(shifted);
    y += h.h[static_cast<std::size_t>(k)] * shifted;
  }
  return ProductSignal{std::move(y), x.n_spatial, x.n_temporal};
}

namespace detail {

/// Shared table recursion over NT x F blocks: builds the row of spatial
/// shifts S^k X once, then sweeps temporal shifts across it, calling
/// `accumulate(k, l, block)` for every (k, l) cell. Layout maximizes reuse
/// and keeps memory at one N x T x F block per spatial order.
template <typename Accumulate>
inline void sweep_shift_table(const SparseMatrix& s, const SparseMatrix& s_t, int n, int t,
                              const Eigen::MatrixXd& x, int k_bar, int k_tilde,
                              Accumulate&& accumulate, ShiftStats* stats) {
  std::vector<Eigen::MatrixXd> row(static_cast<std::size_t>(k_bar) + 1);
  row[0] = x;
  for (int k = 1; k <= k_bar; ++k) {
    row[static_cast<std::size_t>(k)] = spatial_shift(s, row[static_cast<std::size_t>(k) - 1], n, t);
    if (stats) ++stats->spatial_passes;
  }
  for (int k = 0; k <= k_bar; ++k) accumulate(k, 0, row[static_cast<std::size_t>(k)]);
  for (int l = 1; l <= k_tilde; ++l) {
    for (int k = 0; k <= k_bar; ++k)
      row[static_cast<std::size_t>(k)] = temporal_shift(s_t, row[static_cast<std::size_t>(k)], n, t);
    if (stats) ++stats->temporal_passes;
    for (int k = 0; k <= k_bar; ++k) accumulate(k, l, row[static_cast<std::size_t>(k)]);
  }
}

}  // namespace detail

/// y = sum_{k,l} h_kl (S_T^l (x) S^k) x through the shift-table recursion;
/// cost O(Kbar T nnz(S) + Ktilde N nnz(S_T)) passes, no NT x NT matrix.
inline ProductSignal apply_joint_filter(const Graph& spatial, const Graph& temporal,
                                        const JointFilterCoeffs& h, const ProductSignal& x,
                                        ShiftStats* stats = nullptr) {
  h.validate();
  const int n = spatial.size();
  const int t = temporal.size();
  if (x.n_spatial != n || x.n_temporal != t ||
      x.values.size() != static_cast<Eigen::Index>(n) * t)
    throw ParameterError("apply_joint_filter: signal does not match graphs");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.values.size(), 1);
  const Eigen::MatrixXd x0 = x.values;
  detail::sweep_shift_table(
      spatial.gso, temporal.gso, n, t, x0, h.k_bar(), h.k_tilde(),
      [&](int k, int l, const Eigen::MatrixXd& block) {
        const double c = h.h(k, l);
        if (c != 0.0) y += c * block;
      },
      stats);
  return ProductSignal{y.col(0), n, t};
}

/// Multinomial expansion of powers of a parametric product shift
/// sum_{ij} s_ij (S_T^i (x) S^j). powers(k) is the coefficient grid of the
/// k-th power on a (K+1) x (K+1) grid (row: spatial power, col: temporal).
/// Because the terms commute under the Kronecker mixed-product rule, the
/// expansion is plain 2-D polynomial arithmetic.
class ParametricExpansion {
public:
  ParametricExpansion(const std::array<std::array<double, 2>, 2>& s, int max_order) {
    if (max_order < 0 || max_order > 6)
      throw ParameterError("ParametricExpansion: order must be in [0, 6]");
    const int m = max_order + 1;
    Eigen::MatrixXd base = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < 2 && i < m; ++i)
      for (int j = 0; j < 2 && j < m; ++j)
        base(j, i) = s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    powers_.resize(static_cast<std::size_t>(max_order) + 1);
    powers_[0] = Eigen::MatrixXd::Zero(m, m);
    powers_[0](0, 0) = 1.0;
    for (int k = 1; k <= max_order; ++k)
      powers_[static_cast<std::size_t>(k)] = convolve(powers_[static_cast<std::size_t>(k) - 1], base);
  }

  int max_order() const { return static_cast<int>(powers_.size()) - 1; }
  const Eigen::MatrixXd& powers(int k) const { return powers_.at(static_cast<std::size_t>(k)); }

  /// Joint coefficients of sum_k h_k S_diamond^k.
  JointFilterCoeffs joint(const MonoFilterCoeffs& h) const {
    h.validate();
    if (h.order() > max_order()) throw ParameterError("ParametricExpansion: filter order exceeds expansion");
    const int m = max_order() + 1;
    Eigen::MatrixXd grid = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k <= h.order(); ++k) grid += h.h[static_cast<std::size_t>(k)] * powers_[static_cast<std::size_t>(k)];
    return {grid};
  }

private:
  static Eigen::MatrixXd convolve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(a.rows(), a.cols());
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c) {
        const double v = a(r, c);
        if (v == 0.0) continue;
        const int rmax = static_cast<int>(std::min<Eigen::Index>(b.rows(), a.rows() - r));
        const int cmax = static_cast<int>(std::min<Eigen::Index>(b.cols(), a.cols() - c));
        for (int r2 = 0; r2 < rmax; ++r2)
          for (int c2 = 0; c2 < cmax; ++c2) out(r + r2, c + c2) += v * b(r2, c2);
      }
    return out;
  }

  std::vector<Eigen::MatrixXd> powers_;
};

/// Rewrites a monolithic filter over a parametric product graph as an
/// equivalent joint (k, l) coefficient grid.
inline JointFilterCoeffs expand_parametric(const ProductSpec& spec, const MonoFilterCoeffs& h) {
  if (spec.kind != ProductKind::parametric)
    throw ParameterError("expand_parametric: spec must be parametric");
  h.validate();
  return ParametricExpansion(spec.scalars(), h.order()).joint(h);
}

/// Bank of joint filters: taps(k, l) is the F_out x F_in coefficient matrix
/// of the (S_T^l (x) S^k) term.
struct FilterBank {
  std::vector<Eigen::MatrixXd> taps;  // indexed k * (k_tilde+1) + l
  int k_bar = 0;
  int k_tilde = 0;
  int f_out = 0;
  int f_in = 0;

  static FilterBank zero(int k_bar, int k_tilde, int f_out, int f_in) {
    FilterBank b{{}, k_bar, k_tilde, f_out, f_in};
    b.taps.assign(static_cast<std::size_t>((k_bar + 1) * (k_tilde + 1)),
                  Eigen::MatrixXd::Zero(f_out, f_in));
    return b;
  }

  Eigen::MatrixXd& tap(int k, int l) { return taps[static_cast<std::size_t>(k * (k_tilde + 1) + l)]; }
  const Eigen::MatrixXd& tap(int k, int l) const {
    return taps[static_cast<std::size_t>(k * (k_tilde + 1) + l)];
  }

  void validate() const {
    if (taps.size() != static_cast<std::size_t>((k_bar + 1) * (k_tilde + 1)))
      throw ParameterError("FilterBank: tap count does not match orders");
    for (const auto& m : taps) {
      if (m.rows() != f_out || m.cols() != f_in)
        throw ParameterError("FilterBank: tap shape mismatch");
      if (!m.allFinite()) throw ParameterError("FilterBank: non-finite tap");
    }
  }
};

/// Pre-nonlinearity layer map: sum_{k,l} Shift_{k,l}(X_in) H_kl^T for
/// X_in of shape NT x F_in; returns NT x F_out.
inline Eigen::MatrixXd apply_filter_bank(const Graph& spatial, const Graph& temporal,
                                         const FilterBank& bank, const Eigen::MatrixXd& x_in,
                                         ShiftStats* stats = nullptr) {
  bank.validate();
  const int n = spatial.size();
  const int t = temporal.size();
  if (x_in.rows() != static_cast<Eigen::Index>(n) * t || x_in.cols() != bank.f_in)
    throw ParameterError("apply_filter_bank: input shape mismatch");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x_in.rows(), bank.f_out);
  detail::sweep_shift_table(
      spatial.gso, temporal.gso, n, t, x_in, bank.k_bar, bank.k_tilde,
      [&](int k, int l, const Eigen::MatrixXd& block) {
        const Eigen::MatrixXd& h = bank.tap(k, l);
        if (!h.isZero(0.0)) y.noalias() += block * h.transpose();
      },
      stats);
  return y;
}

}  // namespace gtcnn
