#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "gtcnn/eig.hpp"
#include "gtcnn/errors.hpp"
#include "gtcnn/filters.hpp"
#include "gtcnn/graph.hpp"
#include "gtcnn/nn.hpp"
#include "gtcnn/rng.hpp"

namespace gtcnn {

/// Symmetric error matrix E of the relative perturbation model, with its
/// operator norm (epsilon in the stability bound) and Frobenius norm.
struct ErrorMatrix {
  Eigen::MatrixXd e;
  double operator_norm = 0.0;
  double frobenius_norm = 0.0;
};

inline ErrorMatrix make_error_matrix(Eigen::MatrixXd e) {
  if (e.rows() != e.cols()) throw ParameterError("ErrorMatrix: not square");
  if ((e - e.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ParameterError("ErrorMatrix: not symmetric within 1e-12");
  ErrorMatrix em;
  em.frobenius_norm = e.norm();
  em.operator_norm = e.size() == 0 ? 0.0 : sym_eig(e).eigenvalues.cwiseAbs().maxCoeff();
  em.e = std::move(e);
  return em;
}

namespace detail {

inline Eigen::MatrixXd random_symmetric(int n, Rng& rng) {
  Eigen::MatrixXd e(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double v = rng.normal();
      e(i, j) = v;
      e(j, i) = v;
    }
  return e;
}

}  // namespace detail

/// SNR convention of the relative model: the error energy enters twice
/// (ES and SE), so SNR = 10 log10( ||S||_F^2 / (2 ||E||_F^2) ).
inline double snr_db_of(const Graph& spatial, const ErrorMatrix& e) {
  return 10.0 * std::log10(std::pow(spatial.gso.frobenius_norm(), 2) /
                           (2.0 * e.frobenius_norm * e.frobenius_norm));
}

/// Gaussian symmetric error rescaled to hit the requested SNR exactly.
inline ErrorMatrix sample_error_at_snr(const Graph& spatial, double snr_db, Rng& rng) {
  if (!spatial.symmetric) throw ParameterError("sample_error_at_snr: spatial graph must be symmetric");
  const double s_energy = std::pow(spatial.gso.frobenius_norm(), 2);
  if (s_energy <= 0.0) throw DegenerateError("sample_error_at_snr: zero spatial graph");
  Eigen::MatrixXd e = detail::random_symmetric(spatial.size(), rng);
  const double target = s_energy / (2.0 * std::pow(10.0, snr_db / 10.0));
  e *= std::sqrt(target) / e.norm();
  return make_error_matrix(std::move(e));
}

/// Gaussian symmetric direction rescaled to operator norm eps.
inline ErrorMatrix sample_error_at_eps(const Graph& spatial, double eps, Rng& rng) {
  if (!spatial.symmetric) throw ParameterError("sample_error_at_eps: spatial graph must be symmetric");
  if (eps < 0.0) throw ParameterError("sample_error_at_eps: eps must be >= 0");
  ErrorMatrix raw = make_error_matrix(detail::random_symmetric(spatial.size(), rng));
  if (raw.operator_norm <= 0.0) throw DegenerateError("sample_error_at_eps: degenerate draw");
  return make_error_matrix(raw.e * (eps / raw.operator_norm));
}

inline ErrorMatrix scale_error(const ErrorMatrix& e, double factor) {
  return make_error_matrix(e.e * factor);
}

/// Relative perturbation S_hat = S + ES + SE, symmetrized against rounding
/// and cleaned by the sparse drop rule.
inline Graph relative_perturb(const Graph& spatial, const ErrorMatrix& e) {
  if (e.e.rows() != spatial.size()) throw ParameterError("relative_perturb: size mismatch");
  if (!spatial.symmetric) throw ParameterError("relative_perturb: spatial graph must be symmetric");
  const Eigen::MatrixXd s = spatial.gso.to_dense();
  Eigen::MatrixXd hat = s + e.e * s + s * e.e;
  hat = 0.5 * (hat + hat.transpose()).eval();
  return make_graph(SparseMatrix::from_dense(hat), GraphKind::spatial, true);
}

/// delta from the eigenvector misalignment norm ||U - V||. The theorem
/// statement squares the norm; the variant form (norm unsquared) is kept
/// for sensitivity checks.
inline double misalignment_to_delta(double misnorm, bool squared_norm_form = true) {
  const double base = squared_norm_form ? misnorm * misnorm : misnorm;
  return (base + 1.0) * (base + 1.0) - 1.0;
}

/// Eigenvector misalignment between the spatial shift and the error matrix,
/// both decomposed with the library's fixed ordering and sign convention.
inline double misalignment_delta(const Graph& spatial, const ErrorMatrix& e,
                                 bool squared_norm_form = true) {
  if (e.e.rows() != spatial.size()) throw ParameterError("misalignment_delta: size mismatch");
  const EigenDecomposition sd = sym_eig(spatial.gso);
  const EigenDecomposition ed = sym_eig(e.e);
  const Eigen::MatrixXd diff = ed.eigenvectors - sd.eigenvectors;
  const double misnorm = diff.jacobiSvd().singularValues()[0];
  return misalignment_to_delta(misnorm, squared_norm_form);
}

/// Theorem bound L F^{L-1} * 2C(1 + delta T sqrt(N)) * eps * ||x||.
inline double stability_bound(double c_est, double delta, double eps, int layers, int features,
                              int n, int t, double x_norm) {
  if (c_est < 0 || delta < 0 || eps < 0 || layers < 1 || features < 1 || n < 1 || t < 1 || x_norm < 0)
    throw ParameterError("stability_bound: arguments must be nonnegative (L, F, N, T >= 1)");
  const double discriminability = layers * std::pow(static_cast<double>(features), layers - 1);
  const double filter_term = 2.0 * c_est * (1.0 + delta * t * std::sqrt(static_cast<double>(n)));
  return discriminability * filter_term * eps * x_norm;
}

inline std::vector<Eigen::VectorXd> random_unit_probes(int dim, int count, Rng& rng) {
  if (count < 1) throw ParameterError("random_unit_probes: need count >= 1");
  std::vector<Eigen::VectorXd> probes;
  probes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v[j] = rng.normal();
    probes.push_back(v / v.norm());
  }
  return probes;
}

/// Max over probes of || H(S_T, S_hat) x - H(S_T, S) x ||_2; a lower bound
/// on the operator distance that tightens with more probes.
inline double empirical_filter_distance(const Graph& spatial, const Graph& perturbed,
                                        const Graph& temporal, const JointFilterCoeffs& h,
                                        const std::vector<Eigen::VectorXd>& probes) {
  if (probes.empty()) throw ParameterError("empirical_filter_distance: need at least one probe");
  const int n = spatial.size(), t = temporal.size();
  double worst = 0.0;
  for (const Eigen::VectorXd& x : probes) {
    ProductSignal ps{x, n, t};
    const Eigen::VectorXd ya = apply_joint_filter(spatial, temporal, h, ps).values;
    const Eigen::VectorXd yb = apply_joint_filter(perturbed, temporal, h, ps).values;
    worst = std::max(worst, (ya - yb).norm());
  }
  return worst;
}

inline double empirical_filter_distance(const Graph& spatial, const Graph& perturbed,
                                        const Graph& temporal, const JointFilterCoeffs& h,
                                        int trials, Rng& rng) {
  if (trials < 1) throw ParameterError("empirical_filter_distance: need trials >= 1");
  return empirical_filter_distance(spatial, perturbed, temporal, h,
                                   random_unit_probes(spatial.size() * temporal.size(), trials, rng));
}

/// Max over probes of the pre-readout feature distance between the model
/// run on the nominal and perturbed spatial graphs. The theorem bounds the
/// features, not the readout logits.
inline double empirical_gtcnn_distance(const GTCNNModel& m, const Graph& spatial,
                                       const Graph& perturbed, const Graph& temporal,
                                       const std::vector<Eigen::VectorXd>& probes) {
  if (probes.empty()) throw ParameterError("empirical_gtcnn_distance: need at least one probe");
  GraphPair nominal(spatial, temporal);
  GraphPair hat(perturbed, temporal);
  double worst = 0.0;
  for (const Eigen::VectorXd& x : probes) {
    const Eigen::MatrixXd fa = forward(m, nominal, x).features;
    const Eigen::MatrixXd fb = forward(m, hat, x).features;
    worst = std::max(worst, (fa - fb).norm());
  }
  return worst;
}

/// One perturbation trial of the stability experiment, in the exact field
/// order of the CSV serialization.
struct PerturbationReport {
  double epsilon = 0.0;
  double snr_db = 0.0;
  double delta = 0.0;
  double c_est = 0.0;
  int layers = 0;
  int features = 0;
  int n_spatial = 0;
  int n_temporal = 0;
  double bound = 0.0;
  double empirical_distance = 0.0;
  double input_norm = 0.0;

  double recompute_bound() const {
    return stability_bound(c_est, delta, epsilon, layers, features, n_spatial, n_temporal, input_norm);
  }
};

}  // namespace gtcnn
