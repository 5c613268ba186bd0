#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "gtcnn/eig.hpp"
#include "gtcnn/errors.hpp"
#include "gtcnn/filters.hpp"
#include "gtcnn/product.hpp"

namespace gtcnn {

/// Graph-time Fourier transform x~ = (V_T (x) V)^T x, applied per factor
/// (spatial transform per time slice, temporal transform per node row)
/// rather than through the NT x NT Kronecker matrix.
///
/// Real arithmetic only: the spatial shift must be symmetric and the
/// temporal shift diagonalizable with a real spectrum (undirected path,
/// 2-cycle); the directed line graph is nilpotent and has no
/// eigendecomposition, so it is out of scope here.
inline Eigen::VectorXd gtft(const ProductSignal& x, const EigenDecomposition& spatial_eig,
                            const EigenDecomposition& temporal_eig) {
  if (spatial_eig.size() != x.n_spatial || temporal_eig.size() != x.n_temporal)
    throw ParameterError("gtft: decomposition sizes do not match signal");
  const Eigen::MatrixXd xm = devectorize(x);
  const Eigen::MatrixXd tilde = spatial_eig.eigenvectors.transpose() * xm * temporal_eig.eigenvectors;
  return vectorize(tilde).values;
}

inline ProductSignal inverse_gtft(const Eigen::VectorXd& x_tilde, const EigenDecomposition& spatial_eig,
                                  const EigenDecomposition& temporal_eig) {
  const int n = spatial_eig.size();
  const int t = temporal_eig.size();
  if (x_tilde.size() != static_cast<Eigen::Index>(n) * t)
    throw ParameterError("inverse_gtft: length does not match decompositions");
  const Eigen::MatrixXd tilde = Eigen::Map<const Eigen::MatrixXd>(x_tilde.data(), n, t);
  const Eigen::MatrixXd xm = spatial_eig.eigenvectors * tilde * temporal_eig.eigenvectors.transpose();
  return vectorize(xm);
}

/// h(lambda_T, lambda) = sum_{k,l} h_kl lambda_T^l lambda^k.
inline double frequency_response(const JointFilterCoeffs& h, double lambda_t, double lambda) {
  double acc = 0.0;
  double lt = 1.0;
  for (int l = 0; l <= h.k_tilde(); ++l) {
    double ls = 1.0;
    for (int k = 0; k <= h.k_bar(); ++k) {
      acc += h.h(k, l) * lt * ls;
      ls *= lambda;
    }
    lt *= lambda_t;
  }
  return acc;
}

/// lambda * dh/dlambda evaluated analytically (the integral-Lipschitz
/// integrand).
inline double scaled_spatial_derivative(const JointFilterCoeffs& h, double lambda_t, double lambda) {
  double acc = 0.0;
  double lt = 1.0;
  for (int l = 0; l <= h.k_tilde(); ++l) {
    double ls = 1.0;  // lambda^{k-1}
    for (int k = 1; k <= h.k_bar(); ++k) {
      acc += static_cast<double>(k) * h.h(k, l) * lt * ls;
      ls *= lambda;
    }
    lt *= lambda_t;
  }
  return lambda * acc;
}

namespace detail {

/// Uniform grid over [lo, hi] with `grid` subintervals (grid+1 points), so
/// refining by an integer factor keeps every coarse point and maxima can
/// only grow.
inline std::vector<double> uniform_grid(double lo, double hi, int grid) {
  if (grid < 2) throw ParameterError("uniform_grid: need grid >= 2");
  std::vector<double> pts(static_cast<std::size_t>(grid) + 1);
  for (int i = 0; i <= grid; ++i)
    pts[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / grid;
  return pts;
}

}  // namespace detail

/// Grid estimate of the integral-Lipschitz constant
/// C = sup |lambda dh/dlambda| over [lambda_min, lambda_max] x lambda_T set.
/// A lower bound on the true supremum that converges as grid grows.
inline double lipschitz_constant(const JointFilterCoeffs& h, double lambda_min, double lambda_max,
                                 const std::vector<double>& lambda_t_set, int grid = 1024) {
  h.validate();
  if (lambda_t_set.empty()) throw ParameterError("lipschitz_constant: empty lambda_T set");
  double c = 0.0;
  for (double lambda : detail::uniform_grid(lambda_min, lambda_max, grid))
    for (double lt : lambda_t_set)
      c = std::max(c, std::abs(scaled_spatial_derivative(h, lt, lambda)));
  return c;
}

inline double max_response(const JointFilterCoeffs& h, double lambda_min, double lambda_max,
                           const std::vector<double>& lambda_t_set, int grid = 1024) {
  h.validate();
  if (lambda_t_set.empty()) throw ParameterError("max_response: empty lambda_T set");
  double m = 0.0;
  for (double lambda : detail::uniform_grid(lambda_min, lambda_max, grid))
    for (double lt : lambda_t_set)
      m = std::max(m, std::abs(frequency_response(h, lt, lambda)));
  return m;
}

/// Scales coefficients so the grid maximum of |h| equals one.
inline JointFilterCoeffs normalize_response(const JointFilterCoeffs& h, double lambda_min,
                                            double lambda_max, const std::vector<double>& lambda_t_set,
                                            int grid = 1024) {
  const double m = max_response(h, lambda_min, lambda_max, lambda_t_set, grid);
  if (m <= 0.0) throw DegenerateError("normalize_response: filter response is identically zero on grid");
  return {h.h / m};
}

}  // namespace gtcnn
