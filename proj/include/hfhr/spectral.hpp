#pragma once

// Spectral study of the discretized mean process on quadratic targets.

#include "hfhr/potential.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace hfhr {

/// Largest eigenvalue modulus. 1x1 and 2x2 are closed form; larger matrices go
/// through a real Schur decomposition.
inline double spectral_radius(const Matrix& T) {
  if (T.rows() != T.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  const auto n = T.rows();
  if (n == 0) return 0.0;
  if (n == 1) return std::abs(T(0, 0));
  if (n == 2) {
    const double half_tr = 0.5 * (T(0, 0) + T(1, 1));
    const double det = T(0, 0) * T(1, 1) - T(0, 1) * T(1, 0);
    const double disc = half_tr * half_tr - det;
    if (disc < 0.0) return std::sqrt(det);
    const double r = std::sqrt(disc);
    return std::max(std::abs(half_tr + r), std::abs(half_tr - r));
  }
  Eigen::EigenSolver<Matrix> es(T, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: eigenvalue solver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Forward-Euler mean map of HFHR on f = lambda q^2 / 2:
/// [[1 - alpha lambda h, h], [-lambda h, 1 - gamma h]].
inline Eigen::Matrix2d em_mean_map(double alpha, double gamma, double h, double lambda = 1.0) {
  Eigen::Matrix2d A;
  A << 1.0 - alpha * lambda * h, h, -lambda * h, 1.0 - gamma * h;
  return A;
}

/// Eigenvalue modulus of em_mean_map(alpha, gamma, h) when |alpha - gamma| <= 2.
inline double demo1_modulus(double alpha, double gamma, double h) {
  return std::sqrt(1.0 - (alpha + gamma) * h + (1.0 + alpha * gamma) * h * h);
}

struct Demo1Optimum {
  double h = 0.0;
  double radius = 0.0;
};

/// Step minimising demo1_modulus for fixed (alpha, gamma).
inline Demo1Optimum demo1_optimal(double alpha, double gamma) {
  if (!(alpha >= 0.0) || !(gamma > 0.0)) throw std::invalid_argument("demo1_optimal: need alpha >= 0, gamma > 0");
  Demo1Optimum o;
  o.h = (alpha + gamma) / (2.0 * (1.0 + alpha * gamma));
  o.radius = std::sqrt(std::max(0.0, 1.0 - (alpha + gamma) * (alpha + gamma) / (4.0 * (1.0 + alpha * gamma))));
  return o;
}

struct NilpotentChoice {
  double alpha = 0.0;
  double h = 0.0;
};

/// alpha = gamma + 2 with h = 1/(1 + gamma) makes the mean map nilpotent.
inline NilpotentChoice nilpotent_parameters(double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("nilpotent_parameters: gamma must be > 0");
  return {gamma + 2.0, 1.0 / (1.0 + gamma)};
}

struct UldOptimum {
  double h = 0.0;
  double gamma = 0.0;
  double discount = 0.0;
  double measured = 0.0;  // max spectral radius over the two blocks
};

/// Best (h, gamma) for the alpha = 0 two-scale problem with Hessian spectrum {1, 1/eps}.
inline UldOptimum uld_optimal_discount(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("uld_optimal_discount: eps must lie in (0, 1)");
  UldOptimum o;
  o.h = std::sqrt(2.0 * eps / (1.0 + eps));
  o.gamma = std::sqrt(2.0 * (1.0 + eps)) / std::sqrt(eps);
  o.discount = std::sqrt((1.0 - eps) / (1.0 + eps));
  o.measured = std::max(spectral_radius(em_mean_map(0.0, o.gamma, o.h, 1.0)),
                        spectral_radius(em_mean_map(0.0, o.gamma, o.h, 1.0 / eps)));
  if (std::abs(o.measured - o.discount) > 1e-10)
    throw std::logic_error("uld_optimal_discount: closed form disagrees with the block spectral radius");
  return o;
}

struct HfhrDemo2 {
  double gamma = 0.0;
  double alpha = 0.0;
  double h = 0.0;
  double discount = 0.0;
  double measured = 0.0;         // max spectral radius over the two blocks
  double trace_residual = 0.0;   // tr A1
  double det_residual = 0.0;     // det A1 + det A2
};

/// Constructive (gamma, alpha, h = c eps) for the two-scale problem.
inline HfhrDemo2 hfhr_demo2_parameters(double eps, double c) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("hfhr_demo2_parameters: eps must lie in (0, 1)");
  if (!(c > 0.0)) throw std::invalid_argument("hfhr_demo2_parameters: c must be > 0");
  const double e2 = eps * eps, e3 = e2 * eps, e4 = e3 * eps, c2 = c * c;
  const double s = std::sqrt(4.0 * c2 * e4 + 8.0 * c2 * e3 + (4.0 * c2 + 1.0) * e2 - 2.0 * eps + 1.0);
  const double den = 2.0 * c * e2 + 2.0 * c * eps;
  HfhrDemo2 o;
  o.gamma = (s + eps + 3.0) / den;
  o.alpha = (-s + 3.0 * eps + 1.0) / den;
  o.h = c * eps;
  o.discount = std::sqrt((1.0 - eps) * (1.0 - eps + s)) / (std::sqrt(2.0) * (1.0 + eps));
  if (!(o.alpha > 0.0) || !(o.gamma > 0.0))
    throw std::logic_error("hfhr_demo2_parameters: alpha and gamma must come out positive");
  const Eigen::Matrix2d A1 = em_mean_map(o.alpha, o.gamma, o.h, 1.0);
  const Eigen::Matrix2d A2 = em_mean_map(o.alpha, o.gamma, o.h, 1.0 / eps);
  o.trace_residual = A1.trace();
  o.det_residual = A1.determinant() + A2.determinant();
  o.measured = std::max(spectral_radius(A1), spectral_radius(A2));
  if (std::abs(o.trace_residual) > 1e-10 || std::abs(o.det_residual) > 1e-10)
    throw std::logic_error("hfhr_demo2_parameters: defining system not satisfied");
  return o;
}

}  // namespace hfhr
