#pragma once

// Closed-form theory: contraction constants, rate bounds, discrete error
// bounds and exact Gaussian propagation for quadratic potentials.

#include "hfhr/gaussian.hpp"
#include "hfhr/samplers.hpp"
#include "hfhr/spectral.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace hfhr {

struct TheoryConstants {
  double l_prime = 0.0;
  double sigma_max = 0.0;
  double sigma_min = 0.0;
  double kappa_prime = 1.0;
  double lambda_prime = 0.0;
  bool contraction_available = false;  // gamma^2 > L
};

inline TheoryConstants theory_constants(double L, double m, double alpha, double gamma) {
  if (!(m >= 0.0) || !(L >= m)) throw std::invalid_argument("theory_constants: need L >= m >= 0");
  if (!(gamma > 0.0)) throw std::invalid_argument("theory_constants: gamma must be > 0");
  if (!(alpha >= 0.0)) throw std::invalid_argument("theory_constants: alpha must be >= 0");
  TheoryConstants tc;
  tc.l_prime = std::sqrt(2.0) * std::max(std::sqrt(1.0 + alpha * alpha) * std::max(1.0 / std::sqrt(2.0), L),
                                         std::sqrt(1.0 + gamma * gamma));
  const double ag = alpha * gamma;
  const double g2 = gamma * gamma;
  const double disc = std::sqrt(alpha * alpha * g2 - 2.0 * alpha * gamma * g2 + 4.0 * ag + g2 * g2 + 4.0);
  tc.sigma_max = std::sqrt(ag / 2.0 + g2 / 2.0 + disc / 2.0 + 1.0);
  tc.sigma_min = std::sqrt(std::max(0.0, ag / 2.0 + g2 / 2.0 - disc / 2.0 + 1.0));
  tc.kappa_prime = tc.sigma_max / tc.sigma_min;
  tc.lambda_prime = std::min(m / gamma + alpha * m, (g2 - L) / gamma);
  tc.contraction_available = g2 > L;
  return tc;
}

/// The linear change of variables P = [[gamma I, I], [0, sqrt(1 + alpha gamma) I]].
inline Matrix transform_matrix(double alpha, double gamma, int d) {
  Matrix P = Matrix::Zero(2 * d, 2 * d);
  P.topLeftCorner(d, d).diagonal().setConstant(gamma);
  P.topRightCorner(d, d).setIdentity();
  P.bottomRightCorner(d, d).diagonal().setConstant(std::sqrt(1.0 + alpha * gamma));
  return P;
}

/// chi^2 decay rate under a Poincare inequality: 2 min{lambda, 1} min{alpha, gamma}.
inline double rate_bound_chi2_poincare(double alpha, double gamma, double lambda_pi) {
  if (!(alpha > 0.0) || !(gamma > 0.0) || !(lambda_pi > 0.0))
    throw std::invalid_argument("rate_bound_chi2_poincare: alpha, gamma, lambda must be > 0");
  return 2.0 * std::min(lambda_pi, 1.0) * std::min(alpha, gamma);
}

struct Chi2ConvexBound {
  double rate = 0.0;
  bool gamma_condition = false;  // gamma^2 >= max{2 lambda, L}
  bool alpha_condition = false;  // alpha <= gamma/lambda - 2/gamma
};

/// chi^2 rate for convex targets. L defaults to 0 when unknown, so only the
/// 2 lambda part of the gamma condition is checked.
inline Chi2ConvexBound rate_bound_chi2_convex(double alpha, double gamma, double lambda_pi,
                                              double L = 0.0) {
  Chi2ConvexBound b;
  const double s = std::sqrt(std::max(lambda_pi, 0.0));
  b.rate = s / (2.0 * gamma) + s * alpha / 16.0;
  b.gamma_condition = gamma * gamma >= std::max(2.0 * lambda_pi, L);
  b.alpha_condition = lambda_pi > 0.0 && alpha <= gamma / lambda_pi - 2.0 / gamma + 1e-12;
  return b;
}

struct W2RateBound {
  double rate = 0.0;
  double prefactor = 1.0;
  bool gamma_condition = false;  // gamma^2 > L + m
  bool alpha_condition = false;  // alpha <= (gamma^2 - L - m) / (m gamma)
};

inline W2RateBound rate_bound_w2(double alpha, double gamma, double m, double L) {
  if (!(m >= 0.0)) throw std::invalid_argument("rate_bound_w2: m must be >= 0");
  W2RateBound b;
  b.rate = m / gamma + m * alpha;
  b.prefactor = theory_constants(std::max(L, m), m, alpha, gamma).kappa_prime;
  b.gamma_condition = gamma * gamma > L + m;
  b.alpha_condition = m > 0.0 && alpha <= (gamma * gamma - L - m) / (m * gamma) + 1e-12;
  return b;
}

/// sqrt(2) kappa' e^{-(m/gamma + m alpha) k h} W2(0) + sqrt(2) C h.
inline double w2_bound_discrete(double alpha, double gamma, double m, double L, double h, double k,
                                double w2_init, double C) {
  const TheoryConstants tc = theory_constants(std::max(L, m), m, alpha, gamma);
  const double rate = m / gamma + m * alpha;
  return std::sqrt(2.0) * tc.kappa_prime * std::exp(-rate * k * h) * w2_init + std::sqrt(2.0) * C * h;
}

struct IterationComplexity {
  double h_star = 0.0;
  double k_star = 0.0;
};

inline IterationComplexity iteration_complexity(double alpha, double gamma, double m, double C,
                                                double h0, double eps, double kappa_prime,
                                                double w2_init) {
  if (!(eps > 0.0)) throw std::invalid_argument("iteration_complexity: eps must be > 0");
  IterationComplexity out;
  const double r2 = 2.0 * std::sqrt(2.0);
  out.h_star = std::min(h0, eps / (r2 * C));
  const double rate = m / gamma + m * alpha;
  const double lg = std::log(r2 * kappa_prime * w2_init / eps);
  out.k_star = std::max(0.0, std::max(1.0 / h0, r2 * C / eps) * lg / rate);
  return out;
}

/// C(alpha) = (b1 alpha^3 + b2) / (m/gamma + m alpha).
inline double discretization_constant_model(double alpha, double b1, double b2, double m,
                                            double gamma) {
  return (b1 * alpha * alpha * alpha + b2) / (m / gamma + m * alpha);
}

/// argmin over alpha >= 0 of (b1 alpha^3 + b2) / (m/gamma + m alpha)^2: the
/// positive root of b1 a^3 + (3 b1 / gamma) a^2 - 2 b2 = 0.
inline double alpha_star(double b1, double b2, double m, double gamma) {
  if (!(b1 > 0.0) || !(b2 > 0.0) || !(m > 0.0) || !(gamma > 0.0))
    throw std::invalid_argument("alpha_star: b1, b2, m, gamma must be > 0");
  const auto F = [&](double a) { return b1 * a * a * a + 3.0 * b1 / gamma * a * a - 2.0 * b2; };
  double hi = 1.0;
  while (F(hi) < 0.0) hi *= 2.0;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(F, 0.0, hi, boost::math::tools::eps_tolerance<double>(52),
                                                   iters);
  return 0.5 * (r.first + r.second);
}

struct StepThresholds {
  double lipschitz_limit = 0.0;  // 1 / (4 kappa' L')
  double h1 = 0.0;
  double h2 = 0.0;
  double h3 = 0.0;
  double h0 = 0.0;
};

/// Step-size limits under which the uniform-in-time local error bound holds.
inline StepThresholds discretization_step_thresholds(double L, double m, double G, double alpha,
                                                     double gamma) {
  const TheoryConstants tc = theory_constants(L, m, alpha, gamma);
  const double mx = std::max(alpha + 1.25, gamma + 1.0);
  const double lam = std::max(tc.lambda_prime, 0.0);
  const double k = tc.kappa_prime;
  StepThresholds s;
  s.lipschitz_limit = 1.0 / (4.0 * k * tc.l_prime);
  s.h1 = std::sqrt(lam) / (4.0 * std::sqrt(2.0) * k * L * mx * (1.92 + 2.30 * alpha * L));
  s.h2 = lam / (16.0 * std::sqrt(2.0) * k * (L + G) * mx * (1.74 + 0.71 * alpha));
  s.h3 = lam / (8.0 * k * L * mx * (1.92 + 2.30 * alpha * L));
  s.h0 = std::min({s.lipschitz_limit, s.h1, s.h2, s.h3});
  return s;
}

/// The constant C of the O(h) discretization error, given the second moment
/// of the target position law and W2(pi_0, pi).
inline double discretization_error_constant(double L, double m, double G, double alpha, double gamma,
                                            int d, double second_moment, double w2_init) {
  const TheoryConstants tc = theory_constants(L, m, alpha, gamma);
  const double lam = tc.lambda_prime;
  if (!(lam > 0.0)) return std::numeric_limits<double>::infinity();
  const double k = tc.kappa_prime;
  const double mx = std::max(alpha + 1.25, gamma + 1.0);
  const double sd = std::sqrt(static_cast<double>(d));
  const double spread = std::sqrt(second_moment + d) + k * w2_init;
  const double inner = std::sqrt(k * tc.l_prime) / std::sqrt(lam) + 1.0;
  const double sa = std::sqrt(alpha);
  double c = 8.0 * k / lam * (L + G) * mx * (1.74 + 0.71 * alpha) * spread;
  c += 4.0 * k / lam * (L + G) * mx * (0.5 * alpha + (1.26 * sa + 1.14 * alpha * sa + 2.32 * std::sqrt(gamma)) * sd);
  c += 8.0 * k / std::sqrt(lam) * inner * L * mx * (1.92 + 2.30 * alpha * L) * spread;
  c += 4.0 * k / std::sqrt(lam) * inner * L * mx * (2.60 * sa + 3.34 * std::sqrt(gamma)) * sd;
  return c;
}

// ---------------------------------------------------------------------------
// Affine-Gaussian representations of the kernels on a quadratic potential
// f(q) = q'Hq/2. State ordering is x = (q; p).

inline AffineGaussianMap phi_affine_map(double gamma, double t, int n) {
  const PhiFlowKernel k(gamma, t);
  const auto [qq, qp, pp] = phi_covariance(gamma, t);
  const Matrix I = Matrix::Identity(n, n);
  AffineGaussianMap m = AffineGaussianMap::identity(2 * n);
  m.T.topRightCorner(n, n) = k.drift * I;
  m.T.bottomRightCorner(n, n) = k.decay * I;
  m.Q.topLeftCorner(n, n) = qq * I;
  m.Q.topRightCorner(n, n) = qp * I;
  m.Q.bottomLeftCorner(n, n) = qp * I;
  m.Q.bottomRightCorner(n, n) = pp * I;
  return m;
}

inline AffineGaussianMap step_affine_map(SamplerKind kind, const Matrix& H, double alpha,
                                         double gamma, double h) {
  if (H.rows() != H.cols()) throw std::invalid_argument("step_affine_map: H must be square");
  if (!H.isApprox(H.transpose(), 1e-12) && (H - H.transpose()).norm() > 1e-12)
    throw std::invalid_argument("step_affine_map: H must be symmetric");
  const int n = static_cast<int>(H.rows());
  const Matrix I = Matrix::Identity(n, n);
  AffineGaussianMap m = AffineGaussianMap::identity(2 * n);
  switch (kind) {
    case SamplerKind::hfhr_strang: {
      const AffineGaussianMap phi = phi_affine_map(gamma, 0.5 * h, n);
      AffineGaussianMap psi = AffineGaussianMap::identity(2 * n);
      psi.T.topLeftCorner(n, n) = I - alpha * h * H;
      psi.T.bottomLeftCorner(n, n) = -h * H;
      psi.Q.topLeftCorner(n, n) = 2.0 * alpha * h * I;
      return phi.then(psi).then(phi);
    }
    case SamplerKind::uld_klmc: {
      m = phi_affine_map(gamma, h, n);
      const PhiFlowKernel k(gamma, h);
      const double b = (h - k.drift) / gamma;
      m.T.topLeftCorner(n, n) = I - b * H;
      m.T.bottomLeftCorner(n, n) = -k.drift * H;
      return m;
    }
    case SamplerKind::ula:
      m.T.topLeftCorner(n, n) = I - h * H;
      m.Q.topLeftCorner(n, n) = 2.0 * h * I;
      return m;
    case SamplerKind::hfhr_em:
      m.T.topLeftCorner(n, n) = I - alpha * h * H;
      m.T.topRightCorner(n, n) = h * I;
      m.T.bottomLeftCorner(n, n) = -h * H;
      m.T.bottomRightCorner(n, n) = (1.0 - gamma * h) * I;
      m.Q.topLeftCorner(n, n) = 2.0 * alpha * h * I;
      m.Q.bottomRightCorner(n, n) = 2.0 * gamma * h * I;
      return m;
  }
  return m;
}

/// Solves Sigma = T Sigma T' + Q (Smith doubling) and mean = (I - T)^{-1} c.
inline GaussianSummary discrete_stationary_covariance(const AffineGaussianMap& map,
                                                      double tol = 1e-13) {
  if (!(spectral_radius(map.T) < 1.0))
    throw std::domain_error("discrete_stationary_covariance: spectral radius >= 1, no stationary law");
  const int n = map.dim();
  Matrix S = map.Q;
  Matrix A = map.T;
  for (int it = 0; it < 200; ++it) {
    const Matrix inc = A * S * A.transpose();
    S += inc;
    A = A * A;
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if (inc.cwiseAbs().maxCoeff() <= tol * scale && A.cwiseAbs().maxCoeff() <= tol) break;
  }
  GaussianSummary out;
  out.cov = 0.5 * (S + S.transpose());
  out.mean = (Matrix::Identity(n, n) - map.T).partialPivLu().solve(map.c);
  return out;
}

// ---------------------------------------------------------------------------
// Continuous HFHR on a quadratic potential.

inline Matrix continuous_drift_matrix(const Matrix& H, double alpha, double gamma) {
  const int n = static_cast<int>(H.rows());
  Matrix A = Matrix::Zero(2 * n, 2 * n);
  A.topLeftCorner(n, n) = -alpha * H;
  A.topRightCorner(n, n).setIdentity();
  A.bottomLeftCorner(n, n) = -H;
  A.bottomRightCorner(n, n) = -gamma * Matrix::Identity(n, n);
  return A;
}

/// Law of the HFHR state at each time in `times` (non-decreasing, >= 0).
inline std::vector<GaussianSummary> gaussian_continuous_trajectory(
    const Matrix& H, double alpha, double gamma, const Vector& mean0, const Matrix& cov0,
    const std::vector<double>& times) {
  const int n = static_cast<int>(H.rows());
  if (H.cols() != n) throw std::invalid_argument("gaussian_continuous_propagation: H must be square");
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12 || H.llt().info() != Eigen::Success)
    throw std::invalid_argument("gaussian_continuous_propagation: H must be symmetric positive definite");
  if (mean0.size() != 2 * n || cov0.rows() != 2 * n || cov0.cols() != 2 * n)
    throw std::invalid_argument("gaussian_continuous_propagation: initial law must live in R^{2d}");

  const Matrix A = continuous_drift_matrix(H, alpha, gamma);
  Matrix D = Matrix::Zero(2 * n, 2 * n);
  D.topLeftCorner(n, n).diagonal().setConstant(2.0 * alpha);
  D.bottomRightCorner(n, n).diagonal().setConstant(2.0 * gamma);
  const double norm = Eigen::JacobiSVD<Matrix>(A).singularValues()(0);
  const double max_dt = 1e-3 / std::max(1.0, norm);
  const auto rhs = [&](const Matrix& S) -> Matrix {
    Matrix AS = A * S;
    return AS + AS.transpose() + D;
  };

  std::vector<GaussianSummary> out;
  out.reserve(times.size());
  Matrix S = cov0;
  double now = 0.0;
  for (double t : times) {
    if (t < now) throw std::invalid_argument("gaussian_continuous_propagation: times must be non-decreasing and >= 0");
    const double span = t - now;
    if (span > 0.0) {
      const auto steps = static_cast<std::int64_t>(std::ceil(span / max_dt));
      const double dt = span / static_cast<double>(steps);
      for (std::int64_t s = 0; s < steps; ++s) {
        const Matrix k1 = rhs(S);
        const Matrix k2 = rhs(S + 0.5 * dt * k1);
        const Matrix k3 = rhs(S + 0.5 * dt * k2);
        const Matrix k4 = rhs(S + dt * k3);
        S += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      S = 0.5 * (S + S.transpose());
      now = t;
    }
    const Matrix E = (A * t).exp();
    out.push_back({E * mean0, S});
  }
  return out;
}

inline GaussianSummary gaussian_continuous_propagation(const Matrix& H, double alpha, double gamma,
                                                       const Vector& mean0, const Matrix& cov0,
                                                       double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("gaussian_continuous_propagation: t must be >= 0");
  return gaussian_continuous_trajectory(H, alpha, gamma, mean0, cov0, {t}).front();
}

}  // namespace hfhr
