#pragma once

// Target potentials f(q) for the sampler, with gradients and the analytic
// constants (L, m, Poincare, third-derivative growth) where they are known.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hfhr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ParamMap = std::map<std::string, double>;

struct PotentialModel {
  std::string name;
  int dim = 1;
  std::function<double(const Vector&)> eval;
  /// Writes grad f(q) into `out` (already sized to dim).
  std::function<void(const Vector&, Vector&)> grad;
  std::optional<double> smoothness;        // L
  std::optional<double> strong_convexity;  // m; 0 = convex only, empty = non-convex
  std::optional<double> poincare;          // lambda_PI of mu
  std::optional<double> third_deriv_growth;  // G with |grad Laplacian f| <= G sqrt(1+|q|^2)

  Vector gradient(const Vector& q) const {
    Vector g(dim);
    grad(q, g);
    return g;
  }
};

namespace detail {

inline double log_cosh(double x) {
  // stable for large |x|
  const double a = std::abs(x);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

inline int integer_param(const ParamMap& params, const std::string& key, int fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const double v = it->second;
  if (!std::isfinite(v) || v != std::floor(v))
    throw std::invalid_argument("potential parameter '" + key + "' must be an integer");
  if (v < 1) throw std::invalid_argument("potential parameter '" + key + "' must be >= 1");
  return static_cast<int>(v);
}

inline double real_param(const ParamMap& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  if (!std::isfinite(it->second))
    throw std::invalid_argument("potential parameter '" + key + "' must be finite");
  return it->second;
}

inline void reject_unknown(const std::string& name, const ParamMap& params,
                           std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : params) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) {
      std::string msg = "potential '" + name + "' does not take parameter '" + key + "'";
      if (allowed.size() == 0) {
        msg += " (it takes none)";
      } else {
        msg += " (allowed:";
        for (const char* a : allowed) msg += std::string(" ") + a;
        msg += ")";
      }
      throw std::invalid_argument(msg);
    }
  }
}

// Root of u + tanh(u - shift) = 0; the argmin of the shifted coupled potential
// lies at u* along the 1/sqrt(d) direction.
inline double coupled_logcosh_root(double shift) {
  double lo = -std::abs(shift) - 1.0;
  double hi = std::abs(shift) + 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid + std::tanh(mid - shift) > 0.0) hi = mid; else lo = mid;
  }
  return 0.5 * (lo + hi);
}

// Global minimiser of x + cos(10 x) = 0 for the perturbed potential.
inline double perturbed_minimiser() {
  const auto F = [](double x) { return 0.5 * x * x + 0.1 * std::sin(10.0 * x); };
  double best = 0.0;
  double best_val = F(0.0);
  for (int i = -20000; i <= 20000; ++i) {
    const double x = i * 1e-4;
    if (F(x) < best_val) { best_val = F(x); best = x; }
  }
  for (int it = 0; it < 50; ++it) {  // Newton polish on f'
    const double g = best + std::cos(10.0 * best);
    const double h = 1.0 - 10.0 * std::sin(10.0 * best);
    best -= g / h;
  }
  return best;
}

}  // namespace detail

inline std::vector<std::string> builtin_potential_names() {
  return {"quadratic_iso", "quadratic_aniso", "quartic", "perturbed",
          "bimodal", "rosenbrock2d", "coupled_logcosh"};
}

/// Built-in target potentials. Gaussian shorthand:
/// G^d_{m,kappa}(x) = (m/2)(kappa x_d^2 + sum_{i<d} x_i^2).
inline PotentialModel builtin_potential(const std::string& name, const ParamMap& params = {}) {
  PotentialModel model;
  model.name = name;

  if (name == "quadratic_iso" || name == "quadratic_aniso") {
    const bool aniso = name == "quadratic_aniso";
    if (aniso) detail::reject_unknown(name, params, {"m", "kappa", "d"});
    else detail::reject_unknown(name, params, {"m", "d"});
    const double m = detail::real_param(params, "m", 1.0);
    const double kappa = aniso ? detail::real_param(params, "kappa", 1.0) : 1.0;
    const int d = detail::integer_param(params, "d", aniso ? 2 : 1);
    if (m <= 0.0) throw std::invalid_argument("potential parameter 'm' must be > 0");
    if (kappa < 1.0) throw std::invalid_argument("potential parameter 'kappa' must be >= 1");
    Vector diag = Vector::Constant(d, m);
    diag(d - 1) = m * kappa;
    model.dim = d;
    model.eval = [diag](const Vector& q) { return 0.5 * q.dot(diag.cwiseProduct(q)); };
    model.grad = [diag](const Vector& q, Vector& out) { out = diag.cwiseProduct(q); };
    model.smoothness = m * kappa;
    model.strong_convexity = m;
    model.poincare = m;
    model.third_deriv_growth = 0.0;
    return model;
  }

  if (name == "quartic") {
    detail::reject_unknown(name, params, {});
    model.dim = 1;
    model.eval = [](const Vector& q) { return 0.25 * std::pow(q(0), 4); };
    model.grad = [](const Vector& q, Vector& out) { out(0) = q(0) * q(0) * q(0); };
    model.strong_convexity = 0.0;
    model.third_deriv_growth = 6.0;
    return model;
  }

  if (name == "perturbed") {
    detail::reject_unknown(name, params, {});
    const double x0 = detail::perturbed_minimiser();
    const auto F = [](double x) { return (5.0 * x * x + std::sin(10.0 * x)) / 10.0; };
    const double f0 = F(x0);
    model.dim = 1;
    model.eval = [=](const Vector& q) { return F(q(0) + x0) - f0; };
    model.grad = [=](const Vector& q, Vector& out) {
      const double x = q(0) + x0;
      out(0) = x + std::cos(10.0 * x);
    };
    model.smoothness = 11.0;
    model.third_deriv_growth = 100.0;
    return model;
  }

  if (name == "bimodal") {
    detail::reject_unknown(name, params, {});
    // 5(x^4 - 2x^2) with the minimiser x=1 moved to the origin
    model.dim = 1;
    model.eval = [](const Vector& q) {
      const double x = q(0) + 1.0;
      return 5.0 * (x * x * x * x - 2.0 * x * x) + 5.0;
    };
    model.grad = [](const Vector& q, Vector& out) {
      const double x = q(0) + 1.0;
      out(0) = 20.0 * x * x * x - 20.0 * x;
    };
    model.third_deriv_growth = 120.0 * std::sqrt(2.0);
    return model;
  }

  if (name == "rosenbrock2d") {
    detail::reject_unknown(name, params, {});
    // natural minimiser (1, 1); no convexity guarantee
    model.dim = 2;
    model.eval = [](const Vector& q) {
      const double x = q(0), y = q(1);
      return 0.5 * ((x - 1.0) * (x - 1.0) + 10.0 * (y - x * x) * (y - x * x));
    };
    model.grad = [](const Vector& q, Vector& out) {
      const double x = q(0), y = q(1);
      out(0) = (x - 1.0) - 20.0 * x * (y - x * x);
      out(1) = 10.0 * (y - x * x);
    };
    model.third_deriv_growth = 120.0;
    return model;
  }

  if (name == "coupled_logcosh") {
    detail::reject_unknown(name, params, {"d", "shift"});
    const int d = detail::integer_param(params, "d", 10);
    const double shift = detail::real_param(params, "shift", 0.0);
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    // F(x) = |x|^2/2 + log cosh(u - shift), u = 1'x/sqrt(d); f(q) = F(q + x*) - F(x*)
    const double u_star = detail::coupled_logcosh_root(shift);
    const double f_star = 0.5 * u_star * u_star + detail::log_cosh(u_star - shift);
    model.dim = d;
    model.eval = [=](const Vector& q) {
      const double offset = u_star * inv_sqrt_d;
      const double sq = (q.array() + offset).square().sum();
      const double u = (q.sum() + d * offset) * inv_sqrt_d;
      return 0.5 * sq + detail::log_cosh(u - shift) - f_star;
    };
    model.grad = [=](const Vector& q, Vector& out) {
      const double offset = u_star * inv_sqrt_d;
      const double u = (q.sum() + d * offset) * inv_sqrt_d;
      const double t = std::tanh(u - shift) * inv_sqrt_d;
      out = (q.array() + offset + t).matrix();
    };
    model.smoothness = 2.0;
    model.strong_convexity = 1.0;
    model.poincare = 1.0;
    model.third_deriv_growth = 4.0 / (3.0 * std::sqrt(3.0));
    return model;
  }

  std::string msg = "unknown potential '" + name + "'; valid names:";
  for (const auto& n : builtin_potential_names()) msg += " " + n;
  throw std::invalid_argument(msg);
}

struct GradientCheckReport {
  bool passed = true;
  int trials = 0;
  double max_relative_error = 0.0;
  Vector worst_point;
};

/// Central differences with step 1e-5 scaled by |q_i| (floored at 1),
/// relative error measured against max(1, |grad|).
inline double finite_difference_step(double coordinate) {
  return 1e-5 * std::max(1.0, std::abs(coordinate));
}

inline Vector finite_difference_gradient(const PotentialModel& model, const Vector& q) {
  Vector g(model.dim);
  Vector x = q;
  for (int i = 0; i < model.dim; ++i) {
    const double h = finite_difference_step(q(i));
    x(i) = q(i) + h;
    const double fp = model.eval(x);
    x(i) = q(i) - h;
    const double fm = model.eval(x);
    x(i) = q(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline GradientCheckReport gradient_check(const PotentialModel& model, int trials, double tol,
                                          std::uint64_t seed = 20240501) {
  if (trials < 1) throw std::invalid_argument("gradient_check: trials must be >= 1");
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  GradientCheckReport report;
  report.trials = trials;
  for (int t = 0; t < trials; ++t) {
    Vector q(model.dim);
    for (int i = 0; i < model.dim; ++i) q(i) = normal(engine);
    const Vector analytic = model.gradient(q);
    const Vector numeric = finite_difference_gradient(model, q);
    const double scale = std::max(1.0, analytic.lpNorm<Eigen::Infinity>());
    const double err = (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
    if (err > report.max_relative_error) {
      report.max_relative_error = err;
      report.worst_point = q;
    }
  }
  report.passed = report.max_relative_error <= tol;
  return report;
}

/// Dense Hessian by central differences of the analytic gradient.
inline Matrix numerical_hessian(const PotentialModel& model, const Vector& q) {
  const int d = model.dim;
  Matrix hess(d, d);
  Vector x = q;
  for (int j = 0; j < d; ++j) {
    const double h = finite_difference_step(q(j));
    x(j) = q(j) + h;
    const Vector gp = model.gradient(x);
    x(j) = q(j) - h;
    const Vector gm = model.gradient(x);
    x(j) = q(j);
    hess.col(j) = (gp - gm) / (2.0 * h);
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace hfhr
