#pragma once

// Target-law reference values for the built-in potentials: exact for the
// Gaussian and Rosenbrock targets, one-dimensional quadrature otherwise.

#include "hfhr/gaussian.hpp"
#include "hfhr/potential.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace hfhr {

struct TargetReference {
  GaussianSummary moments;  // mean and covariance of the position law
  /// Density of the first position coordinate; empty when not available.
  std::function<double(double)> marginal_density;
  bool gaussian = false;
};

namespace detail {

/// Integral of g over [a, b] split into unit-width panels.
inline double integrate_panels(const std::function<double(double)>& g, double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  const int panels = static_cast<int>(std::ceil(b - a));
  const double w = (b - a) / panels;
  double total = 0.0;
  for (int i = 0; i < panels; ++i)
    total += gauss_kronrod<double, 61>::integrate(g, a + i * w, a + (i + 1) * w, 10, 1e-13);
  return total;
}

struct Moments1D {
  double z = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

/// Normalising constant, mean and variance of exp(-V) on [a, b].
inline Moments1D moments_of_exp(const std::function<double(double)>& V, double a, double b) {
  // subtract the minimum on a grid to keep exp() in range
  double vmin = V(a);
  for (int i = 0; i <= 4000; ++i) vmin = std::min(vmin, V(a + (b - a) * i / 4000.0));
  const auto w = [&](double x) { return std::exp(-(V(x) - vmin)); };
  Moments1D m;
  m.z = integrate_panels(w, a, b);
  m.mean = integrate_panels([&](double x) { return x * w(x); }, a, b) / m.z;
  m.var = integrate_panels([&](double x) { return (x - m.mean) * (x - m.mean) * w(x); }, a, b) / m.z;
  m.z *= std::exp(-vmin);
  return m;
}

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

}  // namespace detail

inline TargetReference closed_form_reference(const std::string& name, const ParamMap& params = {}) {
  const PotentialModel model = builtin_potential(name, params);  // validates name and params
  const int d = model.dim;
  TargetReference ref;

  if (name == "quadratic_iso" || name == "quadratic_aniso") {
    const double m = params.count("m") ? params.at("m") : 1.0;
    const double kappa = params.count("kappa") ? params.at("kappa") : 1.0;
    Vector var = Vector::Constant(d, 1.0 / m);
    var(d - 1) = 1.0 / (m * kappa);
    ref.moments = {Vector::Zero(d), var.asDiagonal()};
    const double v0 = var(0);
    ref.marginal_density = [v0](double x) { return detail::normal_pdf(x, 0.0, v0); };
    ref.gaussian = true;
    return ref;
  }

  if (name == "rosenbrock2d") {
    // x ~ N(1, 1), y | x ~ N(x^2, 1/10)
    Vector mean(2);
    mean << 1.0, 2.0;
    Matrix cov(2, 2);
    cov << 1.0, 2.0, 2.0, 6.1;
    ref.moments = {mean, cov};
    ref.marginal_density = [](double x) { return detail::normal_pdf(x, 1.0, 1.0); };
    return ref;
  }

  if (name == "coupled_logcosh") {
    const double shift = params.count("shift") ? params.at("shift") : 0.0;
    const double u_star = detail::coupled_logcosh_root(shift);
    const auto V = [shift](double u) { return 0.5 * u * u + detail::log_cosh(u - shift); };
    const auto mu = detail::moments_of_exp(V, shift - 14.0, shift + 14.0);
    const Vector e = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
    ref.moments.mean = (mu.mean - u_star) * e;
    ref.moments.cov = Matrix::Identity(d, d) + (mu.var - 1.0) * e * e.transpose();
    if (d == 1) {
      const double z = mu.z;
      ref.marginal_density = [V, z, u_star](double q) { return std::exp(-V(q + u_star)) / z; };
    }
    return ref;
  }

  // one-dimensional non-Gaussian targets
  const auto V = [&model](double x) {
    Vector q(1);
    q(0) = x;
    return model.eval(q);
  };
  const auto mu = detail::moments_of_exp(V, -12.0, 12.0);
  ref.moments = {Vector::Constant(1, mu.mean), Matrix::Constant(1, 1, mu.var)};
  const double z = mu.z;
  ref.marginal_density = [model, z](double x) {
    Vector q(1);
    q(0) = x;
    return std::exp(-model.eval(q)) / z;
  };
  return ref;
}

}  // namespace hfhr
