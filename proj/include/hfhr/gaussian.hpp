#pragma once

#include "hfhr/potential.hpp"

#include <Eigen/Dense>

#include <stdexcept>

namespace hfhr {

struct GaussianSummary {
  Vector mean;
  Matrix cov;

  int dim() const { return static_cast<int>(mean.size()); }

  static GaussianSummary standard(int n) { return {Vector::Zero(n), Matrix::Identity(n, n)}; }

  /// Marginal over the leading `n` coordinates (the position block).
  GaussianSummary head(int n) const {
    return {mean.head(n), cov.topLeftCorner(n, n)};
  }
};

/// One kernel step on a quadratic potential: x -> T x + c + N(0, Q).
struct AffineGaussianMap {
  Matrix T;
  Vector c;
  Matrix Q;

  int dim() const { return static_cast<int>(T.rows()); }

  static AffineGaussianMap identity(int n) {
    return {Matrix::Identity(n, n), Vector::Zero(n), Matrix::Zero(n, n)};
  }

  /// Law after one step from `g`.
  GaussianSummary apply(const GaussianSummary& g) const {
    if (g.dim() != dim()) throw std::invalid_argument("AffineGaussianMap::apply: dimension mismatch");
    GaussianSummary out{T * g.mean + c, T * g.cov * T.transpose() + Q};
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
  }

  /// `next` applied after *this.
  AffineGaussianMap then(const AffineGaussianMap& next) const {
    AffineGaussianMap out;
    out.T = next.T * T;
    out.c = next.T * c + next.c;
    out.Q = next.T * Q * next.T.transpose() + next.Q;
    out.Q = 0.5 * (out.Q + out.Q.transpose());
    return out;
  }

  /// Restriction to the leading n x n block (meaningful when the remaining
  /// coordinates do not feed back into the leading ones).
  AffineGaussianMap position_block(int n) const {
    return {T.topLeftCorner(n, n), c.head(n), Q.topLeftCorner(n, n)};
  }
};

}  // namespace hfhr
