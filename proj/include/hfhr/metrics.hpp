#pragma once

#include "hfhr/gaussian.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfhr {

namespace detail {

inline void require_psd(const Matrix& S, const char* what) {
  if (S.rows() != S.cols()) throw std::invalid_argument(std::string(what) + ": covariance must be square");
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, S.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(std::string(what) + ": covariance must be symmetric");
  if (S.rows() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, S.cwiseAbs().maxCoeff()))
    throw std::invalid_argument(std::string(what) + ": covariance is not positive semi-definite");
}

inline Matrix psd_sqrt(const Matrix& S) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// 2-Wasserstein distance between two Gaussians (Bures formula).
inline double w2_gaussian(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("w2_gaussian: dimension mismatch");
  detail::require_psd(a.cov, "w2_gaussian");
  detail::require_psd(b.cov, "w2_gaussian");
  const Matrix rb = detail::psd_sqrt(0.5 * (b.cov + b.cov.transpose()));
  Matrix inner = rb * a.cov * rb;
  inner = 0.5 * (inner + inner.transpose());
  const Matrix cross = detail::psd_sqrt(inner);
  const double tr = a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
  const double d2 = (a.mean - b.mean).squaredNorm() + std::max(0.0, tr);
  return std::sqrt(d2);
}

/// Streaming mean/covariance with pairwise (Chan) merging.
class MomentAccumulator {
 public:
  MomentAccumulator() = default;
  explicit MomentAccumulator(int dim) : mean_(Vector::Zero(dim)), scatter_(Matrix::Zero(dim, dim)) {}

  void add(const Vector& x) {
    if (mean_.size() == 0 && count_ == 0) *this = MomentAccumulator(static_cast<int>(x.size()));
    if (x.size() != mean_.size()) throw std::invalid_argument("MomentAccumulator: dimension mismatch");
    ++count_;
    const Vector delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    scatter_.noalias() += delta * (x - mean_).transpose();
  }

  void merge(const MomentAccumulator& other) {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    if (other.mean_.size() != mean_.size()) throw std::invalid_argument("MomentAccumulator: dimension mismatch");
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const Vector delta = other.mean_ - mean_;
    mean_ += delta * (nb / n);
    scatter_ += other.scatter_ + delta * delta.transpose() * (na * nb / n);
    count_ += other.count_;
  }

  std::int64_t count() const { return count_; }
  const Vector& mean() const { return mean_; }

  /// Sample mean and unbiased covariance.
  GaussianSummary summary() const {
    if (count_ < 2) throw std::invalid_argument("empirical moments need at least 2 samples");
    Matrix cov = scatter_ / static_cast<double>(count_ - 1);
    cov = 0.5 * (cov + cov.transpose());
    return {mean_, cov};
  }

 private:
  std::int64_t count_ = 0;
  Vector mean_;
  Matrix scatter_;
};

inline GaussianSummary empirical_moments(const std::vector<Vector>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("empirical_moments: need at least 2 samples");
  MomentAccumulator acc(static_cast<int>(samples.front().size()));
  for (const auto& x : samples) acc.add(x);
  return acc.summary();
}

/// Columns of `samples` are the points.
inline GaussianSummary empirical_moments(const Matrix& samples) {
  if (samples.cols() < 2) throw std::invalid_argument("empirical_moments: need at least 2 samples");
  const double n = static_cast<double>(samples.cols());
  GaussianSummary g;
  g.mean = samples.rowwise().mean();
  const Matrix centered = samples.colwise() - g.mean;
  g.cov = centered * centered.transpose() / (n - 1.0);
  g.cov = 0.5 * (g.cov + g.cov.transpose());
  return g;
}

struct HistogramDensity {
  double lo = 0.0;
  double hi = 1.0;
  int bins = 2;
  std::vector<std::int64_t> counts;

  HistogramDensity(double lo_, double hi_, int bins_) : lo(lo_), hi(hi_), bins(bins_) {
    if (bins < 2) throw std::invalid_argument("histogram: bins must be >= 2");
    if (!(hi > lo)) throw std::invalid_argument("histogram: need hi > lo");
    counts.assign(static_cast<std::size_t>(bins), 0);
  }

  int bin_of(double x) const {
    if (!(x > lo)) return 0;  // NaN and underflow land in the first bin
    if (x >= hi) return bins - 1;
    const int j = static_cast<int>((x - lo) / (hi - lo) * bins);
    return std::clamp(j, 0, bins - 1);
  }

  void add(double x) { ++counts[static_cast<std::size_t>(bin_of(x))]; }

  void merge(const HistogramDensity& other) {
    if (other.bins != bins || other.lo != lo || other.hi != hi)
      throw std::invalid_argument("histogram: merge of incompatible histograms");
    for (std::size_t j = 0; j < counts.size(); ++j) counts[j] += other.counts[j];
  }

  std::int64_t total() const {
    std::int64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  std::vector<double> masses() const {
    const double t = static_cast<double>(total());
    std::vector<double> m(counts.size(), 0.0);
    if (t == 0.0) return m;
    for (std::size_t j = 0; j < counts.size(); ++j) m[j] = static_cast<double>(counts[j]) / t;
    return m;
  }
};

/// Target bin masses by a 32-point midpoint rule per bin, renormalised to 1.
inline std::vector<double> target_bin_masses(const std::function<double(double)>& density, double lo,
                                             double hi, int bins) {
  constexpr int kSub = 32;
  const double width = (hi - lo) / bins;
  std::vector<double> q(static_cast<std::size_t>(bins), 0.0);
  double total = 0.0;
  for (int j = 0; j < bins; ++j) {
    double s = 0.0;
    for (int k = 0; k < kSub; ++k) s += density(lo + width * (j + (k + 0.5) / kSub));
    q[static_cast<std::size_t>(j)] = s * width / kSub;
    total += q[static_cast<std::size_t>(j)];
  }
  if (!(total >= 0.999))
    throw std::invalid_argument("chi2_histogram: target mass on [lo, hi] is " + std::to_string(total) +
                                " (< 0.999); widen the range");
  for (auto& v : q) v /= total;
  return q;
}

inline double chi2_histogram(const HistogramDensity& hist, const std::function<double(double)>& density) {
  const std::vector<double> q = target_bin_masses(density, hist.lo, hist.hi, hist.bins);
  const std::vector<double> p = hist.masses();
  double chi2 = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] <= 0.0) {
      if (p[j] > 0.0)
        throw std::domain_error("chi2_histogram: bin " + std::to_string(j) +
                                " is nonempty but has zero target mass");
      continue;
    }
    chi2 += (p[j] - q[j]) * (p[j] - q[j]) / q[j];
  }
  return chi2;
}

inline double chi2_histogram(const std::vector<double>& samples,
                             const std::function<double(double)>& density, double lo, double hi,
                             int bins) {
  HistogramDensity hist(lo, hi, bins);
  for (double x : samples) hist.add(x);
  return chi2_histogram(hist, density);
}

/// chi^2(N(m1, s1^2) || N(m2, s2^2)); +inf when 2 s2^2 <= s1^2.
inline double chi2_gaussian_1d(double m1, double s1, double m2, double s2) {
  if (!(s1 > 0.0) || !(s2 > 0.0)) throw std::invalid_argument("chi2_gaussian_1d: scales must be > 0");
  const double v = 2.0 * s2 * s2 - s1 * s1;
  if (v <= 0.0) return std::numeric_limits<double>::infinity();
  const double dm = m1 - m2;
  return s2 * s2 / (s1 * std::sqrt(v)) * std::exp(dm * dm / v) - 1.0;
}

inline double mean_error(const GaussianSummary& summary, const Vector& target_mean) {
  if (summary.mean.size() != target_mean.size()) throw std::invalid_argument("mean_error: dimension mismatch");
  return (summary.mean - target_mean).norm();
}

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares fit of log y = slope log x + intercept.
inline LogLogFit loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("loglog_slope: xs and ys differ in length");
  if (xs.size() < 3) throw std::invalid_argument("loglog_slope: need at least 3 points");
  const auto n = static_cast<Eigen::Index>(xs.size());
  Matrix X(n, 2);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0) || !std::isfinite(xs[i]) || !std::isfinite(ys[i]))
      throw std::invalid_argument("loglog_slope: data must be finite and positive");
    X(i, 0) = std::log(xs[i]);
    X(i, 1) = 1.0;
    y(i) = std::log(ys[i]);
  }
  const Vector beta = X.colPivHouseholderQr().solve(y);
  const Vector resid = y - X * beta;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  LogLogFit f;
  f.slope = beta(0);
  f.intercept = beta(1);
  f.r2 = ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : 1.0;
  return f;
}

/// Plain least squares y = slope x + intercept (used for log-linear decay fits).
inline LogLogFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("linear_fit: need >= 2 paired points");
  const auto n = static_cast<Eigen::Index>(xs.size());
  Matrix X(n, 2);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = xs[i];
    X(i, 1) = 1.0;
    y(i) = ys[i];
  }
  const Vector beta = X.colPivHouseholderQr().solve(y);
  const Vector resid = y - X * beta;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  return {beta(0), beta(1), ss_tot > 0.0 ? 1.0 - resid.squaredNorm() / ss_tot : 1.0};
}

}  // namespace hfhr
