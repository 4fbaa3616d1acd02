#pragma once

// One-step transition kernels. All kernels update a ChainState in place,
// evaluate the gradient exactly once, and draw noise from any NormalSource.

#include "hfhr/potential.hpp"
#include "hfhr/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace hfhr {

enum class SamplerKind { hfhr_strang, uld_klmc, ula, hfhr_em };

inline std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::hfhr_strang: return "hfhr_strang";
    case SamplerKind::uld_klmc: return "uld_klmc";
    case SamplerKind::ula: return "ula";
    case SamplerKind::hfhr_em: return "hfhr_em";
  }
  return "unknown";
}

inline SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "hfhr_strang" || s == "hfhr") return SamplerKind::hfhr_strang;
  if (s == "uld_klmc" || s == "uld") return SamplerKind::uld_klmc;
  if (s == "ula") return SamplerKind::ula;
  if (s == "hfhr_em") return SamplerKind::hfhr_em;
  throw std::invalid_argument("unknown sampler kind '" + s +
                              "'; valid kinds: hfhr_strang uld_klmc ula hfhr_em");
}

struct SamplerConfig {
  double alpha = 1.0;
  double gamma = 2.0;
  double step = 0.1;
  SamplerKind kind = SamplerKind::hfhr_strang;

  void validate() const {
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("step must be > 0");
    if (kind == SamplerKind::ula) return;
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be > 0");
    if (kind == SamplerKind::uld_klmc) return;
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be >= 0");
  }
};

struct ChainState {
  Vector q;
  Vector p;

  ChainState() = default;
  explicit ChainState(int d) : q(Vector::Zero(d)), p(Vector::Zero(d)) {}
  ChainState(Vector q_, Vector p_) : q(std::move(q_)), p(std::move(p_)) {
    if (q.size() != p.size()) throw std::invalid_argument("ChainState: q and p differ in length");
  }
  int dim() const { return static_cast<int>(q.size()); }
  bool finite() const { return q.allFinite() && p.allFinite(); }
};

struct Workspace {
  Vector grad;
  std::uint64_t gradient_evaluations = 0;

  void evaluate(const PotentialModel& model, const Vector& q) {
    if (grad.size() != q.size()) grad.resize(q.size());
    model.grad(q, grad);
    ++gradient_evaluations;
  }
};

/// Per-coordinate covariance of the OU increment (X, Y) over duration t for
/// dq = p dt, dp = -gamma p dt + sqrt(2 gamma) dB, started from (0, 0).
/// Returns {v_qq, v_qp, v_pp}.
inline std::array<double, 3> phi_covariance(double gamma, double t) {
  if (!(gamma > 0.0)) throw std::invalid_argument("phi_covariance: gamma must be > 0");
  if (!(t > 0.0)) throw std::invalid_argument("phi_covariance: t must be > 0");
  const double x = gamma * t;
  double qq, qp, pp;
  if (x < 1e-6) {
    const double x2 = x * x, x3 = x2 * x, x4 = x3 * x, x5 = x4 * x;
    qq = (2.0 / 3.0 * x3 - 0.5 * x4 + 7.0 / 30.0 * x5) / (gamma * gamma);
    qp = (x2 - x3 + 7.0 / 12.0 * x4 - 0.25 * x5) / gamma;
    pp = 2.0 * x - 2.0 * x2 + 4.0 / 3.0 * x3 - 2.0 / 3.0 * x4;
  } else {
    const double om = -std::expm1(-x);
    if (x < 1.0) {
      // 2x + 4e^{-x} - e^{-2x} - 3 = sum_{n>=3} (-1)^n (4 - 2^n) x^n / n!; the
      // closed form cancels down to O(x^3) and loses eps/x^2 relative accuracy
      double term = x * x / 2.0;  // x^n / n! at n = 2
      double pow2 = 4.0;
      double sum = 0.0;
      for (int n = 3; n < 40; ++n) {
        term *= x / n;
        pow2 *= 2.0;
        const double c = (n % 2 == 0 ? 1.0 : -1.0) * (4.0 - pow2) * term;
        sum += c;
        if (std::abs(c) < 1e-18 * std::abs(sum)) break;
      }
      qq = sum / (gamma * gamma);
    } else {
      qq = (2.0 * x + 4.0 * std::exp(-x) - std::exp(-2.0 * x) - 3.0) / (gamma * gamma);
    }
    qp = om * om / gamma;
    pp = -std::expm1(-2.0 * x);
  }
  return {qq, qp, pp};
}

/// Exact flow of the OU part over a substep t: x -> drift(x) + M xi.
struct PhiFlowKernel {
  double gamma = 1.0;
  double t = 0.0;
  double drift = 0.0;  // (1 - e^{-gamma t}) / gamma
  double decay = 1.0;  // e^{-gamma t}
  // lower-triangular M = [[m00, 0], [m10, m11]]
  double m00 = 0.0, m10 = 0.0, m11 = 0.0;

  PhiFlowKernel() = default;
  PhiFlowKernel(double gamma_, double t_) : gamma(gamma_), t(t_) {
    const auto [qq, qp, pp] = phi_covariance(gamma, t);
    drift = -std::expm1(-gamma * t) / gamma;
    decay = std::exp(-gamma * t);
    m00 = std::sqrt(qq);
    m10 = m00 > 0.0 ? qp / m00 : 0.0;
    m11 = std::sqrt(std::max(0.0, pp - m10 * m10));
  }

  Eigen::Matrix2d factor() const {
    Eigen::Matrix2d m;
    m << m00, 0.0, m10, m11;
    return m;
  }
};

/// q += drift p + X, p = decay p + Y with (X_i, Y_i) = M (xi_{2i}, xi_{2i+1}).
template <NormalSource R>
void phi_half_step(ChainState& s, const PhiFlowKernel& k, R& rng) {
  const Eigen::Index d = s.q.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    const double z0 = rng.normal();
    const double z1 = rng.normal();
    const double p = s.p[i];
    s.q[i] += k.drift * p + k.m00 * z0;
    s.p[i] = k.decay * p + k.m10 * z0 + k.m11 * z1;
  }
}

/// Euler-Maruyama step of dq = -alpha grad f dt + sqrt(2 alpha) dW, dp = -grad f dt.
/// The d normals are drawn even when alpha = 0 so the stream layout is fixed.
template <NormalSource R>
void psi_tilde_step(ChainState& s, const PotentialModel& model, double alpha, double h, R& rng,
                    Workspace& ws) {
  if (!(h > 0.0)) throw std::invalid_argument("psi_tilde_step: h must be > 0");
  ws.evaluate(model, s.q);
  const double noise = std::sqrt(2.0 * alpha * h);
  const Eigen::Index d = s.q.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    const double eta = rng.normal();
    if (alpha != 0.0) s.q[i] += -alpha * h * ws.grad[i] + noise * eta;
  }
  s.p.noalias() -= h * ws.grad;
}

/// Precomputed coefficients for one SamplerConfig.
class Kernel {
 public:
  explicit Kernel(const SamplerConfig& config) : config_(config) {
    config.validate();
    const double h = config.step;
    switch (config.kind) {
      case SamplerKind::hfhr_strang:
        half_ = PhiFlowKernel(config.gamma, 0.5 * h);
        break;
      case SamplerKind::uld_klmc: {
        full_ = PhiFlowKernel(config.gamma, h);
        klmc_b_ = (h - full_.drift) / config.gamma;
        break;
      }
      case SamplerKind::ula:
        noise_q_ = std::sqrt(2.0 * h);
        break;
      case SamplerKind::hfhr_em:
        noise_q_ = std::sqrt(2.0 * config.alpha * h);
        noise_p_ = std::sqrt(2.0 * config.gamma * h);
        break;
    }
  }

  const SamplerConfig& config() const { return config_; }

  template <NormalSource R>
  void step(ChainState& s, const PotentialModel& model, R& rng, Workspace& ws) const {
    switch (config_.kind) {
      case SamplerKind::hfhr_strang:
        phi_half_step(s, half_, rng);
        psi_tilde_step(s, model, config_.alpha, config_.step, rng, ws);
        phi_half_step(s, half_, rng);
        return;
      case SamplerKind::uld_klmc: {
        ws.evaluate(model, s.q);
        const Eigen::Index d = s.q.size();
        for (Eigen::Index i = 0; i < d; ++i) {
          const double z0 = rng.normal();
          const double z1 = rng.normal();
          const double p = s.p[i];
          const double g = ws.grad[i];
          s.q[i] += full_.drift * p - klmc_b_ * g + full_.m00 * z0;
          s.p[i] = full_.decay * p - full_.drift * g + full_.m10 * z0 + full_.m11 * z1;
        }
        return;
      }
      case SamplerKind::ula: {
        ws.evaluate(model, s.q);
        const Eigen::Index d = s.q.size();
        for (Eigen::Index i = 0; i < d; ++i)
          s.q[i] += -config_.step * ws.grad[i] + noise_q_ * rng.normal();
        return;
      }
      case SamplerKind::hfhr_em: {
        ws.evaluate(model, s.q);
        const double h = config_.step;
        const Eigen::Index d = s.q.size();
        for (Eigen::Index i = 0; i < d; ++i) {
          const double eta = rng.normal();
          const double xi = rng.normal();
          const double q = s.q[i];
          const double p = s.p[i];
          const double g = ws.grad[i];
          s.q[i] = q + (p - config_.alpha * g) * h + noise_q_ * eta;
          s.p[i] = p - (config_.gamma * p + g) * h + noise_p_ * xi;
        }
        return;
      }
    }
  }

 private:
  SamplerConfig config_;
  PhiFlowKernel half_;
  PhiFlowKernel full_;
  double klmc_b_ = 0.0;
  double noise_q_ = 0.0;
  double noise_p_ = 0.0;
};

namespace detail {
inline void require_kind(const SamplerConfig& c, SamplerKind k, const char* fn) {
  if (c.kind != k) throw std::invalid_argument(std::string(fn) + ": config.kind must be " + to_string(k));
}
}  // namespace detail

template <NormalSource R>
void hfhr_step(ChainState& s, const PotentialModel& model, const SamplerConfig& c, R& rng,
               Workspace& ws) {
  detail::require_kind(c, SamplerKind::hfhr_strang, "hfhr_step");
  Kernel(c).step(s, model, rng, ws);
}

template <NormalSource R>
void uld_step(ChainState& s, const PotentialModel& model, const SamplerConfig& c, R& rng,
              Workspace& ws) {
  detail::require_kind(c, SamplerKind::uld_klmc, "uld_step");
  Kernel(c).step(s, model, rng, ws);
}

template <NormalSource R>
void ula_step(ChainState& s, const PotentialModel& model, const SamplerConfig& c, R& rng,
              Workspace& ws) {
  detail::require_kind(c, SamplerKind::ula, "ula_step");
  Kernel(c).step(s, model, rng, ws);
}

template <NormalSource R>
void em_hfhr_step(ChainState& s, const PotentialModel& model, const SamplerConfig& c, R& rng,
                  Workspace& ws) {
  detail::require_kind(c, SamplerKind::hfhr_em, "em_hfhr_step");
  Kernel(c).step(s, model, rng, ws);
}

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::int64_t step)
      : std::runtime_error("chain diverged (non-finite state) at step " + std::to_string(step)),
        step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

using ChainObserver = std::function<void(std::int64_t, const ChainState&)>;

/// Runs `steps` kernel applications; the observer sees (index, state) after
/// each one, index starting at 1. Throws DivergenceError on a non-finite state.
template <NormalSource R>
ChainState simulate_chain(ChainState init, const PotentialModel& model, const SamplerConfig& c,
                          std::int64_t steps, R& rng, const ChainObserver& observer = {},
                          Workspace* workspace = nullptr) {
  if (steps < 0) throw std::invalid_argument("simulate_chain: steps must be >= 0");
  if (init.dim() != model.dim)
    throw std::invalid_argument("simulate_chain: state dimension does not match the potential");
  const Kernel kernel(c);
  Workspace local;
  Workspace& ws = workspace ? *workspace : local;
  for (std::int64_t k = 1; k <= steps; ++k) {
    kernel.step(init, model, rng, ws);
    if (!init.finite()) throw DivergenceError(k);
    if (observer) observer(k, init);
  }
  return init;
}

}  // namespace hfhr
