#pragma once

// Experiment specification, JSON config parsing, seeded ensemble runs and the
// iteration-complexity sweep.

#include "hfhr/io.hpp"
#include "hfhr/metrics.hpp"
#include "hfhr/reference.hpp"
#include "hfhr/samplers.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace hfhr {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MetricKind { w2_gaussian, chi2_hist, mean_error };

inline std::string to_string(MetricKind m) {
  switch (m) {
    case MetricKind::w2_gaussian: return "w2_gaussian";
    case MetricKind::chi2_hist: return "chi2_hist";
    case MetricKind::mean_error: return "mean_error";
  }
  return "unknown";
}

struct PotentialSpec {
  std::string name = "quadratic_iso";
  ParamMap params;
};

struct InitSpec {
  double q = 1.0;
  double p = 0.0;
  double q_std = 0.0;
  double p_std = 0.0;
};

struct BenchmarkSpec {
  SamplerConfig sampler{0.0, 2.0, 0.0005, SamplerKind::uld_klmc};
  std::int64_t steps = 0;
  std::int64_t chains = 1000;
};

struct HistogramSpec {
  int bins = 50;
  std::optional<double> lo;
  std::optional<double> hi;
};

struct ExperimentSpec {
  std::string name = "experiment";
  PotentialSpec potential;
  std::vector<SamplerConfig> samplers;
  std::vector<std::string> labels;  // one per sampler
  std::int64_t chains = 10000;
  std::optional<std::int64_t> steps;
  std::optional<double> horizon;
  std::int64_t record_every = 1;
  std::uint64_t seed = 0;
  MetricKind metric = MetricKind::w2_gaussian;
  std::optional<BenchmarkSpec> benchmark;  // empty = closed-form reference
  HistogramSpec histogram;
  InitSpec init;
  bool antithetic = false;
  std::string plot_style = "semilog-y";

  std::int64_t steps_for(const SamplerConfig& c) const {
    if (steps) return *steps;
    return static_cast<std::int64_t>(std::ceil(*horizon / c.step - 1e-9));
  }
};

// ---------------------------------------------------------------------------
// Per-potential defaults (step sizes follow the reference comparison figure).

inline double default_step(const PotentialSpec& p) {
  const auto get = [&](const char* k, double fb) { return p.params.count(k) ? p.params.at(k) : fb; };
  if (p.name == "quadratic_iso") return 2.0;
  if (p.name == "quadratic_aniso") {
    const double m = get("m", 1.0), kappa = get("kappa", 1.0);
    if (m == 10.0 && kappa == 10.0) return 2.5;
    return 0.2;
  }
  if (p.name == "quartic") return 0.5;
  if (p.name == "perturbed") return 0.001;
  if (p.name == "bimodal") return 0.1;
  if (p.name == "rosenbrock2d") return 0.005;
  return 0.1;
}

inline double default_gamma(const PotentialModel& model, const PotentialSpec& p) {
  if ((p.name == "quadratic_iso" || p.name == "quadratic_aniso") && model.smoothness)
    return 2.0 * std::sqrt(*model.smoothness);
  return 2.0;
}

inline MetricKind default_metric(const PotentialSpec& p) {
  if (p.name == "quadratic_iso" || p.name == "quadratic_aniso") return MetricKind::w2_gaussian;
  if (p.name == "coupled_logcosh") return MetricKind::mean_error;
  return MetricKind::chi2_hist;
}

inline std::string default_label(const SamplerConfig& c) {
  std::string s = to_string(c.kind);
  if (c.kind == SamplerKind::hfhr_strang || c.kind == SamplerKind::hfhr_em) s += "_a" + format_double(c.alpha);
  if (c.kind != SamplerKind::ula) s += "_g" + format_double(c.gamma);
  s += "_h" + format_double(c.step);
  return s;
}

// ---------------------------------------------------------------------------
// Config parsing.

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) {
      std::string msg = (path.empty() ? "" : path + ": ") + "unknown key '" + it.key() + "' (allowed:";
      for (const char* a : allowed) msg += std::string(" ") + a;
      throw ConfigError(msg + ")");
    }
  }
}

inline std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double get_number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(join(path, key) + " must be a number");
  return v.get<double>();
}

inline std::int64_t get_integer(const json& obj, const std::string& path, const char* key, std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
    throw ConfigError(join(path, key) + " must be an integer");
  return v.is_number_integer() ? v.get<std::int64_t>() : static_cast<std::int64_t>(v.get<double>());
}

inline std::string get_string(const json& obj, const std::string& path, const char* key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(join(path, key) + " must be a string");
  return v.get<std::string>();
}

inline std::vector<double> get_number_list(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) throw ConfigError(join(path, key) + " is required");
  const json& v = obj.at(key);
  if (!v.is_array() || v.empty()) throw ConfigError(join(path, key) + " must be a nonempty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(join(path, key) + "[" + std::to_string(i) + "] must be a number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

inline PotentialSpec parse_potential(const json& root) {
  if (!root.contains("potential")) throw ConfigError("potential is required");
  const json& v = root.at("potential");
  PotentialSpec p;
  if (v.is_string()) {
    p.name = v.get<std::string>();
  } else {
    check_keys(v, "potential", {"name", "params"});
    if (!v.contains("name")) throw ConfigError("potential.name is required");
    p.name = get_string(v, "potential", "name", "");
    if (v.contains("params")) {
      const json& params = v.at("params");
      if (!params.is_object()) throw ConfigError("potential.params must be an object");
      for (auto it = params.begin(); it != params.end(); ++it) {
        if (!it.value().is_number()) throw ConfigError("potential.params." + it.key() + " must be a number");
        p.params[it.key()] = it.value().get<double>();
      }
    }
  }
  try {
    (void)builtin_potential(p.name, p.params);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("potential: ") + e.what());
  }
  return p;
}

inline SamplerConfig parse_sampler(const json& v, const std::string& path, const SamplerConfig& defaults) {
  check_keys(v, path, {"kind", "alpha", "gamma", "step", "label"});
  SamplerConfig c = defaults;
  try {
    c.kind = parse_sampler_kind(get_string(v, path, "kind", to_string(defaults.kind)));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ".kind: " + e.what());
  }
  c.alpha = get_number(v, path, "alpha", c.alpha);
  c.gamma = get_number(v, path, "gamma", c.gamma);
  c.step = get_number(v, path, "step", c.step);
  if (!(c.step > 0.0)) throw ConfigError(path + ".step must be > 0");
  if (!(c.gamma > 0.0)) throw ConfigError(path + ".gamma must be > 0");
  if (!(c.alpha >= 0.0)) throw ConfigError(path + ".alpha must be >= 0");
  return c;
}

inline MetricKind parse_metric(const std::string& s) {
  if (s == "w2_gaussian") return MetricKind::w2_gaussian;
  if (s == "chi2_hist") return MetricKind::chi2_hist;
  if (s == "mean_error") return MetricKind::mean_error;
  throw ConfigError("metric must be one of w2_gaussian, chi2_hist, mean_error (got '" + s + "')");
}

}  // namespace detail

/// Parses and validates a JSON experiment document.
inline ExperimentSpec parse_config(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  detail::check_keys(root, "", {"name", "potential", "sampler", "chains", "steps", "horizon", "record_every",
                                "seed", "metric", "reference", "histogram", "init", "antithetic", "plot"});
  ExperimentSpec spec;
  spec.name = detail::get_string(root, "", "name", spec.name);
  spec.potential = detail::parse_potential(root);
  const PotentialModel model = builtin_potential(spec.potential.name, spec.potential.params);

  SamplerConfig defaults;
  defaults.alpha = 1.0;
  defaults.gamma = default_gamma(model, spec.potential);
  defaults.step = default_step(spec.potential);
  defaults.kind = SamplerKind::hfhr_strang;
  if (!root.contains("sampler")) throw ConfigError("sampler is required");
  json samplers = root.at("sampler");
  if (samplers.is_object()) samplers = json::array({samplers});
  if (!samplers.is_array() || samplers.empty()) throw ConfigError("sampler must be a nonempty array");
  for (std::size_t i = 0; i < samplers.size(); ++i) {
    const std::string path = "sampler[" + std::to_string(i) + "]";
    spec.samplers.push_back(detail::parse_sampler(samplers[i], path, defaults));
    std::string label = detail::get_string(samplers[i], path, "label", default_label(spec.samplers.back()));
    if (label.empty() || label.find_first_of(",\n\"") != std::string::npos)
      throw ConfigError(path + ".label must be nonempty and free of commas and quotes");
    for (const auto& l : spec.labels)
      if (l == label) throw ConfigError(path + ".label '" + label + "' is not unique");
    spec.labels.push_back(label);
  }

  spec.chains = detail::get_integer(root, "", "chains", spec.chains);
  if (spec.chains < 1) throw ConfigError("chains must be >= 1");
  const bool has_steps = root.contains("steps"), has_horizon = root.contains("horizon");
  if (has_steps == has_horizon) throw ConfigError("exactly one of steps, horizon is required");
  if (has_steps) {
    spec.steps = detail::get_integer(root, "", "steps", 0);
    if (*spec.steps < 1) throw ConfigError("steps must be >= 1");
  } else {
    spec.horizon = detail::get_number(root, "", "horizon", 0.0);
    if (!(*spec.horizon > 0.0)) throw ConfigError("horizon must be > 0");
  }
  spec.record_every = detail::get_integer(root, "", "record_every", 1);
  if (spec.record_every < 1) throw ConfigError("record_every must be >= 1");
  for (std::size_t i = 0; i < spec.samplers.size(); ++i)
    if (spec.record_every > spec.steps_for(spec.samplers[i]))
      throw ConfigError("record_every exceeds the step count of sampler[" + std::to_string(i) + "]");
  spec.seed = static_cast<std::uint64_t>(detail::get_integer(root, "", "seed", 0));
  spec.metric = root.contains("metric") ? detail::parse_metric(detail::get_string(root, "", "metric", ""))
                                        : default_metric(spec.potential);
  spec.antithetic = root.contains("antithetic") ? root.at("antithetic").is_boolean() && root.at("antithetic").get<bool>() : false;
  if (root.contains("antithetic") && !root.at("antithetic").is_boolean()) throw ConfigError("antithetic must be a boolean");
  spec.plot_style = detail::get_string(root, "", "plot", spec.plot_style);
  try {
    (void)parse_plot_style(spec.plot_style);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plot: ") + e.what());
  }

  if (root.contains("init")) {
    const json& v = root.at("init");
    detail::check_keys(v, "init", {"q", "p", "q_std", "p_std"});
    spec.init.q = detail::get_number(v, "init", "q", spec.init.q);
    spec.init.p = detail::get_number(v, "init", "p", spec.init.p);
    spec.init.q_std = detail::get_number(v, "init", "q_std", 0.0);
    spec.init.p_std = detail::get_number(v, "init", "p_std", 0.0);
    if (spec.init.q_std < 0.0) throw ConfigError("init.q_std must be >= 0");
    if (spec.init.p_std < 0.0) throw ConfigError("init.p_std must be >= 0");
  }

  if (root.contains("histogram")) {
    const json& v = root.at("histogram");
    detail::check_keys(v, "histogram", {"bins", "lo", "hi"});
    spec.histogram.bins = static_cast<int>(detail::get_integer(v, "histogram", "bins", 50));
    if (spec.histogram.bins < 2) throw ConfigError("histogram.bins must be >= 2");
    if (v.contains("lo") != v.contains("hi")) throw ConfigError("histogram.lo and histogram.hi go together");
    if (v.contains("lo")) {
      spec.histogram.lo = detail::get_number(v, "histogram", "lo", 0.0);
      spec.histogram.hi = detail::get_number(v, "histogram", "hi", 0.0);
      if (!(*spec.histogram.hi > *spec.histogram.lo)) throw ConfigError("histogram.hi must be > histogram.lo");
    }
  }

  if (root.contains("reference")) {
    const json& v = root.at("reference");
    detail::check_keys(v, "reference", {"kind", "sampler", "alpha", "gamma", "step", "steps", "chains"});
    const std::string kind = detail::get_string(v, "reference", "kind", "closed_form");
    if (kind == "benchmark_run") {
      for (const char* k : {"sampler", "step", "steps"})
        if (!v.contains(k)) throw ConfigError(std::string("reference.") + k + " is required for benchmark_run");
      BenchmarkSpec b;
      try {
        b.sampler.kind = parse_sampler_kind(detail::get_string(v, "reference", "sampler", ""));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("reference.sampler: ") + e.what());
      }
      b.sampler.alpha = detail::get_number(v, "reference", "alpha", 0.0);
      b.sampler.gamma = detail::get_number(v, "reference", "gamma", 2.0);
      b.sampler.step = detail::get_number(v, "reference", "step", 0.0);
      if (!(b.sampler.step > 0.0)) throw ConfigError("reference.step must be > 0");
      if (!(b.sampler.gamma > 0.0)) throw ConfigError("reference.gamma must be > 0");
      if (!(b.sampler.alpha >= 0.0)) throw ConfigError("reference.alpha must be >= 0");
      b.steps = detail::get_integer(v, "reference", "steps", 0);
      if (b.steps < 1) throw ConfigError("reference.steps must be >= 1");
      b.chains = detail::get_integer(v, "reference", "chains", b.chains);
      if (b.chains < 2) throw ConfigError("reference.chains must be >= 2");
      spec.benchmark = b;
    } else if (kind != "closed_form") {
      throw ConfigError("reference.kind must be closed_form or benchmark_run (got '" + kind + "')");
    }
  }

  if (spec.metric == MetricKind::chi2_hist && !spec.benchmark) {
    if (!closed_form_reference(spec.potential.name, spec.potential.params).marginal_density)
      throw ConfigError("metric chi2_hist needs a first-coordinate density; none is available for '" +
                        spec.potential.name + "' (use mean_error or a benchmark_run reference)");
  }
  return spec;
}

inline ExperimentSpec load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Ensemble execution.

struct RunOptions {
  int workers = 1;
  std::string cache_dir;  // benchmark references are cached here when nonempty
  std::size_t block_size = 256;
};

/// Runs `fn(block_index)` for every block; blocks are independent.
template <class Fn>
void parallel_blocks(std::size_t blocks, int workers, Fn&& fn) {
  if (workers <= 1 || blocks <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), blocks));
  for (int w = 0; w < n; ++w)
    pool.emplace_back([&] {
      for (std::size_t b = next++; b < blocks; b = next++) fn(b);
    });
  for (auto& t : pool) t.join();
}

/// A lockstep ensemble of independent chains with per-chain noise streams.
class Ensemble {
 public:
  Ensemble(const PotentialModel& model, const SamplerConfig& config, std::int64_t chains, std::uint64_t seed,
           const InitSpec& init, bool antithetic, const RunOptions& opts)
      : Ensemble(model, config, streams(chains, seed, antithetic), init, opts) {}

  /// Uses the given per-chain streams (copied), one chain per stream. Seeding
  /// is the expensive part, so callers running many configs reuse them.
  Ensemble(const PotentialModel& model, const SamplerConfig& config, std::vector<RandomSource> rngs,
           const InitSpec& init, const RunOptions& opts)
      : model_(model), kernel_(config), opts_(opts), rngs_(std::move(rngs)) {
    const int d = model.dim;
    states_.reserve(rngs_.size());
    for (auto& rng : rngs_) {
      ChainState s(d);
      for (int j = 0; j < d; ++j) s.q[j] = init.q + (init.q_std > 0.0 ? init.q_std * rng.normal() : 0.0);
      for (int j = 0; j < d; ++j) s.p[j] = init.p + (init.p_std > 0.0 ? init.p_std * rng.normal() : 0.0);
      states_.push_back(std::move(s));
    }
    blocks_ = (states_.size() + opts.block_size - 1) / opts.block_size;
    block_grad_.assign(blocks_, 0);
    block_diverged_.assign(blocks_, -1);
  }

  /// Advances every chain by `n` steps from global step `from`. Returns the
  /// first step at which any chain became non-finite, or -1.
  std::int64_t advance(std::int64_t from, std::int64_t n) {
    parallel_blocks(blocks_, opts_.workers, [&](std::size_t b) {
      Workspace ws;
      const std::size_t lo = b * opts_.block_size;
      const std::size_t hi = std::min(states_.size(), lo + opts_.block_size);
      for (std::size_t i = lo; i < hi; ++i) {
        ChainState& s = states_[i];
        for (std::int64_t k = 1; k <= n; ++k) {
          kernel_.step(s, model_, rngs_[i], ws);
          if (!s.finite()) {
            const std::int64_t at = from + k;
            if (block_diverged_[b] < 0 || at < block_diverged_[b]) block_diverged_[b] = at;
            break;
          }
        }
      }
      block_grad_[b] += ws.gradient_evaluations;
    });
    std::int64_t first = -1;
    for (auto v : block_diverged_)
      if (v >= 0 && (first < 0 || v < first)) first = v;
    return first;
  }

  /// Positions as columns, in chain order.
  Matrix positions() const {
    Matrix X(model_.dim, static_cast<Eigen::Index>(states_.size()));
    for (std::size_t i = 0; i < states_.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = states_[i].q;
    return X;
  }

  Vector mean_position() const {
    Vector m = Vector::Zero(model_.dim);
    for (const auto& s : states_) m += s.q;
    return m / static_cast<double>(states_.size());
  }

  std::uint64_t gradient_evaluations() const {
    std::uint64_t t = 0;
    for (auto g : block_grad_) t += g;
    return t;
  }

  const std::vector<ChainState>& states() const { return states_; }

  /// Fresh per-chain streams for `chains` chains.
  static std::vector<RandomSource> streams(std::int64_t chains, std::uint64_t seed, bool antithetic) {
    std::vector<RandomSource> out;
    out.reserve(static_cast<std::size_t>(chains));
    for (std::int64_t i = 0; i < chains; ++i)
      out.push_back(RandomSource::for_chain(seed, static_cast<std::uint64_t>(i), antithetic));
    return out;
  }

 private:
  const PotentialModel& model_;
  Kernel kernel_;
  RunOptions opts_;
  std::vector<RandomSource> rngs_;
  std::vector<ChainState> states_;
  std::size_t blocks_ = 0;
  std::vector<std::uint64_t> block_grad_;
  std::vector<std::int64_t> block_diverged_;
};

/// Reference law used by the metrics: exact moments and density, or samples
/// from a long small-step benchmark run.
struct ResolvedReference {
  GaussianSummary moments;
  std::function<double(double)> density;  // first coordinate
  std::vector<double> samples;            // first coordinate of benchmark chains
};

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline ResolvedReference resolve_reference(const ExperimentSpec& spec, const PotentialModel& model,
                                           const RunOptions& opts) {
  ResolvedReference ref;
  if (!spec.benchmark) {
    TargetReference t = closed_form_reference(spec.potential.name, spec.potential.params);
    ref.moments = t.moments;
    ref.density = t.marginal_density;
    return ref;
  }
  const BenchmarkSpec& b = *spec.benchmark;
  nlohmann::json key = {{"potential", spec.potential.name},
                        {"params", spec.potential.params},
                        {"kind", to_string(b.sampler.kind)},
                        {"alpha", b.sampler.alpha},
                        {"gamma", b.sampler.gamma},
                        {"step", b.sampler.step},
                        {"steps", b.steps},
                        {"chains", b.chains},
                        {"seed", spec.seed},
                        {"init", {spec.init.q, spec.init.p, spec.init.q_std, spec.init.p_std}}};
  std::string path;
  if (!opts.cache_dir.empty()) {
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(fnv1a64(key.dump())));
    path = (std::filesystem::path(opts.cache_dir) / ("benchmark-" + std::string(hex) + ".json")).string();
    std::ifstream in(path);
    if (in) {
      const nlohmann::json cached = nlohmann::json::parse(in);
      if (cached.at("key") == key) {
        const auto mean = cached.at("mean").get<std::vector<double>>();
        const auto cov = cached.at("cov").get<std::vector<double>>();
        const auto n = static_cast<Eigen::Index>(mean.size());
        ref.moments.mean = Eigen::Map<const Vector>(mean.data(), n);
        ref.moments.cov = Eigen::Map<const Matrix>(cov.data(), n, n);
        ref.samples = cached.at("samples").get<std::vector<double>>();
        return ref;
      }
    }
  }
  Ensemble ens(model, b.sampler, b.chains, spec.seed ^ 0x5bd1e995ULL, spec.init, false, opts);
  if (ens.advance(0, b.steps) >= 0) throw std::runtime_error("benchmark reference run diverged");
  ref.moments = empirical_moments(ens.positions());
  for (const auto& s : ens.states()) ref.samples.push_back(s.q[0]);
  if (!path.empty()) {
    std::filesystem::create_directories(opts.cache_dir);
    nlohmann::json out = {{"key", key},
                          {"mean", std::vector<double>(ref.moments.mean.data(), ref.moments.mean.data() + ref.moments.mean.size())},
                          {"cov", std::vector<double>(ref.moments.cov.data(), ref.moments.cov.data() + ref.moments.cov.size())},
                          {"samples", ref.samples}};
    std::ofstream(path) << out.dump() << '\n';
  }
  return ref;
}

struct MetricValue {
  double value = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();
};

inline MetricValue evaluate_metric(MetricKind metric, const Matrix& positions, const ResolvedReference& ref,
                                   const HistogramSpec& hs) {
  const double n = static_cast<double>(positions.cols());
  switch (metric) {
    case MetricKind::w2_gaussian:
      return {w2_gaussian(empirical_moments(positions), ref.moments)};
    case MetricKind::mean_error: {
      const GaussianSummary g = empirical_moments(positions);
      return {mean_error(g, ref.moments.mean), std::sqrt(std::max(0.0, g.cov.trace()) / n)};
    }
    case MetricKind::chi2_hist: {
      const auto row = positions.row(0);
      double lo, hi;
      if (hs.lo) {
        lo = *hs.lo;
        hi = *hs.hi;
      } else {
        // mean +- 6 sd of the pooled samples, widened to cover the target the same way
        const double m = row.mean();
        const double sd = std::sqrt(std::max(0.0, (row.array() - m).square().sum() / std::max(1.0, n - 1.0)));
        const double rm = ref.moments.mean(0), rsd = std::sqrt(ref.moments.cov(0, 0));
        lo = std::min(m - 6.0 * sd, rm - 6.0 * rsd);
        hi = std::max(m + 6.0 * sd, rm + 6.0 * rsd);
      }
      HistogramDensity hist(lo, hi, hs.bins);
      for (Eigen::Index i = 0; i < row.size(); ++i) hist.add(row(i));
      if (ref.density) return {chi2_histogram(hist, ref.density)};
      HistogramDensity target(lo, hi, hs.bins);
      for (double x : ref.samples) target.add(x);
      const auto p = hist.masses();
      const auto q = target.masses();
      double chi2 = 0.0;
      for (std::size_t j = 0; j < q.size(); ++j) {
        if (q[j] <= 0.0) {
          if (p[j] > 0.0)
            throw std::domain_error("chi2_histogram: bin " + std::to_string(j) +
                                    " is nonempty but has zero benchmark mass");
          continue;
        }
        chi2 += (p[j] - q[j]) * (p[j] - q[j]) / q[j];
      }
      return {chi2};
    }
  }
  return {};
}

/// Runs every sampler config of the spec; deterministic for a fixed seed
/// regardless of the worker count. Divergence truncates and flags a config.
inline ResultSeries run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {}) {
  const PotentialModel model = builtin_potential(spec.potential.name, spec.potential.params);
  const ResolvedReference ref = resolve_reference(spec, model, opts);
  const std::string metric = to_string(spec.metric);
  ResultSeries series;
  for (std::size_t ci = 0; ci < spec.samplers.size(); ++ci) {
    const SamplerConfig& config = spec.samplers[ci];
    const std::string& id = spec.labels[ci];
    const std::int64_t steps = spec.steps_for(config);
    Ensemble ens(model, config, spec.chains, spec.seed, spec.init, spec.antithetic, opts);
    ConfigOutcome outcome;
    outcome.config_id = id;
    const auto flag_divergence = [&](std::int64_t k) {
      outcome.diverged = true;
      outcome.divergence_step = k;
      series.rows.push_back({id, k, static_cast<double>(k) * config.step, metric,
                             std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN(), "diverged"});
    };
    // A finite but overflowing ensemble can still give a non-finite metric;
    // that counts as divergence too.
    const auto record = [&](std::int64_t k) {
      const MetricValue mv = evaluate_metric(spec.metric, ens.positions(), ref, spec.histogram);
      if (!std::isfinite(mv.value)) {
        flag_divergence(k);
        return false;
      }
      series.rows.push_back({id, k, static_cast<double>(k) * config.step, metric, mv.value, mv.std_error, ""});
      return true;
    };
    std::int64_t now = 0;
    bool alive = record(0);
    while (alive && now < steps) {
      const std::int64_t next = std::min(steps, now + spec.record_every);
      const std::int64_t bad = ens.advance(now, next - now);
      if (bad >= 0) {
        flag_divergence(bad);
        break;
      }
      now = next;
      alive = record(now);
    }
    outcome.gradient_evaluations = ens.gradient_evaluations();
    series.configs.push_back(outcome);
  }
  return series;
}

/// First recorded time at which a series for `config_id` falls to `level`
/// or below; +inf when it never does.
inline double first_time_below(const ResultSeries& s, const std::string& config_id, double level) {
  for (const auto& r : s.rows)
    if (r.config_id == config_id && r.flag.empty() && r.value <= level) return r.time;
  return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Iteration-complexity sweep over (gamma, h) for each alpha.

struct SweepSpec {
  PotentialSpec potential;
  std::vector<double> alphas;
  std::vector<double> gammas;
  std::vector<double> steps;
  double eps = 0.1;
  std::int64_t chains = 1000;
  std::vector<std::uint64_t> seeds{0};
  std::int64_t max_iterations = 10000;
  InitSpec init;  // Dirac at (q 1, p 0) by default
  std::optional<Vector> target_mean;  // closed-form reference when empty
};

struct SweepRow {
  double alpha = 0.0;
  double best_gamma = std::numeric_limits<double>::quiet_NaN();
  double best_step = std::numeric_limits<double>::quiet_NaN();
  double mean_iterations = std::numeric_limits<double>::infinity();
  double std_iterations = 0.0;
  std::vector<double> per_seed;  // +inf when every cell diverged or never hit
};

namespace detail {

struct ThresholdHit {
  std::int64_t iterations = -1;  // -1: not reached below the cap
  bool diverged = false;
};

inline ThresholdHit run_to_threshold(const PotentialModel& model, const SamplerConfig& config, const SweepSpec& spec,
                                     const Vector& target, const std::vector<RandomSource>& rngs, std::int64_t cap,
                                     const RunOptions& opts) {
  Ensemble ens(model, config, rngs, spec.init, opts);
  if ((ens.mean_position() - target).norm() <= spec.eps) return {0, false};
  for (std::int64_t k = 1; k < cap; ++k) {
    if (ens.advance(k - 1, 1) >= 0) return {-1, true};
    if ((ens.mean_position() - target).norm() <= spec.eps) return {k, false};
  }
  return {};
}

}  // namespace detail

/// Iterations until ||E q_k - E q|| <= eps, capped at `cap` (returns +inf if
/// not reached within the cap or if the chain diverges).
inline double iterations_to_threshold(const PotentialModel& model, const SamplerConfig& config,
                                      const SweepSpec& spec, const Vector& target, std::uint64_t seed,
                                      double cap, const RunOptions& opts) {
  const double c = std::min(cap, 9.0e18);
  const auto hit = detail::run_to_threshold(model, config, spec, target, Ensemble::streams(spec.chains, seed, false),
                                            static_cast<std::int64_t>(std::ceil(c)), opts);
  return hit.iterations >= 0 ? static_cast<double>(hit.iterations) : std::numeric_limits<double>::infinity();
}

inline std::vector<SweepRow> sweep_iteration_complexity(const SweepSpec& spec, const RunOptions& opts = {}) {
  if (spec.alphas.empty() || spec.gammas.empty() || spec.steps.empty() || spec.seeds.empty())
    throw std::invalid_argument("sweep_iteration_complexity: grids must be nonempty");
  if (!(spec.eps > 0.0)) throw std::invalid_argument("sweep_iteration_complexity: eps must be > 0");
  const PotentialModel model = builtin_potential(spec.potential.name, spec.potential.params);
  const Vector target = spec.target_mean ? *spec.target_mean
                                         : closed_form_reference(spec.potential.name, spec.potential.params).moments.mean;
  std::vector<double> hs = spec.steps;
  std::sort(hs.begin(), hs.end(), std::greater<>());
  std::vector<SweepRow> rows;
  for (double alpha : spec.alphas) {
    SweepRow row;
    row.alpha = alpha;
    std::map<std::pair<double, double>, int> wins;
    std::pair<double, double> first_best{std::numeric_limits<double>::quiet_NaN(), 0.0};
    for (std::size_t si = 0; si < spec.seeds.size(); ++si) {
      // Fewest iterations over the grid, ties to the first cell in scan order.
      // The cap doubles so hopeless cells never run far past the eventual best.
      double best = std::numeric_limits<double>::infinity();
      std::pair<double, double> cell{std::numeric_limits<double>::quiet_NaN(), 0.0};
      const std::vector<RandomSource> rngs = Ensemble::streams(spec.chains, spec.seeds[si], false);
      std::vector<SamplerConfig> live;
      for (double h : hs)
        for (double g : spec.gammas) live.push_back({alpha, g, h, SamplerKind::hfhr_strang});
      for (std::int64_t cap = 1; !live.empty() && std::isinf(best);) {
        cap = std::min(2 * cap, spec.max_iterations + 1);
        std::vector<SamplerConfig> still;
        for (const auto& c : live) {
          const auto hit = detail::run_to_threshold(model, c, spec, target, rngs, cap, opts);
          if (hit.iterations >= 0 && static_cast<double>(hit.iterations) < best) {
            best = static_cast<double>(hit.iterations);
            cell = {c.gamma, c.step};
          }
          if (!hit.diverged) still.push_back(c);
        }
        live.swap(still);
        if (cap == spec.max_iterations + 1) break;
      }
      row.per_seed.push_back(best);
      if (std::isfinite(best)) {
        ++wins[cell];
        if (si == 0 || std::isnan(first_best.first)) first_best = cell;
      }
    }
    int top = 0;
    for (const auto& [cell, n] : wins)
      if (n > top || (n == top && cell == first_best)) {
        top = n;
        row.best_gamma = cell.first;
        row.best_step = cell.second;
      }
    const bool all_finite = std::all_of(row.per_seed.begin(), row.per_seed.end(), [](double v) { return std::isfinite(v); });
    if (all_finite) {
      double sum = 0.0;
      for (double v : row.per_seed) sum += v;
      row.mean_iterations = sum / static_cast<double>(row.per_seed.size());
      double ss = 0.0;
      for (double v : row.per_seed) ss += (v - row.mean_iterations) * (v - row.mean_iterations);
      row.std_iterations = row.per_seed.size() > 1 ? std::sqrt(ss / static_cast<double>(row.per_seed.size() - 1)) : 0.0;
    }
    rows.push_back(row);
  }
  return rows;
}

/// Sweep settings from a JSON document with "type": "sweep".
inline SweepSpec parse_sweep_config(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  detail::check_keys(root, "", {"type", "name", "potential", "alphas", "gammas", "steps", "eps", "chains", "seeds",
                                "max_iterations", "init"});
  SweepSpec s;
  s.potential = detail::parse_potential(root);
  s.alphas = detail::get_number_list(root, "", "alphas");
  s.gammas = detail::get_number_list(root, "", "gammas");
  s.steps = detail::get_number_list(root, "", "steps");
  for (std::size_t i = 0; i < s.alphas.size(); ++i)
    if (!(s.alphas[i] >= 0.0)) throw ConfigError("alphas[" + std::to_string(i) + "] must be >= 0");
  for (std::size_t i = 0; i < s.gammas.size(); ++i)
    if (!(s.gammas[i] > 0.0)) throw ConfigError("gammas[" + std::to_string(i) + "] must be > 0");
  for (std::size_t i = 0; i < s.steps.size(); ++i)
    if (!(s.steps[i] > 0.0)) throw ConfigError("steps[" + std::to_string(i) + "] must be > 0");
  s.eps = detail::get_number(root, "", "eps", 0.1);
  if (!(s.eps > 0.0)) throw ConfigError("eps must be > 0");
  s.chains = detail::get_integer(root, "", "chains", 1000);
  if (s.chains < 1) throw ConfigError("chains must be >= 1");
  s.max_iterations = detail::get_integer(root, "", "max_iterations", 10000);
  if (s.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (root.contains("seeds")) {
    s.seeds.clear();
    for (double v : detail::get_number_list(root, "", "seeds")) s.seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (root.contains("init")) {
    const json& v = root.at("init");
    detail::check_keys(v, "init", {"q", "p", "q_std", "p_std"});
    s.init.q = detail::get_number(v, "init", "q", 1.0);
    s.init.p = detail::get_number(v, "init", "p", 0.0);
    s.init.q_std = detail::get_number(v, "init", "q_std", 0.0);
    s.init.p_std = detail::get_number(v, "init", "p_std", 0.0);
  }
  return s;
}

}  // namespace hfhr
