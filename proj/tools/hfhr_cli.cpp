#include "hfhr/hfhr.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDivergedOnly = 3;

struct Common {
  std::optional<std::uint64_t> seed;
  int workers = 1;
  std::string out_dir = ".";
  std::string format = "csv";
};

void add_common(CLI::App* cmd, Common& c, bool with_output) {
  cmd->add_option("--seed", c.seed, "Base random seed (overrides the config)");
  cmd->add_option("--workers", c.workers, "Worker threads")->check(CLI::PositiveNumber);
  if (with_output) {
    cmd->add_option("--out-dir", c.out_dir, "Output directory");
    cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "svg", "both"}));
  }
}

hfhr::ParamMap parse_params(const std::vector<std::string>& kv) {
  hfhr::ParamMap params;
  for (const auto& s : kv) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw hfhr::ConfigError("--param expects key=value, got '" + s + "'");
    try {
      params[s.substr(0, eq)] = hfhr::parse_double(s.substr(eq + 1));
    } catch (const std::invalid_argument&) {
      throw hfhr::ConfigError("--param " + s.substr(0, eq) + " must be a number");
    }
  }
  return params;
}

int run_sample(const std::string& potential, const std::vector<std::string>& param_kv, const std::string& kind,
               double alpha, double gamma, double step, std::int64_t steps, double q0, double p0,
               std::int64_t every, const Common& c) {
  hfhr::PotentialModel model;
  hfhr::SamplerConfig config;
  try {
    model = hfhr::builtin_potential(potential, parse_params(param_kv));
    config = {alpha, gamma, step, hfhr::parse_sampler_kind(kind)};
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw hfhr::ConfigError(e.what());
  }
  if (steps < 0) throw hfhr::ConfigError("--steps must be >= 0");
  if (every < 1) throw hfhr::ConfigError("--every must be >= 1");
  hfhr::RandomSource rng(c.seed.value_or(0));
  hfhr::ChainState init(hfhr::Vector::Constant(model.dim, q0), hfhr::Vector::Constant(model.dim, p0));
  std::ostream& out = std::cout;
  const auto emit = [&](std::int64_t k, const hfhr::ChainState& s) {
    out << k << ',' << hfhr::format_double(static_cast<double>(k) * step);
    for (int i = 0; i < model.dim; ++i) out << ',' << hfhr::format_double(s.q[i]);
    for (int i = 0; i < model.dim; ++i) out << ',' << hfhr::format_double(s.p[i]);
    out << '\n';
  };
  out << "step,time";
  for (int i = 0; i < model.dim; ++i) out << ",q" << i;
  for (int i = 0; i < model.dim; ++i) out << ",p" << i;
  out << '\n';
  emit(0, init);
  try {
    hfhr::simulate_chain(init, model, config, steps, rng, [&](std::int64_t k, const hfhr::ChainState& s) {
      if (k % every == 0 || k == steps) emit(k, s);
    });
  } catch (const hfhr::DivergenceError& e) {
    std::cerr << "hfhr: " << e.what() << '\n';
    return kDivergedOnly;
  }
  return kOk;
}

int run_experiment_cmd(const std::string& path, const Common& c) {
  std::ifstream in(path);
  if (!in) throw hfhr::ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  nlohmann::json probe;
  try {
    probe = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw hfhr::ConfigError(std::string("invalid JSON: ") + e.what());
  }
  std::filesystem::create_directories(c.out_dir);
  const std::string stem = std::filesystem::path(path).stem().string();
  hfhr::RunOptions opts;
  opts.workers = c.workers;
  opts.cache_dir = (std::filesystem::path(c.out_dir) / "cache").string();

  if (probe.is_object() && probe.value("type", std::string("series")) == "sweep") {
    hfhr::SweepSpec spec = hfhr::parse_sweep_config(text);
    if (c.seed) {
      for (auto& s : spec.seeds) s += *c.seed;
    }
    const auto rows = hfhr::sweep_iteration_complexity(spec, opts);
    const std::string out_path = (std::filesystem::path(c.out_dir) / (stem + "_sweep.csv")).string();
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + out_path + "' for writing");
    out << "alpha,best_gamma,best_step,mean_iterations,std_iterations\n";
    for (const auto& r : rows) {
      out << hfhr::format_double(r.alpha) << ',' << hfhr::format_double(r.best_gamma) << ','
          << hfhr::format_double(r.best_step) << ',' << hfhr::format_double(r.mean_iterations) << ','
          << hfhr::format_double(r.std_iterations) << '\n';
      std::cout << "alpha=" << r.alpha << " iterations=" << r.mean_iterations << " (sd " << r.std_iterations
                << ") gamma=" << r.best_gamma << " h=" << r.best_step << '\n';
    }
    std::cout << "wrote " << out_path << '\n';
    return kOk;
  }

  hfhr::ExperimentSpec spec = hfhr::parse_config(text);
  if (c.seed) spec.seed = *c.seed;
  const hfhr::ResultSeries series = hfhr::run_experiment(spec, opts);
  if (c.format == "csv" || c.format == "both") {
    const std::string p = (std::filesystem::path(c.out_dir) / (stem + ".csv")).string();
    hfhr::write_csv(series, p);
    std::cout << "wrote " << p << '\n';
  }
  if (c.format == "svg" || c.format == "both") {
    const std::string p = (std::filesystem::path(c.out_dir) / (stem + ".svg")).string();
    hfhr::write_svg_plot(series, hfhr::parse_plot_style(spec.plot_style), p, spec.name);
    std::cout << "wrote " << p << '\n';
  }
  for (const auto& o : series.configs) {
    std::cout << o.config_id << ": gradient evaluations " << o.gradient_evaluations;
    if (o.diverged) std::cout << ", diverged at step " << o.divergence_step;
    std::cout << '\n';
  }
  return series.all_diverged() ? kDivergedOnly : kOk;
}

int run_theory(double L, double m, double alpha, double gamma, std::optional<double> G, int d,
               std::optional<double> lambda_pi, std::optional<double> h, std::optional<double> eps,
               double w2_init) {
  hfhr::TheoryConstants tc;
  try {
    tc = hfhr::theory_constants(L, m, alpha, gamma);
  } catch (const std::invalid_argument& e) {
    throw hfhr::ConfigError(e.what());
  }
  std::cout << std::setprecision(10);
  std::cout << "L'            " << tc.l_prime << '\n'
            << "sigma_max     " << tc.sigma_max << '\n'
            << "sigma_min     " << tc.sigma_min << '\n'
            << "kappa'        " << tc.kappa_prime << '\n'
            << "lambda'       " << tc.lambda_prime << (tc.contraction_available ? "" : "  (gamma^2 <= L: no contraction)")
            << '\n';
  const double lam = lambda_pi.value_or(m);
  if (alpha > 0.0 && lam > 0.0)
    std::cout << "chi2 rate (Poincare)     " << hfhr::rate_bound_chi2_poincare(alpha, gamma, lam) << '\n';
  const auto cvx = hfhr::rate_bound_chi2_convex(alpha, gamma, lam, L);
  std::cout << "chi2 rate (convex)       " << cvx.rate << "  gamma condition " << (cvx.gamma_condition ? "holds" : "fails")
            << ", alpha condition " << (cvx.alpha_condition ? "holds" : "fails") << '\n';
  const auto w2 = hfhr::rate_bound_w2(alpha, gamma, m, L);
  std::cout << "W2 rate                  " << w2.rate << "  prefactor " << w2.prefactor << "  gamma condition "
            << (w2.gamma_condition ? "holds" : "fails") << ", alpha condition "
            << (w2.alpha_condition ? "holds" : "fails") << '\n';
  if (G && m > 0.0 && tc.contraction_available) {
    const auto th = hfhr::discretization_step_thresholds(L, m, *G, alpha, gamma);
    std::cout << "h0 = " << th.h0 << "  (1/(4 kappa' L') " << th.lipschitz_limit << ", h1 " << th.h1 << ", h2 " << th.h2
              << ", h3 " << th.h3 << ")\n";
    const double C = hfhr::discretization_error_constant(L, m, *G, alpha, gamma, d, d / m, w2_init);
    std::cout << "C (d=" << d << ", W2(0)=" << w2_init << ") = " << C << '\n';
    if (h) std::cout << "W2 bound after k=1/h steps: " << hfhr::w2_bound_discrete(alpha, gamma, m, L, *h, 1.0 / *h, w2_init, C) << '\n';
    if (eps) {
      const auto ic = hfhr::iteration_complexity(alpha, gamma, m, C, th.h0, *eps, tc.kappa_prime, w2_init);
      std::cout << "eps=" << *eps << ": h* = " << ic.h_star << ", k* = " << ic.k_star << '\n';
    }
  }
  return kOk;
}

int run_spectral(double gamma, double c) {
  std::cout << std::setprecision(10);
  std::cout << "# forward-Euler mean map on x^2/2, gamma=" << gamma << '\n';
  std::cout << "alpha,optimal_h,optimal_radius,radius_check\n";
  std::vector<double> alphas{0.0, 0.5, 1.0, 2.0, gamma, gamma + 1.0, gamma + 2.0};
  std::sort(alphas.begin(), alphas.end());
  alphas.erase(std::unique(alphas.begin(), alphas.end()), alphas.end());
  for (double alpha : alphas) {
    const auto o = hfhr::demo1_optimal(alpha, gamma);
    const double check = hfhr::spectral_radius(hfhr::em_mean_map(alpha, gamma, o.h));
    std::cout << alpha << ',' << o.h << ',' << o.radius << ',' << check << '\n';
  }
  const auto nil = hfhr::nilpotent_parameters(gamma);
  const Eigen::Matrix2d A = hfhr::em_mean_map(nil.alpha, gamma, nil.h);
  std::cout << "# nilpotent choice alpha=" << nil.alpha << " h=" << nil.h << " |A^2|_max=" << (A * A).cwiseAbs().maxCoeff()
            << '\n';
  std::cout << "# two-scale problem (Hessian spectrum {1, 1/eps}), c=" << c << '\n';
  std::cout << "eps,uld_h,uld_gamma,uld_discount,hfhr_alpha,hfhr_gamma,hfhr_h,hfhr_discount\n";
  for (double eps : {0.01, 0.05, 0.1, 0.2, 0.4}) {
    const auto u = hfhr::uld_optimal_discount(eps);
    const auto hf = hfhr::hfhr_demo2_parameters(eps, c);
    std::cout << eps << ',' << u.h << ',' << u.gamma << ',' << u.discount << ',' << hf.alpha << ',' << hf.gamma << ','
              << hf.h << ',' << hf.discount << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HFHR sampler toolkit"};
  app.require_subcommand(1);

  Common sample_c, exp_c;
  auto* sample = app.add_subcommand("sample", "Run one chain and stream its states as CSV");
  std::string potential = "quadratic_iso", kind = "hfhr_strang";
  std::vector<std::string> param_kv;
  double alpha = 1.0, gamma = 2.0, step = 0.1, q0 = 1.0, p0 = 0.0;
  std::int64_t steps = 100, every = 1;
  sample->add_option("--potential", potential, "Built-in potential name");
  sample->add_option("--param", param_kv, "Potential parameter key=value (repeatable)");
  sample->add_option("--kind", kind, "hfhr_strang | uld_klmc | ula | hfhr_em");
  sample->add_option("--alpha", alpha);
  sample->add_option("--gamma", gamma);
  sample->add_option("--step", step);
  sample->add_option("--steps", steps);
  sample->add_option("--q0", q0, "Initial position (every coordinate)");
  sample->add_option("--p0", p0, "Initial momentum (every coordinate)");
  sample->add_option("--every", every, "Print every n-th state");
  add_common(sample, sample_c, false);

  auto* experiment = app.add_subcommand("experiment", "Run an experiment config and write CSV/SVG");
  std::string config_path;
  experiment->add_option("config", config_path, "JSON config file")->required();
  add_common(experiment, exp_c, true);

  auto* theory = app.add_subcommand("theory", "Print contraction constants and rate bounds");
  double L = 1.0, m = 1.0, t_alpha = 1.0, t_gamma = 2.0, w2_init = 1.0;
  std::optional<double> G, lambda_pi, h, eps;
  int d = 1;
  theory->add_option("--L", L, "Smoothness constant")->required();
  theory->add_option("--m", m, "Strong convexity constant")->required();
  theory->add_option("--alpha", t_alpha)->required();
  theory->add_option("--gamma", t_gamma)->required();
  theory->add_option("--G", G, "Third-derivative growth constant (enables step thresholds)");
  theory->add_option("--lambda", lambda_pi, "Poincare constant (defaults to m)");
  theory->add_option("--d", d, "Dimension for the discretization constant");
  theory->add_option("--step", h, "Step size for the discrete W2 bound");
  theory->add_option("--eps", eps, "Target accuracy for the iteration complexity");
  theory->add_option("--w2-init", w2_init, "Initial W2 distance");

  auto* spectral = app.add_subcommand("spectral", "Print the mean-process spectral tables");
  double s_gamma = 1.0, s_c = 1.0;
  spectral->add_option("--gamma", s_gamma, "Friction for the 1D table");
  spectral->add_option("--c", s_c, "Step multiplier h = c eps for the two-scale table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*sample) return run_sample(potential, param_kv, kind, alpha, gamma, step, steps, q0, p0, every, sample_c);
    if (*experiment) return run_experiment_cmd(config_path, exp_c);
    if (*theory) return run_theory(L, m, t_alpha, t_gamma, G, d, lambda_pi, h, eps, w2_init);
    if (*spectral) return run_spectral(s_gamma, s_c);
  } catch (const hfhr::ConfigError& e) {
    std::cerr << "hfhr: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "hfhr: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}
