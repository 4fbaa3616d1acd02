#include "hfhr/hfhr.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

using namespace hfhr;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"potential": {"name": "quadratic_iso", "params": {"d": 1}}, "sampler": [{}], "steps": 10})";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hfhr_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + HFHR_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalDefaults) {
  const auto spec = parse_config(kMinimal);
  EXPECT_EQ(spec.chains, 10000);
  EXPECT_EQ(spec.histogram.bins, 50);
  ASSERT_EQ(spec.samplers.size(), 1u);
  EXPECT_EQ(spec.samplers[0].kind, SamplerKind::hfhr_strang);
  EXPECT_DOUBLE_EQ(spec.samplers[0].step, 2.0);
  EXPECT_DOUBLE_EQ(spec.samplers[0].gamma, 2.0);
  EXPECT_EQ(spec.metric, MetricKind::w2_gaussian);
  EXPECT_EQ(spec.record_every, 1);
  EXPECT_FALSE(spec.benchmark.has_value());
}

TEST(Config, PathQualifiedErrors) {
  EXPECT_EQ(error_of(R"({"potential": {"name": "quadratic_iso"}, "sampler": [{"step": -0.1}], "steps": 10})"),
            "sampler[0].step must be > 0");
  const std::string unknown = error_of(R"({"potential": {"name": "banana"}, "sampler": [{}], "steps": 10})");
  EXPECT_NE(unknown.find("rosenbrock2d"), std::string::npos) << unknown;
  EXPECT_NE(unknown.find("quadratic_iso"), std::string::npos) << unknown;
  EXPECT_NE(error_of(R"({"potential": {"name": "quadratic_iso"}, "sampler": [{}], "steps": 10, "colour": 1})")
                .find("unknown key 'colour'"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"potential": {"name": "quadratic_iso"}, "sampler": [{"kind": "mala"}], "steps": 1})")
                .find("sampler[0].kind"),
            std::string::npos);
  EXPECT_FALSE(error_of(R"({"potential": {"name": "quadratic_iso"}, "sampler": [{}]})").empty());
  EXPECT_FALSE(error_of(R"({"potential": {"name": "quadratic_iso"}, "sampler": [{}], "steps": 2, "horizon": 1})").empty());
  EXPECT_FALSE(error_of(R"({"potential": {"name": "quadratic_iso"}, "sampler": [{}], "steps": 5, "record_every": 6})").empty());
  EXPECT_FALSE(error_of(R"({"potential": {"name": "quadratic_iso"}, "sampler": [{}], "steps": 5, "chains": 0})").empty());
  EXPECT_FALSE(error_of("{not json").empty());
}

TEST(Config, BenchmarkNeedsItsOwnFields) {
  const std::string base = R"({"potential": {"name": "bimodal"}, "sampler": [{}], "steps": 5, "reference": )";
  EXPECT_NE(error_of(base + R"({"kind": "benchmark_run", "step": 0.001, "steps": 10}})").find("reference.sampler"),
            std::string::npos);
  EXPECT_NE(error_of(base + R"({"kind": "benchmark_run", "sampler": "uld_klmc", "steps": 10}})").find("reference.step"),
            std::string::npos);
  const auto spec = parse_config(base + R"({"kind": "benchmark_run", "sampler": "uld_klmc", "step": 0.001, "steps": 10}})");
  ASSERT_TRUE(spec.benchmark.has_value());
  EXPECT_EQ(spec.benchmark->steps, 10);
  EXPECT_EQ(spec.metric, MetricKind::chi2_hist);
}

TEST(Config, Chi2NeedsDensity) {
  EXPECT_NE(error_of(R"({"potential": {"name": "coupled_logcosh"}, "sampler": [{}], "steps": 5, "metric": "chi2_hist"})")
                .find("chi2_hist"),
            std::string::npos);
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(HFHR_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    const std::string text = slurp(e.path());
    if (text.find("\"sweep\"") != std::string::npos)
      EXPECT_NO_THROW(parse_sweep_config(text)) << e.path();
    else
      EXPECT_NO_THROW(parse_config(text)) << e.path();
  }
}

TEST(Csv, EmptySeriesIsHeaderOnly) {
  std::ostringstream out;
  write_csv(ResultSeries{}, out);
  EXPECT_EQ(out.str(), std::string(kCsvHeader) + "\n");
}

TEST(Csv, RoundTripIsBitExact) {
  ResultSeries s;
  s.rows.push_back({"a", 3, 0.30000000000000004, "w2_gaussian", 0.1234567890123456789, 1e-300, ""});
  s.rows.push_back({"b", 7, 1.0 / 3.0, "mean_error", std::nextafter(1.0, 2.0), std::numeric_limits<double>::quiet_NaN(), ""});
  s.rows.push_back({"b", 9, 2.0, "mean_error", std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN(), "diverged"});
  std::ostringstream out;
  write_csv(s, out);
  std::istringstream in(out.str());
  const ResultSeries back = read_csv(in);
  ASSERT_EQ(back.rows.size(), 3u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.rows[i].config_id, s.rows[i].config_id);
    EXPECT_EQ(back.rows[i].step, s.rows[i].step);
    EXPECT_EQ(back.rows[i].time, s.rows[i].time);
    EXPECT_EQ(back.rows[i].value, s.rows[i].value);
  }
  EXPECT_EQ(back.rows[0].std_error, 1e-300);
  EXPECT_TRUE(std::isnan(back.rows[1].std_error));
  EXPECT_EQ(back.rows[2].flag, "diverged");
  EXPECT_TRUE(std::isnan(back.rows[2].value));
  EXPECT_EQ(out.str().find('\r'), std::string::npos);
}

TEST(Csv, SeventeenDigitValues) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen) * std::pow(10.0, (i % 40) - 20);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    EXPECT_EQ(parse_double(buf), v);
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
}

TEST(Csv, ReportsPath) {
  try {
    write_csv(ResultSeries{}, "/nonexistent_dir_for_hfhr/out.csv");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent_dir_for_hfhr/out.csv"), std::string::npos);
  }
}

TEST(Svg, PolylinesAndLegend) {
  ResultSeries s;
  for (int k = 0; k <= 10; ++k) {
    s.rows.push_back({"fast", k, 0.5 * k, "w2_gaussian", std::exp(-1.0 * k), NAN, ""});
    s.rows.push_back({"slow", k, 0.5 * k, "w2_gaussian", std::exp(-0.3 * k), NAN, ""});
  }
  std::ostringstream out;
  write_svg_plot(s, PlotStyle::semilog_y, out, "decay");
  const std::string svg = out.str();
  EXPECT_EQ(svg.rfind("<svg", 0) == 0 || svg.find("<svg") != std::string::npos, true);
  std::size_t lines = 0;
  for (std::size_t p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  EXPECT_EQ(lines, 2u);
  EXPECT_NE(svg.find("data-config=\"fast\""), std::string::npos);
  EXPECT_NE(svg.find("data-config=\"slow\""), std::string::npos);
  EXPECT_NE(svg.find(">fast</text>"), std::string::npos);
  EXPECT_NE(svg.find(">1e-4</text>"), std::string::npos);
  EXPECT_EQ(svg.find("href"), std::string::npos);  // no external assets
}

TEST(Svg, StraightLinesUnderLogScales) {
  // y = e^{-t} on semilog-y and y = x on log-log must map to collinear points.
  const auto points_of = [](const std::string& svg) {
    const auto a = svg.find("points=\"") + 8;
    std::istringstream in(svg.substr(a, svg.find('"', a) - a));
    std::vector<std::pair<double, double>> pts;
    std::string tok;
    while (in >> tok) {
      const auto c = tok.find(',');
      pts.emplace_back(std::stod(tok.substr(0, c)), std::stod(tok.substr(c + 1)));
    }
    return pts;
  };
  ResultSeries semi, loglog;
  for (int k = 0; k <= 8; ++k) semi.rows.push_back({"c", k, 1.0 * k, "m", std::exp(-1.0 * k), NAN, ""});
  for (int k = 1; k <= 8; ++k) {
    const double h = std::pow(2.0, -k);
    loglog.rows.push_back({"c", k, h, "m", 3.0 * h, NAN, ""});
  }
  std::ostringstream a, b;
  write_svg_plot(semi, PlotStyle::semilog_y, a);
  write_svg_plot(loglog, PlotStyle::log_log, b);
  for (const auto& pts : {points_of(a.str()), points_of(b.str())}) {
    ASSERT_GE(pts.size(), 3u);
    const double s0 = (pts[1].second - pts[0].second) / (pts[1].first - pts[0].first);
    for (std::size_t i = 2; i < pts.size(); ++i)
      EXPECT_NEAR((pts[i].second - pts[0].second) / (pts[i].first - pts[0].first), s0, 1e-3 * std::abs(s0) + 1e-3);
  }
  const auto ll = points_of(b.str());
  const double slope = (ll.back().second - ll.front().second) / (ll.back().first - ll.front().first);
  EXPECT_NEAR(slope, -1.0, 1e-2);  // 45 degrees (SVG y grows downward)
  ResultSeries bad;
  bad.rows.push_back({"c", 0, 1.0, "m", 0.0, NAN, ""});
  std::ostringstream c;
  EXPECT_THROW(write_svg_plot(bad, PlotStyle::log_log, c), std::invalid_argument);
}

TEST(RunExperiment, GaussianDecayAndAgreementWithExactLaw) {
  auto spec = parse_config(R"({"potential": {"name": "quadratic_iso", "params": {"d": 1}},
      "sampler": [{"kind": "hfhr_strang", "alpha": 1, "gamma": 2, "step": 0.1}],
      "chains": 10000, "horizon": 5, "record_every": 10, "seed": 3})");
  const auto s = run_experiment(spec, RunOptions{4});
  ASSERT_FALSE(s.configs[0].diverged);
  const double w0 = s.rows.front().value, w5 = s.rows.back().value;
  EXPECT_NEAR(w0, std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(s.rows.back().time, 5.0, 1e-12);
  EXPECT_LE(w5, w0 / std::exp(2.0));
  // The exact law of the discrete chain agrees with the Monte Carlo curve.
  const auto map = step_affine_map(SamplerKind::hfhr_strang, Matrix::Identity(1, 1), 1.0, 2.0, 0.1);
  GaussianSummary law{Vector::Zero(2), Matrix::Zero(2, 2)};
  law.mean(0) = 1.0;
  for (const auto& r : s.rows) {
    if (r.step > 0)
      for (int k = 0; k < 10; ++k) law = map.apply(law);
    const double exact = w2_gaussian(law.head(1), GaussianSummary::standard(1));
    EXPECT_NEAR(r.value, exact, 0.03) << "t=" << r.time;
  }
}

TEST(RunExperiment, DeterministicAcrossWorkers) {
  auto spec = parse_config(R"({"potential": {"name": "rosenbrock2d"},
      "sampler": [{"kind": "hfhr_strang", "step": 0.005}, {"kind": "ula", "step": 0.005}],
      "chains": 1000, "steps": 200, "record_every": 50, "seed": 11})");
  std::ostringstream one, eight;
  RunOptions o1{1}, o8{8};
  o8.block_size = 37;
  write_csv(run_experiment(spec, o1), one);
  write_csv(run_experiment(spec, o8), eight);
  EXPECT_EQ(one.str(), eight.str());
  std::ostringstream again;
  write_csv(run_experiment(spec, o1), again);
  EXPECT_EQ(one.str(), again.str());
}

TEST(RunExperiment, GradientAccounting) {
  auto spec = parse_config(R"({"potential": {"name": "quartic"},
      "sampler": [{"kind": "hfhr_strang", "step": 0.05}, {"kind": "uld_klmc", "step": 0.05},
                  {"kind": "ula", "step": 0.05}, {"kind": "hfhr_em", "step": 0.01}],
      "chains": 300, "steps": 40, "record_every": 40, "metric": "mean_error"})");
  const auto s = run_experiment(spec, RunOptions{3, "", 64});
  for (const auto& c : s.configs) {
    ASSERT_FALSE(c.diverged) << c.config_id;
    EXPECT_EQ(c.gradient_evaluations, 300u * 40u) << c.config_id;
  }
}

TEST(RunExperiment, DivergenceIsFlaggedNotFatal) {
  auto spec = parse_config(R"({"potential": {"name": "quadratic_iso", "params": {"d": 1}},
      "sampler": [{"kind": "hfhr_em", "alpha": 1, "gamma": 2, "step": 3, "label": "bad"},
                  {"kind": "hfhr_strang", "step": 0.1, "label": "good"}],
      "chains": 50, "steps": 2000, "record_every": 100})");
  const auto s = run_experiment(spec);
  ASSERT_EQ(s.configs.size(), 2u);
  EXPECT_TRUE(s.configs[0].diverged);
  EXPECT_FALSE(s.configs[1].diverged);
  EXPECT_FALSE(s.all_diverged());
  double last = -1.0;
  for (const auto& r : s.rows)
    if (r.config_id == "bad") {
      EXPECT_GT(r.time, last);
      last = r.time;
      if (!r.flag.empty()) EXPECT_EQ(r.flag, "diverged");
      else EXPECT_TRUE(std::isfinite(r.value));
    }
  EXPECT_EQ(s.rows.back().config_id, "good");
}

TEST(RunExperiment, ChiSquareOnRosenbrockMarginal) {
  auto spec = parse_config(R"({"potential": {"name": "rosenbrock2d"},
      "sampler": [{"kind": "uld_klmc", "gamma": 2, "step": 0.005}],
      "chains": 4000, "horizon": 40, "record_every": 2000, "seed": 2,
      "init": {"q": 0, "q_std": 1, "p_std": 1}})");
  const auto s = run_experiment(spec, RunOptions{2});
  ASSERT_FALSE(s.configs[0].diverged);
  EXPECT_EQ(s.rows.back().metric, "chi2_hist");
  EXPECT_LT(s.rows.back().value, s.rows.front().value);
  // Sampling floor is about (bins - 1) / chains = 0.012; the banana mixes slowly.
  EXPECT_LT(s.rows.back().value, 0.05);
}

TEST(RunExperiment, BenchmarkReferenceIsCached) {
  const fs::path dir = scratch("cache");
  auto spec = parse_config(R"({"potential": {"name": "coupled_logcosh", "params": {"d": 2, "shift": 1}},
      "sampler": [{"step": 0.1}], "chains": 200, "steps": 20, "record_every": 20, "metric": "mean_error",
      "reference": {"kind": "benchmark_run", "sampler": "uld_klmc", "step": 0.01, "steps": 500, "chains": 100}})");
  RunOptions o;
  o.cache_dir = dir.string();
  std::ostringstream a, b;
  write_csv(run_experiment(spec, o), a);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".json";
  EXPECT_EQ(files, 1u);
  write_csv(run_experiment(spec, o), b);
  EXPECT_EQ(a.str(), b.str());
}

namespace {

// Lag-0 correlation of the q-trajectories of chains i and j over n steps.
std::vector<double> pair_correlations(const SamplerConfig& c, int chains, int n) {
  const auto f1 = builtin_potential("quadratic_iso", {{"d", 1}});
  Ensemble ens(f1, c, chains, 123, InitSpec{}, false, RunOptions{});
  std::vector<std::vector<double>> tr(static_cast<std::size_t>(chains));
  for (int k = 0; k < n; ++k) {
    ens.advance(k, 1);
    for (int i = 0; i < chains; ++i) tr[i].push_back(ens.states()[i].q[0]);
  }
  const auto corr = [n](const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int k = 0; k < n; ++k) {
      sab += (a[k] - ma) * (b[k] - mb);
      saa += (a[k] - ma) * (a[k] - ma);
      sbb += (b[k] - mb) * (b[k] - mb);
    }
    return sab / std::sqrt(saa * sbb);
  };
  std::vector<double> out;
  for (int i = 0; i + 1 < chains; i += 2) out.push_back(corr(tr[i], tr[i + 1]));
  return out;
}

}  // namespace

TEST(Ensemble, CrossChainCorrelation) {
  // ULA with h = 1 on f1 draws a fresh N(0, 2) every step, so the sample
  // correlation of independent streams has standard deviation 1/sqrt(n).
  const SamplerConfig c{0.0, 1.0, 1.0, SamplerKind::ula};
  const auto r = pair_correlations(c, 2, 10000);
  EXPECT_LT(std::abs(r[0]), 0.01);
}

TEST(Ensemble, CrossChainCorrelationIsNoise) {
  // 100 disjoint pairs: mean correlation ~ N(0, 0.01^2/100), sum of squares ~ chi2_100 / n.
  const int n = 10000;
  const auto r = pair_correlations(SamplerConfig{0.0, 1.0, 1.0, SamplerKind::ula}, 200, n);
  double mean = 0.0, ss = 0.0;
  for (double v : r) {
    mean += v / r.size();
    ss += v * v * n;
  }
  EXPECT_LT(std::abs(mean), 4.0 * 0.01 / 10.0);
  EXPECT_GT(ss, 59.2);   // 0.1% and 99.9% points of chi2 with 100 dof
  EXPECT_LT(ss, 149.4);
  // Correlated kernels (HFHR) show the same lack of cross-correlation on average.
  const auto h = pair_correlations(SamplerConfig{1.0, 2.0, 0.5, SamplerKind::hfhr_strang}, 200, n);
  EXPECT_LT(std::abs(std::accumulate(h.begin(), h.end(), 0.0) / h.size()), 0.02);
}

TEST(Sweep, LargeThresholdNeedsNoIterations) {
  SweepSpec s;
  s.potential = {"quadratic_iso", {{"d", 1}}};
  s.alphas = {0.0, 1.0};
  s.gammas = {2.0};
  s.steps = {0.1};
  s.eps = 10.0;
  s.chains = 10;
  const auto rows = sweep_iteration_complexity(s);
  for (const auto& r : rows) EXPECT_EQ(r.mean_iterations, 0.0);
}

TEST(Sweep, FirstHitAndDivergence) {
  SweepSpec s;
  s.potential = {"quadratic_iso", {{"d", 1}}};
  s.alphas = {0.0};
  s.gammas = {2.0};
  s.steps = {0.5};
  s.eps = 0.1;
  s.chains = 1;
  s.init = InitSpec{1.0, 0.0, 0.0, 0.0};
  const auto rows = sweep_iteration_complexity(s);
  EXPECT_GE(rows[0].mean_iterations, 1.0);
  EXPECT_TRUE(std::isfinite(rows[0].mean_iterations));

  s.steps = {50.0};
  s.alphas = {1.0};
  const auto bad = sweep_iteration_complexity(s);
  EXPECT_TRUE(std::isinf(bad[0].mean_iterations));
  EXPECT_TRUE(std::isnan(bad[0].best_step));
}

TEST(Sweep, AlphaZeroColumnIsUnderdampedBaseline) {
  SweepSpec s;
  s.potential = {"quadratic_iso", {{"d", 1}}};
  s.alphas = {0.0};
  s.gammas = {1.0, 2.0};
  s.steps = {0.5, 0.1};
  s.chains = 200;
  s.seeds = {0, 1};
  const auto rows = sweep_iteration_complexity(s);
  // Recompute the alpha = 0 cell minimum by brute force.
  const auto f1 = builtin_potential("quadratic_iso", {{"d", 1}});
  double mean = 0.0;
  for (std::uint64_t seed : s.seeds) {
    double best = std::numeric_limits<double>::infinity();
    for (double g : s.gammas)
      for (double h : s.steps)
        best = std::min(best, iterations_to_threshold(f1, SamplerConfig{0.0, g, h, SamplerKind::hfhr_strang}, s,
                                                      Vector::Zero(1), seed, 1e9, RunOptions{}));
    mean += best / 2.0;
  }
  EXPECT_EQ(rows[0].mean_iterations, mean);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  const fs::path log = dir / "log.txt";
  EXPECT_EQ(run_cli("theory --L 1 --m 1 --alpha 0 --gamma 2", log), 0);
  EXPECT_NE(slurp(log).find("3.16227766"), std::string::npos) << slurp(log);
  EXPECT_EQ(run_cli("spectral", log), 0);
  EXPECT_EQ(run_cli("sample --potential nope --steps 3", log), 2);
  EXPECT_EQ(run_cli("--bogus-flag", log), 2);
  {
    std::ofstream(dir / "bad.json") << R"({"potential": {"name": "quadratic_iso"}, "sampler": [{"step": -1}], "steps": 3})";
  }
  EXPECT_EQ(run_cli("experiment \"" + (dir / "bad.json").string() + "\" --out-dir \"" + dir.string() + "\"", log), 2);
  EXPECT_NE(slurp(log).find("sampler[0].step must be > 0"), std::string::npos);
  {
    std::ofstream(dir / "diverge.json")
        << R"({"potential": {"name": "quadratic_iso"}, "sampler": [{"kind": "hfhr_em", "step": 5}], "chains": 4, "steps": 3000})";
  }
  EXPECT_EQ(run_cli("experiment \"" + (dir / "diverge.json").string() + "\" --out-dir \"" + dir.string() + "\"", log), 3);
}

TEST(Cli, ExperimentWritesOutputs) {
  const fs::path dir = scratch("cli_out");
  const fs::path log = dir / "log.txt";
  {
    std::ofstream(dir / "tiny.json") << R"({"potential": {"name": "quadratic_iso", "params": {"d": 2}},
      "sampler": [{"step": 0.1}, {"kind": "uld_klmc", "step": 0.1}], "chains": 500, "steps": 50, "record_every": 10})";
  }
  const std::string cfg = (dir / "tiny.json").string();
  ASSERT_EQ(run_cli("experiment \"" + cfg + "\" --out-dir \"" + dir.string() + "\" --format both --workers 2", log), 0)
      << slurp(log);
  ASSERT_TRUE(fs::exists(dir / "tiny.csv"));
  ASSERT_TRUE(fs::exists(dir / "tiny.svg"));
  const std::string first = slurp(dir / "tiny.csv");
  EXPECT_EQ(first.rfind(kCsvHeader, 0), 0u);
  ASSERT_EQ(run_cli("experiment \"" + cfg + "\" --out-dir \"" + dir.string() + "\" --workers 1", log), 0);
  EXPECT_EQ(slurp(dir / "tiny.csv"), first);
  ASSERT_EQ(run_cli("experiment \"" + cfg + "\" --out-dir \"" + dir.string() + "\" --seed 99", log), 0);
  EXPECT_NE(slurp(dir / "tiny.csv"), first);
}

TEST(Cli, SampleStreamsStates) {
  const fs::path dir = scratch("cli_sample");
  const fs::path log = dir / "out.txt";
  ASSERT_EQ(run_cli("sample --potential rosenbrock2d --kind uld_klmc --step 0.01 --steps 20 --every 5 --seed 4", log), 0);
  std::istringstream in(slurp(log));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "step,time,q0,q1,p0,p1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 5);
}
