#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

namespace hfhr {

struct ResultRow {
  std::string config_id;
  std::int64_t step = 0;
  double time = 0.0;
  std::string metric;
  double value = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();  // NaN = not applicable
  std::string flag;                                             // "" or "diverged"
};

struct ConfigOutcome {
  std::string config_id;
  std::uint64_t gradient_evaluations = 0;
  bool diverged = false;
  std::int64_t divergence_step = -1;
};

struct ResultSeries {
  std::vector<ResultRow> rows;
  std::vector<ConfigOutcome> configs;

  bool all_diverged() const {
    if (configs.empty()) return false;
    return std::all_of(configs.begin(), configs.end(), [](const ConfigOutcome& c) { return c.diverged; });
  }
};

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline const char* kCsvHeader = "config_id,step,time,metric,value,stderr,flag";

inline void write_csv(const ResultSeries& series, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : series.rows) {
    if (r.config_id.find_first_of(",\n\"") != std::string::npos)
      throw std::invalid_argument("config id '" + r.config_id + "' contains a CSV delimiter");
    out << r.config_id << ',' << r.step << ',' << format_double(r.time) << ',' << r.metric << ','
        << format_double(r.value) << ',' << (std::isnan(r.std_error) ? "" : format_double(r.std_error))
        << ',' << r.flag << '\n';
  }
}

inline void write_csv(const ResultSeries& series, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(series, out);
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline ResultSeries read_csv(std::istream& in) {
  ResultSeries series;
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::invalid_argument("CSV: missing or wrong header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 7) throw std::invalid_argument("CSV: expected 7 fields in '" + line + "'");
    ResultRow r;
    r.config_id = f[0];
    r.step = std::stoll(f[1]);
    r.time = parse_double(f[2]);
    r.metric = f[3];
    r.value = parse_double(f[4]);
    r.std_error = parse_double(f[5]);
    r.flag = f[6];
    series.rows.push_back(std::move(r));
  }
  return series;
}

inline ResultSeries read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  return read_csv(in);
}

enum class PlotStyle { linear, semilog_y, log_log };

inline PlotStyle parse_plot_style(const std::string& s) {
  if (s == "linear") return PlotStyle::linear;
  if (s == "semilog-y" || s == "semilog_y") return PlotStyle::semilog_y;
  if (s == "log-log" || s == "log_log") return PlotStyle::log_log;
  throw std::invalid_argument("unknown plot style '" + s + "' (linear, semilog-y, log-log)");
}

namespace detail {

struct Axis {
  bool log = false;
  double lo = 0.0, hi = 1.0;  // in transformed units
  double map(double v) const { return log ? std::log10(v) : v; }
  std::vector<std::pair<double, std::string>> ticks() const {
    std::vector<std::pair<double, std::string>> t;
    if (log) {
      for (double e = std::ceil(lo - 1e-9); e <= hi + 1e-9; e += 1.0) {
        std::ostringstream s;
        s << "1e" << static_cast<int>(e);
        t.emplace_back(e, s.str());
      }
      return t;
    }
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (raw <= m * mag) { step = m * mag; break; }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) {
      std::ostringstream s;
      s << (std::abs(v) < 1e-12 * span ? 0.0 : v);
      t.emplace_back(v, s.str());
    }
    return t;
  }
};

inline std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '&': o += "&amp;"; break;
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

}  // namespace detail

/// Static SVG with one polyline per config id (x = time, y = value).
inline void write_svg_plot(const ResultSeries& series, PlotStyle style, std::ostream& out,
                           const std::string& title = "") {
  const bool logx = style == PlotStyle::log_log;
  const bool logy = style != PlotStyle::linear;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<double, double>>> lines;
  for (const auto& r : series.rows) {
    if (!std::isfinite(r.value) || !std::isfinite(r.time)) continue;
    if (logy && r.value <= 0.0)
      throw std::invalid_argument("write_svg_plot: nonpositive value " + format_double(r.value) +
                                  " under log scaling (config " + r.config_id + ")");
    if (logx && r.time <= 0.0) continue;  // t = 0 has no place on a log axis
    if (!lines.count(r.config_id)) order.push_back(r.config_id);
    lines[r.config_id].emplace_back(r.time, r.value);
  }
  detail::Axis ax{logx}, ay{logy};
  bool first = true;
  for (const auto& [id, pts] : lines)
    for (const auto& [x, y] : pts) {
      const double mx = ax.map(x), my = ay.map(y);
      if (first) { ax.lo = ax.hi = mx; ay.lo = ay.hi = my; first = false; }
      ax.lo = std::min(ax.lo, mx); ax.hi = std::max(ax.hi, mx);
      ay.lo = std::min(ay.lo, my); ay.hi = std::max(ay.hi, my);
    }
  if (first) { ax.lo = ay.lo = 0.0; ax.hi = ay.hi = 1.0; }
  if (logx) { ax.lo = std::floor(ax.lo); ax.hi = std::max(std::ceil(ax.hi), ax.lo + 1.0); }
  if (logy) { ay.lo = std::floor(ay.lo); ay.hi = std::max(std::ceil(ay.hi), ay.lo + 1.0); }
  if (ax.hi <= ax.lo) ax.hi = ax.lo + 1.0;
  if (ay.hi <= ay.lo) ay.hi = ay.lo + 1.0;

  const double W = 800, H = 500, left = 80, right = 200, top = 40, bottom = 60;
  const double pw = W - left - right, ph = H - top - bottom;
  // under log-log both axes get the same pixels per decade so slope 1 is 45 degrees
  double sx = pw / (ax.hi - ax.lo), sy = ph / (ay.hi - ay.lo);
  if (logx && logy) sx = sy = std::min(sx, sy);
  const auto X = [&](double v) { return left + (ax.map(v) - ax.lo) * sx; };
  const auto Y = [&](double v) { return top + ph - (ay.map(v) - ay.lo) * sy; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    out << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">"
        << detail::xml_escape(title) << "</text>\n";
  const double x_end = left + (ax.hi - ax.lo) * sx, y_end = top + ph - (ay.hi - ay.lo) * sy;
  out << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\""
      << x_end << "\" y2=\"" << top + ph << "\"/><line x1=\"" << left << "\" y1=\"" << top + ph
      << "\" x2=\"" << left << "\" y2=\"" << y_end << "\"/></g>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"11\">\n";
  for (const auto& [v, label] : ax.ticks()) {
    const double px = left + (v - ax.lo) * sx;
    out << "<line x1=\"" << px << "\" y1=\"" << top + ph << "\" x2=\"" << px << "\" y2=\"" << top + ph + 5
        << "\" stroke=\"black\"/><text class=\"xtick\" x=\"" << px << "\" y=\"" << top + ph + 18
        << "\" text-anchor=\"middle\">" << label << "</text>\n";
  }
  for (const auto& [v, label] : ay.ticks()) {
    const double py = top + ph - (v - ay.lo) * sy;
    out << "<line x1=\"" << left - 5 << "\" y1=\"" << py << "\" x2=\"" << left << "\" y2=\"" << py
        << "\" stroke=\"black\"/><text class=\"ytick\" x=\"" << left - 8 << "\" y=\"" << py + 4
        << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">time</text>\n";
  out << "</g>\n";
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& pts = lines[order[i]];
    const char* color = palette[i % 10];
    out << "<polyline class=\"series\" data-config=\"" << detail::xml_escape(order[i]) << "\" fill=\"none\" stroke=\""
        << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k)
      out << (k ? " " : "") << X(pts[k].first) << ',' << Y(pts[k].second);
    out << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    out << "<line x1=\"" << W - right + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 35 << "\" y2=\""
        << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/><text class=\"legend\" x=\""
        << W - right + 40 << "\" y=\"" << ly + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << detail::xml_escape(order[i]) << "</text>\n";
  }
  out << "</svg>\n";
}

inline void write_svg_plot(const ResultSeries& series, PlotStyle style, const std::string& path,
                           const std::string& title = "") {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_svg_plot(series, style, out, title);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace hfhr
