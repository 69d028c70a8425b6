#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "artde/linalg.hpp"
#include "artde/sim.hpp"

namespace artde {

struct ChannelStat {
  std::string channel;
  bool angular = false;
  double rms_error = 0.0;
  double max_abs_error = 0.0;
  double rms_control = 0.0;
};

struct ChannelStats {
  std::vector<ChannelStat> channels;
  std::optional<double> diverged_at;
  std::size_t samples = 0;
};

/// Half-open time window [t0, t1).
struct Window {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
};

inline double rms(const std::vector<double>& xs) {
  if (xs.empty()) detail::fail("rms of an empty sample set");
  double acc = 0.0;
  for (double x : xs) acc += x * x;
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

inline double max_abs(const std::vector<double>& xs) {
  if (xs.empty()) detail::fail("max_abs of an empty sample set");
  double m = 0.0;
  for (double x : xs) m = std::max(m, std::abs(x));
  return m;
}

/// Per-channel RMS error, max |error| and RMS control over the window (SI units).
inline ChannelStats channel_stats(const ScenarioTrace& trace, std::optional<Window> window = std::nullopt) {
  if (trace.rows.empty()) detail::fail("channel_stats: trace '", trace.scenario, "' is empty");
  const Window w = window.value_or(Window{});
  if (!(w.t1 > w.t0)) detail::fail("channel_stats: window [", w.t0, ", ", w.t1, ") is empty");
  const double first = trace.rows.front().t;
  const double last = trace.rows.back().t;
  if (w.t0 > last || w.t1 <= first)
    detail::fail("channel_stats: window [", w.t0, ", ", w.t1, ") lies outside the trace span [", first, ", ",
                 last, "]");

  const std::size_t n = trace.coords.size();
  std::vector<std::vector<double>> err(n), ctl(n);
  for (const TraceRow& r : trace.rows) {
    if (r.t < w.t0 || r.t >= w.t1) continue;
    for (std::size_t i = 0; i < n; ++i) {
      err[i].push_back(r.e(static_cast<Eigen::Index>(i)));
      ctl[i].push_back(r.tau(static_cast<Eigen::Index>(i)));
    }
  }
  if (err.empty() || err[0].empty())
    detail::fail("channel_stats: window [", w.t0, ", ", w.t1, ") contains no samples");

  ChannelStats out;
  out.diverged_at = trace.diverged_at;
  out.samples = err[0].size();
  for (std::size_t i = 0; i < n; ++i)
    out.channels.push_back({trace.coords[i], trace.angular[i], rms(err[i]), max_abs(err[i]), rms(ctl[i])});
  return out;
}

/// 100 (baseline - proposed) / baseline; undefined for a zero baseline.
inline std::optional<double> improvement_percent(double baseline, double proposed) {
  if (baseline == 0.0 || !std::isfinite(baseline) || !std::isfinite(proposed)) return std::nullopt;
  return 100.0 * (baseline - proposed) / baseline;
}

struct Improvement {
  std::string channel;
  std::optional<double> rms_error;
  std::optional<double> max_abs_error;
  std::optional<double> rms_control;
};

inline std::vector<Improvement> improvement_table(const ChannelStats& baseline, const ChannelStats& proposed) {
  if (baseline.channels.size() != proposed.channels.size())
    detail::fail("improvement_table: channel counts differ (", baseline.channels.size(), " vs ",
                 proposed.channels.size(), ")");
  std::vector<Improvement> out;
  for (std::size_t i = 0; i < baseline.channels.size(); ++i) {
    const auto& b = baseline.channels[i];
    const auto& p = proposed.channels[i];
    if (b.channel != p.channel)
      detail::fail("improvement_table: channel mismatch '", b.channel, "' vs '", p.channel, "'");
    out.push_back({b.channel, improvement_percent(b.rms_error, p.rms_error),
                   improvement_percent(b.max_abs_error, p.max_abs_error),
                   improvement_percent(b.rms_control, p.rms_control)});
  }
  return out;
}

/// Percentage text truncated (not rounded) to `decimals`, e.g. 77.78 -> "77.7%".
inline std::string format_percent(std::optional<double> pct, int decimals = 1) {
  if (!pct) return "undefined";
  const double scale = std::pow(10.0, decimals);
  // Nudge by a few ulps so values like 0.2 * 100 that land just under an
  // exact decimal are not truncated one step low.
  const double scaled = *pct * scale;
  const double nudged = scaled + std::copysign(4.0 * std::numeric_limits<double>::epsilon() * std::abs(scaled), scaled);
  const double truncated = std::trunc(nudged) / scale;
  std::ostringstream oss;
  oss << std::fixed << std::setprecision(decimals) << (truncated == 0.0 ? 0.0 : truncated) << '%';
  return oss.str();
}

/// A printed improvement figure checked against the formula.
struct ReferenceFigure {
  std::string label;
  double baseline;
  double proposed;
  double printed;  // percent
};

/// RMS joint errors (degrees) of the reference walking comparison, with the
/// printed improvement figures.
inline std::vector<ReferenceFigure> reference_s1_rms_figures() {
  return {
      {"q1 over TDC", 0.108, 0.024, 77.7},  {"q1 over ATDE", 0.035, 0.024, 31.4},
      {"q2 over TDC", 0.653, 0.436, 29.1},  {"q2 over ATDE", 0.551, 0.436, 20.8},
      {"q3 over TDC", 2.231, 1.455, 34.7},  {"q3 over ATDE", 1.847, 1.455, 21.2},
      {"q4 over TDC", 3.264, 2.072, 36.5},  {"q4 over ATDE", 2.671, 2.072, 22.4},
      {"q5 over TDC", 3.254, 2.190, 32.6},  {"q5 over ATDE", 2.741, 2.190, 20.6},
      {"q6 over TDC", 1.147, 0.741, 35.3},  {"q6 over ATDE", 1.023, 0.741, 27.5},
  };
}

/// Footnotes for printed figures that disagree with the formula.
inline std::vector<std::string> reference_discrepancies(const std::vector<ReferenceFigure>& figures) {
  std::vector<std::string> notes;
  for (const auto& f : figures) {
    const std::string computed = format_percent(improvement_percent(f.baseline, f.proposed));
    std::ostringstream printed;
    printed << std::fixed << std::setprecision(1) << f.printed << '%';
    if (computed != printed.str()) {
      std::ostringstream note;
      note << f.label << ": " << f.baseline << " -> " << f.proposed << " gives " << computed
           << " by formula; printed " << printed.str();
      notes.push_back(note.str());
    }
  }
  return notes;
}

struct VariantResult {
  std::string scenario;
  Variant variant = Variant::ARTDE;
  ChannelStats stats;
};

enum class ReportFormat { Csv, Table };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "table") return ReportFormat::Table;
  detail::fail("unknown report format '", s, "' (expected csv or table)");
}

namespace detail {

constexpr double rad_to_deg = 180.0 / M_PI;

inline double error_in_report_units(const ChannelStat& c, double v) { return c.angular ? v * rad_to_deg : v; }

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream oss;
  oss << std::setprecision(precision) << v;
  return oss.str();
}

inline std::string divergence_marker(double t) {
  std::ostringstream oss;
  oss << "DIVERGED@" << std::fixed << std::setprecision(3) << t;
  return oss.str();
}

inline const VariantResult* find_result(const std::vector<VariantResult>& rs, const std::string& scenario,
                                        Variant v) {
  for (const auto& r : rs)
    if (r.scenario == scenario && r.variant == v) return &r;
  return nullptr;
}

}  // namespace detail

/// Comparison report sorted by scenario then variant. Errors are in degrees
/// for angles and meters for translations; control in N m or N. Improvement
/// columns appear for each baseline variant present in the results.
inline void emit_report(std::ostream& os, std::vector<VariantResult> results, ReportFormat format,
                        const std::vector<Variant>& baselines = {}, const std::vector<std::string>& notes = {}) {
  if (results.empty()) detail::fail("emit_report: no results");
  std::stable_sort(results.begin(), results.end(), [](const VariantResult& a, const VariantResult& b) {
    return a.scenario != b.scenario ? a.scenario < b.scenario : static_cast<int>(a.variant) < static_cast<int>(b.variant);
  });

  std::vector<Variant> active;
  for (Variant b : baselines) {
    const bool present = std::any_of(results.begin(), results.end(), [&](const auto& r) { return r.variant == b; });
    if (present && std::find(active.begin(), active.end(), b) == active.end()) active.push_back(b);
  }

  std::vector<std::string> header = {"scenario", "variant", "channel", "rms_error", "max_abs_error", "rms_control"};
  for (Variant b : active)
    for (const char* stat : {"rms_error", "max_abs_error", "rms_control"})
      header.push_back("impr_" + std::string(stat) + "_vs_" + to_string(b));

  std::vector<std::vector<std::string>> rows;
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.stats.channels.size(); ++i) {
      const ChannelStat& c = r.stats.channels[i];
      std::vector<std::string> row = {r.scenario, to_string(r.variant), c.channel};
      if (r.stats.diverged_at) {
        const std::string mark = detail::divergence_marker(*r.stats.diverged_at);
        row.insert(row.end(), {mark, mark, mark});
      } else {
        row.push_back(detail::fmt(detail::error_in_report_units(c, c.rms_error)));
        row.push_back(detail::fmt(detail::error_in_report_units(c, c.max_abs_error)));
        row.push_back(detail::fmt(c.rms_control));
      }
      for (Variant b : active) {
        const VariantResult* base = detail::find_result(results, r.scenario, b);
        if (!base || base->stats.diverged_at || r.stats.diverged_at || base->stats.channels.size() <= i) {
          row.insert(row.end(), {"n/a", "n/a", "n/a"});
          continue;
        }
        const ChannelStat& bc = base->stats.channels[i];
        row.push_back(format_percent(improvement_percent(bc.rms_error, c.rms_error)));
        row.push_back(format_percent(improvement_percent(bc.max_abs_error, c.max_abs_error)));
        row.push_back(format_percent(improvement_percent(bc.rms_control, c.rms_control)));
      }
      rows.push_back(std::move(row));
    }
  }

  if (format == ReportFormat::Csv) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return;
  }

  std::vector<std::size_t> width(header.size(), 0);
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os << "  ";
      if (i < 3)
        os << std::left << std::setw(static_cast<int>(width[i])) << cells[i];
      else
        os << std::right << std::setw(static_cast<int>(width[i])) << cells[i];
    }
    os << std::left << '\n';
  };
  line(header);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  os << std::string(total > 2 ? total - 2 : 0, '-') << '\n';
  for (const auto& r : rows) line(r);
  os << "\nUnits: angle errors in degrees, position errors in meters, control in N m (joints, attitude) or N "
        "(position). Improvements are truncated to one decimal.\n";
  if (!notes.empty()) {
    os << "\nNotes:\n";
    for (std::size_t i = 0; i < notes.size(); ++i) os << "  [" << i + 1 << "] " << notes[i] << '\n';
  }
}

/// Affine majorant y <= b0 + b1 x with b0, b1 >= 0.
struct AffineBound {
  double b0 = 0.0;
  double b1 = 0.0;
  double operator()(double x) const { return b0 + b1 * x; }
};

/// Tightest affine majorant in the sense of the smallest mean bound over the
/// samples. Candidates are the nonnegative-slope edges of the upper convex hull
/// plus the flat and through-origin bounds.
inline AffineBound fit_affine_majorant(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) detail::fail("fit_affine_majorant: need equal, nonempty samples");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(x.size());
  double mean_x = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i]) || x[i] < 0.0)
      detail::fail("fit_affine_majorant: samples must be finite with x >= 0");
    pts.emplace_back(x[i], y[i]);
    mean_x += x[i];
  }
  mean_x /= static_cast<double>(x.size());
  std::sort(pts.begin(), pts.end());

  std::vector<std::pair<double, double>> hull;
  for (const auto& p : pts) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
      if (cross >= 0.0)
        hull.pop_back();
      else
        break;
    }
    hull.push_back(p);
  }

  auto feasible_shift = [&](AffineBound b) {
    double worst = 0.0;
    for (const auto& p : pts) worst = std::max(worst, p.second - b(p.first));
    b.b0 += worst;
    return b;
  };

  double y_max = 0.0;
  for (const auto& p : pts) y_max = std::max(y_max, p.second);
  std::vector<AffineBound> candidates = {{y_max, 0.0}};
  double slope_origin = 0.0;
  bool origin_ok = true;
  for (const auto& p : pts) {
    if (p.first == 0.0) {
      if (p.second > 0.0) origin_ok = false;
      continue;
    }
    slope_origin = std::max(slope_origin, p.second / p.first);
  }
  if (origin_ok) candidates.push_back({0.0, slope_origin});
  for (std::size_t i = 0; i + 1 < hull.size(); ++i) {
    const double dx = hull[i + 1].first - hull[i].first;
    if (dx <= 0.0) continue;
    const double slope = (hull[i + 1].second - hull[i].second) / dx;
    if (slope < 0.0) continue;
    const double b0 = hull[i].second - slope * hull[i].first;
    if (b0 < 0.0) continue;
    candidates.push_back({b0, slope});
  }

  AffineBound best{std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& c : candidates) {
    const AffineBound f = feasible_shift(c);
    if (f.b0 + f.b1 * mean_x < best.b0 + best.b1 * mean_x) best = f;
  }
  best.b0 = std::max(best.b0, 0.0);
  // Cover rounding in the comparison b0 + b1 x >= y.
  best.b0 += 1e-12 * (1.0 + best.b0);
  return best;
}

}  // namespace artde
