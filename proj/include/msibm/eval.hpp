#pragma once

// Middlebury-style disparity metrics and their text/JSON serializations.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "msibm/image.hpp"
#include "msibm/matcher.hpp"

namespace msibm {

inline constexpr double kBadThresholds[3] = {1.0, 2.0, 4.0};

struct TraceSummary {
  std::uint64_t total_evals = 0;
  std::vector<double> trusted_fraction;  // per level, coarsest first
};

struct EvalReport {
  double bad_1 = 0.0;  // percent of evaluated pixels with |err| > 1
  double bad_2 = 0.0;
  double bad_4 = 0.0;
  double avg_abs_err = 0.0;
  std::uint64_t evaluated_pixel_count = 0;
  std::uint64_t gt_invalid_count = 0;
  std::uint64_t invalid_output_count = 0;  // output Invalid where GT is valid
  TraceSummary trace;
};

inline TraceSummary summarize(const PipelineTrace& trace) {
  TraceSummary s;
  s.total_evals = trace.total_evals();
  for (const auto& level : trace.levels) s.trusted_fraction.push_back(level.trusted_fraction());
  return s;
}

/// Compares d * scale against gt on pixels valid in both.
inline EvalReport evaluate(const DisparityMap& d, const GroundTruthDisparity& gt,
                           double scale = 1.0) {
  if (d.width() != gt.width() || d.height() != gt.height()) {
    throw std::invalid_argument("evaluate: disparity " + std::to_string(d.width()) + "x" +
                                std::to_string(d.height()) + " vs ground truth " +
                                std::to_string(gt.width()) + "x" +
                                std::to_string(gt.height()));
  }
  if (!(scale > 0.0)) throw std::invalid_argument("evaluate: scale must be positive");
  EvalReport report;
  std::uint64_t bad[3] = {0, 0, 0};
  // Exact per-row sums keep the mean independent of evaluation order.
  long double abs_sum = 0.0L;
  for (int r = 0; r < d.height(); ++r) {
    long double row_sum = 0.0L;
    for (int c = 0; c < d.width(); ++c) {
      if (!gt.is_valid(r, c)) {
        ++report.gt_invalid_count;
        continue;
      }
      if (is_invalid(d(r, c))) {
        ++report.invalid_output_count;
        continue;
      }
      const double err = std::abs(static_cast<double>(d(r, c)) * scale - gt.values(r, c));
      ++report.evaluated_pixel_count;
      row_sum += err;
      for (int t = 0; t < 3; ++t) bad[t] += err > kBadThresholds[t] ? 1 : 0;
    }
    abs_sum += row_sum;
  }
  if (report.evaluated_pixel_count > 0) {
    const double n = static_cast<double>(report.evaluated_pixel_count);
    report.bad_1 = 100.0 * bad[0] / n;
    report.bad_2 = 100.0 * bad[1] / n;
    report.bad_4 = 100.0 * bad[2] / n;
    report.avg_abs_err = static_cast<double>(abs_sum / report.evaluated_pixel_count);
  }
  return report;
}

struct ComparisonSummary {
  double delta_bad_1 = 0.0;  // msibm - baseline
  double delta_bad_2 = 0.0;
  double delta_bad_4 = 0.0;
  double delta_avg_abs_err = 0.0;
  double eval_ratio = 0.0;  // msibm evals / baseline evals
};

inline ComparisonSummary compare(const EvalReport& msibm, const EvalReport& baseline) {
  ComparisonSummary s;
  s.delta_bad_1 = msibm.bad_1 - baseline.bad_1;
  s.delta_bad_2 = msibm.bad_2 - baseline.bad_2;
  s.delta_bad_4 = msibm.bad_4 - baseline.bad_4;
  s.delta_avg_abs_err = msibm.avg_abs_err - baseline.avg_abs_err;
  s.eval_ratio = baseline.trace.total_evals == 0
                     ? 0.0
                     : static_cast<double>(msibm.trace.total_evals) /
                           static_cast<double>(baseline.trace.total_evals);
  return s;
}

// ---------------------------------------------------------------------------
// Serialization

namespace detail {
inline std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}
}  // namespace detail

inline std::string to_text(const EvalReport& r) {
  std::ostringstream os;
  os << "bad_1.0=" << detail::fixed(r.bad_1) << "\n"
     << "bad_2.0=" << detail::fixed(r.bad_2) << "\n"
     << "bad_4.0=" << detail::fixed(r.bad_4) << "\n"
     << "avg_abs_err=" << detail::fixed(r.avg_abs_err) << "\n"
     << "evaluated_pixel_count=" << r.evaluated_pixel_count << "\n"
     << "gt_invalid_count=" << r.gt_invalid_count << "\n"
     << "invalid_output_count=" << r.invalid_output_count << "\n"
     << "total_evals=" << r.trace.total_evals << "\n";
  for (std::size_t k = 0; k < r.trace.trusted_fraction.size(); ++k) {
    os << "trusted_fraction." << k << "=" << detail::fixed(r.trace.trusted_fraction[k]) << "\n";
  }
  return os.str();
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {
      {"metrics",
       {{"bad_1.0", r.bad_1},
        {"bad_2.0", r.bad_2},
        {"bad_4.0", r.bad_4},
        {"avg_abs_err", r.avg_abs_err},
        {"evaluated_pixel_count", r.evaluated_pixel_count},
        {"gt_invalid_count", r.gt_invalid_count},
        {"invalid_output_count", r.invalid_output_count}}},
      {"trace",
       {{"total_evals", r.trace.total_evals},
        {"trusted_fraction", r.trace.trusted_fraction}}},
  };
}

inline EvalReport eval_report_from_json(const nlohmann::json& j) {
  EvalReport r;
  const auto& m = j.at("metrics");
  r.bad_1 = m.at("bad_1.0").get<double>();
  r.bad_2 = m.at("bad_2.0").get<double>();
  r.bad_4 = m.at("bad_4.0").get<double>();
  r.avg_abs_err = m.at("avg_abs_err").get<double>();
  r.evaluated_pixel_count = m.at("evaluated_pixel_count").get<std::uint64_t>();
  r.gt_invalid_count = m.at("gt_invalid_count").get<std::uint64_t>();
  r.invalid_output_count = m.at("invalid_output_count").get<std::uint64_t>();
  const auto& t = j.at("trace");
  r.trace.total_evals = t.at("total_evals").get<std::uint64_t>();
  r.trace.trusted_fraction = t.at("trusted_fraction").get<std::vector<double>>();
  return r;
}

inline std::string to_text(const PipelineTrace& trace) {
  std::ostringstream os;
  os << "total_evals=" << trace.total_evals() << "\n";
  for (const auto& l : trace.levels) {
    const std::string p = "level." + std::to_string(l.level) + ".";
    os << p << "size=" << l.width << "x" << l.height << "\n"
       << p << "d_max=" << l.d_max << "\n"
       << p << "block=" << l.block << "\n"
       << p << "pixels=" << l.select.pixels << "\n"
       << p << "trusted=" << l.select.trusted << "\n"
       << p << "trusted_fraction=" << detail::fixed(l.trusted_fraction()) << "\n"
       << p << "window_evals=" << l.select.window_evals << "\n"
       << p << "max_window_evals=" << l.select.max_window_evals << "\n"
       << p << "full_search_evals=" << l.select.full_search_evals << "\n"
       << p << "refined_pixels=" << l.refine.refined_pixels << "\n"
       << p << "refine_evals=" << l.refine.evals << "\n"
       << p << "median_filtered=" << l.median_filtered << "\n"
       << p << "total_evals=" << l.total_evals << "\n";
  }
  return os.str();
}

inline nlohmann::json to_json(const PipelineTrace& trace) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : trace.levels) {
    levels.push_back({{"level", l.level},
                      {"width", l.width},
                      {"height", l.height},
                      {"d_max", l.d_max},
                      {"block", l.block},
                      {"pixels", l.select.pixels},
                      {"trusted", l.select.trusted},
                      {"trusted_fraction", l.trusted_fraction()},
                      {"window_evals", l.select.window_evals},
                      {"max_window_evals", l.select.max_window_evals},
                      {"full_search_evals", l.select.full_search_evals},
                      {"refined_pixels", l.refine.refined_pixels},
                      {"refine_support_pixels", l.refine.support_pixels},
                      {"refine_reused_pixels", l.refine.reused_pixels},
                      {"refine_evals", l.refine.evals},
                      {"median_filtered", l.median_filtered},
                      {"total_evals", l.total_evals}});
  }
  return {{"total_evals", trace.total_evals()}, {"levels", levels}};
}

}  // namespace msibm
