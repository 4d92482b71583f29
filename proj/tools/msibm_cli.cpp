// msibm: command-line frontend for hierarchical block matching.
//
//   msibm compute  LEFT RIGHT [--dmax N | --calib FILE] [--levels K|auto] ...
//   msibm baseline LEFT RIGHT [--dmax N | --calib FILE] [--block N] ...
//   msibm eval     DISPARITY.pfm GT.pfm [--scale F] [--out DIR]
//   msibm bench    DATASET_DIR [--out DIR] [--threads N|auto]
//
// Exit codes: 0 success, 2 configuration/usage, 3 decode, 4 I/O, 1 other.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msibm/msibm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int { kOk = 0, kOther = 1, kConfig = 2, kDecode = 3, kIo = 4 };

struct MatchFlags {
  std::optional<int> dmax;
  std::string calib;
  std::string levels = "auto";
  int block = 11;
  double alpha = 0.9;
  double beta = 0.9;
  std::string sign = "middlebury";
  std::string threads = "1";
  std::string out = "out";
};

int parse_threads(const std::string& s) {
  if (s == "auto") return 0;
  try {
    std::size_t used = 0;
    const int n = std::stoi(s, &used);
    if (used == s.size() && n >= 1) return n;
  } catch (const std::exception&) {
  }
  throw msibm::ConfigError("--threads expects a positive integer or 'auto', got '" + s + "'");
}

std::optional<int> parse_levels(const std::string& s) {
  if (s == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const int n = std::stoi(s, &used);
    if (used == s.size() && n >= 0) return n;
  } catch (const std::exception&) {
  }
  throw msibm::ConfigError("--levels expects a non-negative integer or 'auto', got '" + s + "'");
}

/// Calibration ndisp wins over --dmax. Without either, a calib.txt next to
/// the left image is used when present.
int resolve_dmax(const MatchFlags& flags, const std::string& left_path, std::string& calib_used) {
  std::string calib = flags.calib;
  if (calib.empty() && !flags.dmax) {
    const fs::path sibling = fs::path(left_path).parent_path() / "calib.txt";
    if (fs::exists(sibling)) calib = sibling.string();
  }
  if (!calib.empty()) {
    const msibm::CalibInfo info = msibm::read_calib(calib);
    if (flags.dmax && *flags.dmax != info.ndisp) {
      std::cerr << "warning: --dmax " << *flags.dmax << " overridden by ndisp=" << info.ndisp
                << " from " << calib << "\n";
    }
    calib_used = calib;
    return info.ndisp;
  }
  if (!flags.dmax) throw msibm::ConfigError("maximum disparity unknown: pass --dmax or --calib");
  return *flags.dmax;
}

msibm::MatchConfig make_config(const MatchFlags& flags, int d_max) {
  msibm::MatchConfig cfg;
  cfg.d_max = d_max;
  cfg.levels = parse_levels(flags.levels);
  cfg.base_block = flags.block;
  cfg.alpha = flags.alpha;
  cfg.beta = flags.beta;
  cfg.sign = msibm::parse_sign_convention(flags.sign);
  cfg.threads = parse_threads(flags.threads);
  cfg.validate();
  return cfg;
}

json config_json(const msibm::MatchConfig& cfg, int resolved_levels) {
  return {{"d_max", cfg.d_max},
          {"levels", resolved_levels},
          {"levels_requested", cfg.levels ? json(*cfg.levels) : json("auto")},
          {"base_block", cfg.base_block},
          {"alpha", cfg.alpha},
          {"beta", cfg.beta},
          {"sigma_eps", cfg.sigma_eps},
          {"sign", msibm::to_string(cfg.sign)},
          {"refine_radius", cfg.refine_radius},
          {"median_radius", cfg.median_radius},
          {"threads", cfg.threads}};
}

void write_text(const fs::path& path, const std::string& text) {
  msibm::detail::write_file(path.string(), text);
}

void write_json(const fs::path& path, const json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

/// Flattens a JSON object to key=value lines.
void flatten(const json& j, const std::string& prefix, std::ostringstream& os) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, os);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), os);
  } else if (j.is_string()) {
    os << prefix << "=" << j.get<std::string>() << "\n";
  } else {
    os << prefix << "=" << j.dump() << "\n";
  }
}

std::string flatten(const json& j) {
  std::ostringstream os;
  flatten(j, "", os);
  return os.str();
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

void write_maps(const fs::path& out, const msibm::DisparityMap& d, const msibm::CostMap& c,
                int d_max) {
  msibm::write_pfm(d, (out / "disparity.pfm").string());
  msibm::write_pgm(d, (out / "disparity.pgm").string(), d_max);
  msibm::write_pfm(msibm::to_float(c), (out / "cost.pfm").string());
}

void write_manifest(const fs::path& out, const json& manifest) {
  write_json(out / "manifest.json", manifest);
  write_text(out / "manifest.txt", flatten(manifest));
}

// ---------------------------------------------------------------------------

int cmd_compute(const std::string& left_path, const std::string& right_path,
                const MatchFlags& flags) {
  std::string calib_used;
  const int d_max = resolve_dmax(flags, left_path, calib_used);
  const msibm::MatchConfig cfg = make_config(flags, d_max);
  const msibm::GrayImage left = msibm::read_pgm_pnm(left_path);
  const msibm::GrayImage right = msibm::read_pgm_pnm(right_path);
  const int levels = msibm::resolve_levels(cfg, left.width(), left.height());

  const msibm::PipelineResult result = msibm::run_pipeline(left, right, cfg);

  const fs::path out(flags.out);
  fs::create_directories(out);
  write_maps(out, result.disparity, result.cost, d_max);
  write_text(out / "trace.txt", msibm::to_text(result.trace));
  write_json(out / "trace.json", msibm::to_json(result.trace));

  json timing = {{"pyramid_ms", result.trace.pyramid_ms}, {"total_ms", result.trace.total_ms}};
  json per_level = json::array();
  for (const auto& t : result.trace.timing) {
    per_level.push_back({{"level", t.level},
                         {"select_ms", t.select_ms},
                         {"refine_ms", t.refine_ms},
                         {"median_ms", t.median_ms}});
  }
  timing["levels"] = per_level;
  const json manifest = {
      {"command", "compute"},
      {"version", msibm::kVersion},
      {"inputs",
       {{"left", absolute(left_path)},
        {"right", absolute(right_path)},
        {"calib", calib_used.empty() ? "" : absolute(calib_used)}}},
      {"config", config_json(cfg, levels)},
      {"outputs",
       {{"disparity_pfm", "disparity.pfm"},
        {"disparity_pgm", "disparity.pgm"},
        {"cost_pfm", "cost.pfm"},
        {"trace", "trace.txt"},
        {"trace_json", "trace.json"}}},
      {"timing", timing}};
  write_manifest(out, manifest);
  std::cout << "disparity " << result.disparity.width() << "x" << result.disparity.height()
            << " levels=" << levels << " evals=" << result.trace.total_evals() << " time_ms="
            << msibm::detail::fixed(result.trace.total_ms, 1) << " -> " << out.string() << "\n";
  return kOk;
}

int cmd_baseline(const std::string& left_path, const std::string& right_path,
                 const MatchFlags& flags) {
  std::string calib_used;
  const int d_max = resolve_dmax(flags, left_path, calib_used);
  MatchFlags checked = flags;
  checked.levels = "0";
  const msibm::MatchConfig cfg = make_config(checked, d_max);
  const msibm::GrayImage left = msibm::read_pgm_pnm(left_path);
  const msibm::GrayImage right = msibm::read_pgm_pnm(right_path);

  const auto start = std::chrono::steady_clock::now();
  const msibm::BaselineResult result =
      msibm::baseline_bm(left, right, d_max, cfg.base_block, cfg.sign, cfg.sigma_eps);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const fs::path out(flags.out);
  fs::create_directories(out);
  write_maps(out, result.disparity, result.cost, d_max);
  const json trace = {{"total_evals", result.evals},
                      {"width", left.width()},
                      {"height", left.height()},
                      {"d_max", d_max}};
  write_json(out / "trace.json", trace);
  write_text(out / "trace.txt", flatten(trace));
  const json manifest = {
      {"command", "baseline"},
      {"version", msibm::kVersion},
      {"inputs",
       {{"left", absolute(left_path)},
        {"right", absolute(right_path)},
        {"calib", calib_used.empty() ? "" : absolute(calib_used)}}},
      {"config",
       {{"d_max", d_max},
        {"block", cfg.base_block},
        {"sign", msibm::to_string(cfg.sign)},
        {"sigma_eps", cfg.sigma_eps}}},
      {"outputs",
       {{"disparity_pfm", "disparity.pfm"},
        {"disparity_pgm", "disparity.pgm"},
        {"cost_pfm", "cost.pfm"},
        {"trace", "trace.txt"},
        {"trace_json", "trace.json"}}},
      {"timing", {{"total_ms", ms}}}};
  write_manifest(out, manifest);
  std::cout << "baseline " << left.width() << "x" << left.height() << " evals=" << result.evals
            << " time_ms=" << msibm::detail::fixed(ms, 1) << " -> " << out.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& disparity_path, const std::string& gt_path, double scale,
             const std::string& trace_path, const std::string& out_dir) {
  if (!(scale > 0.0)) throw msibm::ConfigError("--scale must be positive");
  const msibm::DisparityMap d = msibm::read_disparity_pfm(disparity_path);
  const msibm::GroundTruthDisparity gt = msibm::read_pfm(gt_path);
  msibm::EvalReport report = msibm::evaluate(d, gt, scale);
  if (!trace_path.empty()) {
    const json trace = json::parse(msibm::detail::read_file(trace_path));
    report.trace.total_evals = trace.at("total_evals").get<std::uint64_t>();
    if (trace.contains("levels")) {
      for (const auto& l : trace.at("levels")) {
        report.trace.trusted_fraction.push_back(l.at("trusted_fraction").get<double>());
      }
    }
  }
  const std::string text = msibm::to_text(report);
  std::cout << text;
  if (!out_dir.empty()) {
    const fs::path out(out_dir);
    fs::create_directories(out);
    write_text(out / "eval.txt", text);
    write_json(out / "eval.json", msibm::to_json(report));
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// bench

struct SceneFiles {
  std::string name;
  fs::path left, right, calib, gt;
};

std::optional<fs::path> first_existing(const fs::path& dir, std::initializer_list<const char*> names) {
  for (const char* n : names) {
    if (fs::exists(dir / n)) return dir / n;
  }
  return std::nullopt;
}

struct SceneRow {
  std::string name;
  int width = 0, height = 0, ndisp = 0;
  msibm::EvalReport msibm_report, baseline_report;
  msibm::ComparisonSummary comparison;
  double msibm_ms = 0, baseline_ms = 0;
};

std::string format_table(const std::vector<SceneRow>& rows) {
  std::ostringstream os;
  auto f = [](double v) { return msibm::detail::fixed(v, 2); };
  os << std::left << std::setw(16) << "scene" << std::right << std::setw(11) << "size"
     << std::setw(7) << "ndisp" << std::setw(9) << "bad1.0" << std::setw(9) << "bad2.0"
     << std::setw(9) << "bad4.0" << std::setw(9) << "avgerr" << std::setw(10) << "bm_bad2"
     << std::setw(10) << "bm_avgerr" << std::setw(11) << "eval_ratio" << "\n";
  double sums[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  for (const auto& r : rows) {
    const double vals[8] = {r.msibm_report.bad_1,        r.msibm_report.bad_2,
                            r.msibm_report.bad_4,        r.msibm_report.avg_abs_err,
                            r.baseline_report.bad_2,     r.baseline_report.avg_abs_err,
                            r.comparison.eval_ratio,     0.0};
    for (int k = 0; k < 7; ++k) sums[k] += vals[k];
    os << std::left << std::setw(16) << r.name << std::right << std::setw(11)
       << (std::to_string(r.width) + "x" + std::to_string(r.height)) << std::setw(7) << r.ndisp
       << std::setw(9) << f(vals[0]) << std::setw(9) << f(vals[1]) << std::setw(9) << f(vals[2])
       << std::setw(9) << f(vals[3]) << std::setw(10) << f(vals[4]) << std::setw(10)
       << f(vals[5]) << std::setw(11) << msibm::detail::fixed(vals[6], 4) << "\n";
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    os << std::left << std::setw(16) << "Average" << std::right << std::setw(11) << ""
       << std::setw(7) << "" << std::setw(9) << f(sums[0] / n) << std::setw(9) << f(sums[1] / n)
       << std::setw(9) << f(sums[2] / n) << std::setw(9) << f(sums[3] / n) << std::setw(10)
       << f(sums[4] / n) << std::setw(10) << f(sums[5] / n) << std::setw(11)
       << msibm::detail::fixed(sums[6] / n, 4) << "\n";
  }
  os << "published reference: average error 35.6, runtime 2 min (metric and hardware unspecified)\n";
  return os.str();
}

int cmd_bench(const std::string& dataset_dir, const MatchFlags& flags) {
  if (!fs::is_directory(dataset_dir)) throw msibm::IoError("not a directory: " + dataset_dir);
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(dataset_dir)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());

  std::vector<SceneFiles> scenes;
  for (const auto& dir : dirs) {
    const auto left = first_existing(dir, {"im0.pgm", "im0.ppm", "im0.pnm"});
    const auto right = first_existing(dir, {"im1.pgm", "im1.ppm", "im1.pnm"});
    const auto calib = first_existing(dir, {"calib.txt"});
    const auto gt = first_existing(dir, {"disp0GT.pfm", "disp0.pfm"});
    if (!left || !right || !calib || !gt) {
      std::cerr << "warning: skipping " << dir.filename().string()
                << " (needs im0/im1 .pgm|.ppm, calib.txt, disp0GT.pfm)\n";
      continue;
    }
    scenes.push_back({dir.filename().string(), *left, *right, *calib, *gt});
  }

  const int budget = msibm::resolve_threads(parse_threads(flags.threads));
  const int scene_workers = std::max(1, std::min<int>(budget, static_cast<int>(scenes.size())));
  const int inner_threads = std::max(1, budget / scene_workers);

  const auto start = std::chrono::steady_clock::now();
  std::vector<SceneRow> rows(scenes.size());
  msibm::parallel_for(static_cast<int>(scenes.size()), scene_workers, [&](int k) {
    const SceneFiles& s = scenes[k];
    const msibm::CalibInfo calib = msibm::read_calib(s.calib.string());
    MatchFlags scene_flags = flags;
    scene_flags.threads = std::to_string(inner_threads);
    const msibm::MatchConfig cfg = make_config(scene_flags, calib.ndisp);
    const msibm::GrayImage left = msibm::read_pgm_pnm(s.left.string());
    const msibm::GrayImage right = msibm::read_pgm_pnm(s.right.string());
    const msibm::GroundTruthDisparity gt = msibm::read_pfm(s.gt.string());

    SceneRow& row = rows[k];
    row.name = s.name;
    row.width = left.width();
    row.height = left.height();
    row.ndisp = calib.ndisp;

    const msibm::PipelineResult result = msibm::run_pipeline(left, right, cfg);
    row.msibm_ms = result.trace.total_ms;
    row.msibm_report = msibm::evaluate(result.disparity, gt);
    row.msibm_report.trace = msibm::summarize(result.trace);

    const auto t0 = std::chrono::steady_clock::now();
    const msibm::BaselineResult base =
        msibm::baseline_bm(left, right, cfg.d_max, cfg.base_block, cfg.sign, cfg.sigma_eps);
    row.baseline_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    row.baseline_report = msibm::evaluate(base.disparity, gt);
    row.baseline_report.trace.total_evals = base.evals;
    row.comparison = msibm::compare(row.msibm_report, row.baseline_report);
  });
  const double total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  const std::string table = format_table(rows);
  std::cout << table;
  std::cout << "scenes=" << rows.size() << " total_wall_time_s=" << msibm::detail::fixed(total_ms / 1000.0, 2)
            << "\n";

  json scenes_json = json::array();
  json timing = json::array();
  for (const auto& r : rows) {
    const auto& c = r.comparison;
    scenes_json.push_back({{"scene", r.name},
                           {"width", r.width},
                           {"height", r.height},
                           {"ndisp", r.ndisp},
                           {"msibm", msibm::to_json(r.msibm_report)},
                           {"baseline", msibm::to_json(r.baseline_report)},
                           {"comparison",
                            {{"delta_bad_1.0", c.delta_bad_1},
                             {"delta_bad_2.0", c.delta_bad_2},
                             {"delta_bad_4.0", c.delta_bad_4},
                             {"delta_avg_abs_err", c.delta_avg_abs_err},
                             {"eval_ratio", c.eval_ratio}}}});
    timing.push_back({{"scene", r.name}, {"msibm_ms", r.msibm_ms}, {"baseline_ms", r.baseline_ms}});
  }
  const json doc = {{"version", msibm::kVersion},
                    {"scenes", scenes_json},
                    {"reference", {{"published_average_error", 35.6}, {"published_runtime_min", 2.0}}},
                    {"timing", {{"scenes", timing}, {"total_ms", total_ms}}}};
  if (!flags.out.empty()) {
    const fs::path out(flags.out);
    fs::create_directories(out);
    write_text(out / "bench_table.txt", table);
    write_json(out / "bench.json", doc);
  }
  return kOk;
}

void add_match_flags(CLI::App* cmd, MatchFlags& flags, bool pyramid) {
  cmd->add_option("--dmax", flags.dmax, "maximum disparity in pixels");
  cmd->add_option("--calib", flags.calib, "Middlebury calib.txt (ndisp overrides --dmax)");
  cmd->add_option("--block", flags.block, "block size at full resolution (odd)")
      ->capture_default_str();
  cmd->add_option("--sign", flags.sign, "middlebury|minus (j-z) or paper|plus (j+z)")->capture_default_str();
  cmd->add_option("--out", flags.out, "output directory")->capture_default_str();
  if (pyramid) {
    cmd->add_option("--levels", flags.levels, "pyramid levels K or 'auto'")->capture_default_str();
    cmd->add_option("--alpha", flags.alpha, "refinement cost threshold in (0,1)")
        ->capture_default_str();
    cmd->add_option("--beta", flags.beta, "prior trust threshold in (0,1)")->capture_default_str();
    cmd->add_option("--threads", flags.threads, "worker threads or 'auto'")->capture_default_str();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale hierarchical block matching for rectified stereo pairs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(msibm::kVersion));

  MatchFlags compute_flags, baseline_flags, bench_flags;
  std::string left, right;

  auto* compute = app.add_subcommand("compute", "hierarchical disparity map");
  compute->add_option("left", left, "left image (PGM/PPM)")->required();
  compute->add_option("right", right, "right image (PGM/PPM)")->required();
  add_match_flags(compute, compute_flags, true);

  auto* baseline = app.add_subcommand("baseline", "full-resolution full-search block matching");
  baseline->add_option("left", left, "left image (PGM/PPM)")->required();
  baseline->add_option("right", right, "right image (PGM/PPM)")->required();
  add_match_flags(baseline, baseline_flags, false);

  std::string disparity_path, gt_path, trace_path, eval_out;
  double scale = 1.0;
  auto* eval = app.add_subcommand("eval", "score a disparity PFM against ground truth");
  eval->add_option("disparity", disparity_path, "disparity PFM")->required();
  eval->add_option("gt", gt_path, "ground truth PFM")->required();
  eval->add_option("--scale", scale, "multiply disparities by this before comparing")
      ->capture_default_str();
  eval->add_option("--trace", trace_path, "trace.json to attach to the report");
  eval->add_option("--out", eval_out, "write eval.txt and eval.json here");

  std::string dataset;
  auto* bench = app.add_subcommand("bench", "compute, baseline and eval over a scene directory");
  bench->add_option("dataset", dataset, "directory of scene folders")->required();
  bench_flags.out = "bench_out";
  add_match_flags(bench, bench_flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*compute) return cmd_compute(left, right, compute_flags);
    if (*baseline) return cmd_baseline(left, right, baseline_flags);
    if (*eval) return cmd_eval(disparity_path, gt_path, scale, trace_path, eval_out);
    if (*bench) return cmd_bench(dataset, bench_flags);
  } catch (const msibm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const msibm::DecodeError& e) {
    std::cerr << "decode error: " << e.what() << "\n";
    return kDecode;
  } catch (const msibm::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
