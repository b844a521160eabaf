// mad_lo: LiDAR odometry front end.
//
//   mad_lo odometry --data <scan dir> --out <dir> [--format kitti|ply] [--config file] ...
//   mad_lo evaluate --est a.txt --gt b.txt [--lengths 100:800:100] [--out dir]
//
// Exit codes: 0 success, 1 usage error, 2 I/O failure.

#include "madlo/dataset_io.hpp"
#include "madlo/evaluation.hpp"
#include "madlo/pipeline.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kIoError = 2;

struct Overrides {
  std::optional<double> b_max, b_min, b_ratio, p_th, rho_ker, min_range, max_range, scan_period,
      time_budget_ms;
  std::optional<int> n, threads, max_iterations, keyframes;
  bool no_deskew = false;

  void apply(madlo::RunConfig& c) const {
    if (b_max) c.b_max = *b_max;
    if (b_min) c.b_min = *b_min;
    if (b_ratio) c.b_ratio = *b_ratio;
    if (p_th) c.p_th = *p_th;
    if (rho_ker) c.rho_ker = *rho_ker;
    if (min_range) c.min_range = *min_range;
    if (max_range) c.max_range = *max_range;
    if (scan_period) c.scan_period = *scan_period;
    if (time_budget_ms) c.time_budget_ms = *time_budget_ms;
    if (n) c.n = *n;
    if (threads) c.threads = *threads;
    if (max_iterations) c.max_iterations = *max_iterations;
    if (keyframes) c.keyframes = *keyframes;
    if (no_deskew) c.deskew = false;
  }
};

template <typename Writer>
void write_atomic(const fs::path& path, Writer&& writer) {
  std::ostringstream ss;
  writer(ss);
  madlo::write_file_atomic(path, ss.str());
}

int run_odometry(const std::string& data, const std::string& format, const std::string& out_dir,
                 const std::string& config_path, const Overrides& overrides) {
  madlo::RunConfig config;
  madlo::ScanSource source;
  try {
    if (!config_path.empty()) config = madlo::read_config(config_path);
    overrides.apply(config);
    config.validate();
    source.kind = format == "ply" ? madlo::ScanFormat::kPly : madlo::ScanFormat::kKittiBin;
    source.path = data;
    source.scan_period = config.scan_period;
    source.range = {config.min_range, config.max_range};
    source.validate();
  } catch (const madlo::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    fs::create_directories(out_dir);
    const madlo::SequenceResult result = madlo::run_sequence(source, config);
    madlo::write_trajectory_kitti(result.trajectory, fs::path(out_dir) / "trajectory.txt");
    madlo::write_trajectory_tum(result.trajectory, fs::path(out_dir) / "trajectory_tum.txt");
    write_atomic(fs::path(out_dir) / "frames.csv",
                 [&](std::ostream& os) { madlo::write_frame_log_csv(result.frames, os); });

    std::size_t fallbacks = 0;
    double total_ms = 0.0;
    for (const auto& f : result.frames) {
      fallbacks += f.fallback ? 1 : 0;
      total_ms += f.timings.deskew_ms + f.timings.build_ms + f.timings.icp_ms + f.timings.update_ms;
    }
    std::cout << "frames: " << result.frames.size() << ", fallback frames: " << fallbacks;
    if (!result.frames.empty()) {
      std::cout << ", mean frame time: " << total_ms / double(result.frames.size()) << " ms";
    }
    std::cout << '\n';
    if (result.error) {
      std::cerr << "error: " << *result.error << '\n';
      return kIoError;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return 0;
}

madlo::Trajectory read_any(const std::string& path, const std::string& format) {
  return format == "tum" ? madlo::read_trajectory_tum(fs::path(path))
                         : madlo::read_trajectory_kitti(fs::path(path));
}

int run_evaluate(const std::vector<std::string>& est, const std::vector<std::string>& gt,
                 const std::string& lengths, std::size_t step, const std::string& format,
                 const std::string& out_dir) {
  if (est.size() != gt.size()) {
    std::cerr << "error: --est and --gt must be given the same number of times\n";
    return kUsageError;
  }
  madlo::RpeConfig cfg;
  try {
    cfg.lengths = madlo::parse_lengths(lengths);
    cfg.step = step;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    std::vector<double> errors;
    std::vector<madlo::RpeReport> reports;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const auto e = read_any(est[i], format);
      const auto g = read_any(gt[i], format);
      madlo::RpeReport report;
      try {
        report = madlo::compute_rpe(e, g, cfg);
      } catch (const std::invalid_argument& ex) {
        std::cerr << "error: " << est[i] << ": " << ex.what() << '\n';
        return kUsageError;
      }
      if (std::isfinite(report.overall)) {
        char line[64];
        std::snprintf(line, sizeof(line), "%.2f", report.overall);
        std::cout << est[i] << ": overall RPE " << line << " %\n";
      } else {
        std::cout << est[i] << ": overall RPE n/a (path shorter than the shortest length)\n";
      }
      errors.push_back(report.overall);
      reports.push_back(std::move(report));
    }

    std::optional<madlo::CumulativeCurve> curve;
    bool all_finite = true;
    for (double e : errors) all_finite = all_finite && std::isfinite(e);
    if (all_finite) {
      curve = madlo::cumulative_curve(errors);
      std::cout << "cumulative AUC (0-10 %): " << curve->auc << '\n';
    }

    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const std::string name = reports.size() == 1 ? "rpe.csv" : "rpe_" + std::to_string(i) + ".csv";
        write_atomic(fs::path(out_dir) / name,
                     [&](std::ostream& os) { madlo::write_rpe_csv(reports[i], os); });
      }
      if (curve) {
        write_atomic(fs::path(out_dir) / "curve.csv",
                     [&](std::ostream& os) { madlo::write_curve_csv(*curve, os); });
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR odometry with a PCA kd-tree local map"};
  app.require_subcommand(1);

  const madlo::RunConfig defaults;
  Overrides ov;
  std::string data, format = "kitti", out_dir, config_path;

  auto* odo = app.add_subcommand("odometry", "Run odometry over a directory of scans");
  odo->add_option("--data", data, "Directory of scans")->required();
  odo->add_option("--format", format, "Scan format")->check(CLI::IsMember({"kitti", "ply"}))
      ->capture_default_str();
  odo->add_option("--out", out_dir, "Output directory")->required();
  odo->add_option("--config", config_path, "Flat key = value configuration file");
  odo->add_option("--threads", ov.threads, "Worker threads")->envname("MAD_LO_THREADS");
  odo->add_option("--time-budget-ms", ov.time_budget_ms, "Anytime ICP budget per frame (0 = off)");
  odo->add_flag("--no-deskew", ov.no_deskew, "Disable motion compensation");
  odo->add_option("--b-max", ov.b_max, "Max leaf extent, m (default 0.2)");
  odo->add_option("--b-min", ov.b_min, "Normal propagation flatness, m (default 0.1)");
  odo->add_option("--b-ratio", ov.b_ratio, "Gate growth factor (default 0.02)");
  odo->add_option("--p-th", ov.p_th, "Map update threshold (default 0.8)");
  odo->add_option("--rho-ker", ov.rho_ker, "Huber threshold, m (default 0.1)");
  odo->add_option("--n", ov.n, "Poses for velocity smoothing (default 10)");
  odo->add_option("--max-iterations", ov.max_iterations,
                  "ICP iteration cap (default " + std::to_string(defaults.max_iterations) + ")");
  odo->add_option("--keyframes", ov.keyframes,
                  "Local map capacity (default " + std::to_string(defaults.keyframes) + ")");
  odo->add_option("--min-range", ov.min_range, "Drop closer points, m (default 1)");
  odo->add_option("--max-range", ov.max_range, "Drop farther points, m (default 120)");
  odo->add_option("--scan-period", ov.scan_period, "Seconds per scan (default 0.1)");

  std::vector<std::string> est, gt;
  std::string lengths = "100:800:100", traj_format = "kitti", eval_out;
  std::size_t step = 1;
  auto* eval = app.add_subcommand("evaluate", "Relative pose error and cumulative error curve");
  eval->add_option("--est", est, "Estimated trajectory (repeatable)")->required();
  eval->add_option("--gt", gt, "Ground-truth trajectory (repeatable)")->required();
  eval->add_option("--lengths", lengths, "Subsequence lengths A:B:S in meters")->capture_default_str();
  eval->add_option("--step", step, "Frame stride between start indices")->capture_default_str();
  eval->add_option("--format", traj_format, "Trajectory format")
      ->check(CLI::IsMember({"kitti", "tum"}))->capture_default_str();
  eval->add_option("--out", eval_out, "Directory for rpe.csv and curve.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  }

  if (*odo) return run_odometry(data, format, out_dir, config_path, ov);
  return run_evaluate(est, gt, lengths, step, traj_format, eval_out);
}
