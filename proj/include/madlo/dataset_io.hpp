#pragma once

// Scan ingestion (KITTI velodyne .bin, PLY), per-point time synthesis,
// trajectory files (KITTI and TUM) and the flat run-configuration format.

#include "madlo/geometry.hpp"
#include "madlo/motion.hpp"

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace madlo {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RangeFilter {
  double min_range = 1.0;
  double max_range = 120.0;

  [[nodiscard]] bool keep(const Point3& p) const {
    const double r = p.norm();
    return r >= min_range && r <= max_range;
  }
};

enum class ScanFormat { kKittiBin, kPly };

struct ScanSource {
  ScanFormat kind = ScanFormat::kKittiBin;
  std::filesystem::path path;
  double scan_period = 0.1;
  RangeFilter range;

  /// Throws std::invalid_argument when the path is missing or the range is inverted.
  void validate() const;
};

using Trajectory = std::vector<StampedPose>;

/// Scan files of the given format in `dir`, sorted by filename.
[[nodiscard]] std::vector<std::filesystem::path> list_scans(const std::filesystem::path& dir,
                                                            ScanFormat kind);
/// Per-scan stamps from a `times.txt` next to or one level above `dir`, if
/// one exists with a matching count; otherwise index * scan_period.
[[nodiscard]] std::vector<double> scan_stamps(const std::filesystem::path& dir, std::size_t count,
                                              double scan_period);

/// Little-endian float32 (x, y, z, intensity) records; intensity dropped.
[[nodiscard]] PointCloud read_kitti_bin(const std::filesystem::path& path,
                                        const RangeFilter& range = {0.0, 1e300});
void write_kitti_bin(const PointCloud& cloud, const std::filesystem::path& path);

/// ASCII or binary_little_endian vertices with float/double x, y, z. A `time`
/// or `t` vertex property becomes rel_times, rescaled to [0, 1] when the stored
/// values fall outside it.
[[nodiscard]] PointCloud read_ply(const std::filesystem::path& path,
                                  const RangeFilter& range = {0.0, 1e300});
/// Binary little-endian, double x/y/z, plus a double `time` when rel_times exist.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);

[[nodiscard]] PointCloud read_scan(const std::filesystem::path& path, const ScanSource& source);

/// s = ((theta0 - atan2(y, x)) mod 2 pi) / 2 pi, theta0 the first point's azimuth.
[[nodiscard]] PointCloud synthesize_rel_times(const PointCloud& cloud);

/// One line per pose: row-major 3x4 [R | t], 17 significant digits.
void write_trajectory_kitti(const Trajectory& traj, std::ostream& out);
void write_trajectory_kitti(const Trajectory& traj, const std::filesystem::path& path);
/// Stamps are assigned as index * stamp_step.
[[nodiscard]] Trajectory read_trajectory_kitti(std::istream& in, double stamp_step = 1.0);
[[nodiscard]] Trajectory read_trajectory_kitti(const std::filesystem::path& path,
                                               double stamp_step = 1.0);

/// `timestamp tx ty tz qx qy qz qw` per line.
void write_trajectory_tum(const Trajectory& traj, std::ostream& out);
void write_trajectory_tum(const Trajectory& traj, const std::filesystem::path& path);
[[nodiscard]] Trajectory read_trajectory_tum(std::istream& in);
[[nodiscard]] Trajectory read_trajectory_tum(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Every tunable of a run. README.md lists the defaults.
struct RunConfig {
  double b_max = 0.2;
  double b_min = 0.1;
  double b_ratio = 0.02;
  double p_th = 0.8;
  double rho_ker = 0.1;
  int n = 10;
  int threads = 1;
  int max_iterations = 15;
  double time_budget_ms = 0.0;  ///< <= 0 disables the anytime cap
  double min_range = 1.0;
  double max_range = 120.0;
  double scan_period = 0.1;
  bool deskew = true;
  int keyframes = 8;

  void validate() const;
  /// Applies one `key = value` assignment. Throws std::invalid_argument for an
  /// unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
};

/// Flat `key = value` lines; `#` starts a comment.
[[nodiscard]] RunConfig parse_config(std::istream& in, RunConfig base = {});
[[nodiscard]] RunConfig read_config(const std::filesystem::path& path, RunConfig base = {});

}  // namespace madlo
