#pragma once

// KITTI-style relative pose error over fixed path lengths, and the cumulative
// error curve used to rank robustness across many sequences.

#include "madlo/dataset_io.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace madlo {

struct RpeConfig {
  std::vector<double> lengths;  ///< meters, positive and strictly increasing
  std::size_t step = 1;         ///< frame stride between subsequence starts

  void validate() const;
  static RpeConfig long_range();   ///< 100 .. 800 m
  static RpeConfig short_range();  ///< 10 .. 80 m
};

/// Parses "A:B:S" into A, A+S, ..., B.
[[nodiscard]] std::vector<double> parse_lengths(const std::string& text);

struct RpeRecord {
  std::size_t start = 0;
  std::size_t end = 0;
  double length = 0.0;       ///< requested subsequence length
  double path_length = 0.0;  ///< ground-truth distance actually travelled start -> end
  double trans_error_pct = 0.0;
  double rot_error_deg_per_m = 0.0;
};

struct RpeReport {
  std::vector<std::pair<double, double>> per_length;  ///< (length, mean translational %)
  double overall = 0.0;  ///< flat mean over all records; NaN when there are none
  std::vector<RpeRecord> records;
};

/// Throws std::invalid_argument on length mismatch or fewer than two poses.
[[nodiscard]] RpeReport compute_rpe(const Trajectory& est, const Trajectory& gt,
                                    const RpeConfig& cfg);

struct CumulativeCurve {
  std::vector<std::pair<double, std::size_t>> samples;  ///< (threshold, #errors <= threshold)
  double auc = 0.0;  ///< exact area of the step function on [0, max_err]
};

/// Throws std::invalid_argument on an empty or negative error list.
[[nodiscard]] CumulativeCurve cumulative_curve(std::span<const double> errors, double max_err = 10.0,
                                               double resolution = 0.01);

/// Mean of per-dataset means ("tot avg" across benchmarks).
[[nodiscard]] double mean_of_dataset_means(std::span<const std::vector<double>> per_dataset);

/// `length,mean_err_pct` rows followed by `overall,<value>`.
void write_rpe_csv(const RpeReport& report, std::ostream& out);
/// `threshold,count` rows.
void write_curve_csv(const CumulativeCurve& curve, std::ostream& out);

}  // namespace madlo
