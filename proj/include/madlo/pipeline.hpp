#pragma once

// Frame-by-frame odometry loop: deskew, build tree, predict, register,
// transform tree, queue candidate, re-estimate velocity and, when the scan is
// poorly supported by the map, promote the best candidate to a keyframe.

#include "madlo/dataset_io.hpp"
#include "madlo/local_map.hpp"
#include "madlo/mad_tree.hpp"
#include "madlo/motion.hpp"
#include "madlo/registration.hpp"

#include <deque>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace madlo {

struct OdometryParams {
  TreeParams tree;
  RegistrationParams registration;
  double p_th = 0.8;
  std::size_t history = 10;  ///< poses used for velocity smoothing
  double scan_period = 0.1;
  bool deskew = true;
  std::size_t keyframes = LocalMap::kDefaultCapacity;
  std::size_t candidates = LocalMap::kDefaultCandidateCapacity;
  std::size_t workers = 1;

  static OdometryParams from_config(const RunConfig& config);
};

struct FrameTimings {
  double deskew_ms = 0.0;
  double build_ms = 0.0;
  double icp_ms = 0.0;
  double update_ms = 0.0;
};

struct FrameOutput {
  std::size_t frame = 0;
  Isometry3 pose;
  double matched_fraction = 0.0;
  double det_information = 0.0;  ///< -inf for fallback frames
  int iterations = 0;
  bool fallback = false;  ///< registration was degenerate; pose is the prediction
  bool map_updated = false;
  FrameTimings timings;
};

class Odometry {
 public:
  explicit Odometry(OdometryParams params = {});

  /// `stamp` defaults to frame_index * scan_period. Never throws for
  /// registration failures; those frames fall back to the motion prediction.
  FrameOutput process_frame(const PointCloud& cloud, std::optional<double> stamp = std::nullopt);

  [[nodiscard]] const LocalMap& local_map() const { return map_; }
  [[nodiscard]] const std::deque<StampedPose>& pose_history() const { return history_; }
  [[nodiscard]] const VelocityEstimate& velocity() const { return velocity_; }
  [[nodiscard]] std::size_t frame_index() const { return frame_index_; }
  [[nodiscard]] const OdometryParams& params() const { return params_; }

 private:
  OdometryParams params_;
  LocalMap map_;
  std::deque<StampedPose> history_;
  VelocityEstimate velocity_;
  std::size_t frame_index_ = 0;
};

struct SequenceResult {
  Trajectory trajectory;
  std::vector<FrameOutput> frames;
  std::optional<std::string> error;  ///< set when I/O stopped the run early
};

/// Runs every scan of `source` in filename order. Scans without native
/// per-point times get azimuth-synthesized ones when deskewing is on.
[[nodiscard]] SequenceResult run_sequence(const ScanSource& source, const RunConfig& config);

/// `frame,t_deskew_ms,t_build_ms,t_icp_ms,t_update_ms,p,det_H,fallback`
void write_frame_log_csv(const std::vector<FrameOutput>& frames, std::ostream& out);

}  // namespace madlo
