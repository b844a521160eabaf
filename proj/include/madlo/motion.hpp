#pragma once

// Constant-twist motion model: smoothed velocity from the recent pose
// history, next-pose prediction, and per-point deskewing into the scan-end
// frame.

#include "madlo/geometry.hpp"

#include <span>

namespace madlo {

struct StampedPose {
  Isometry3 pose;
  double stamp = 0.0;  ///< seconds
};

/// Body-frame twist rate of the most recent pose.
struct VelocityEstimate {
  Vec3 v = Vec3::Zero();      ///< m/s
  Vec3 omega = Vec3::Zero();  ///< rad/s

  [[nodiscard]] Twist6 twist(double dt) const { return {v * dt, omega * dt}; }
};

/// Least-squares fit of (v, omega) to every relative motion from an older
/// pose i to the newest pose k, each weighted equally:
///   min sum_i |dt_i v - rho(iXk)|^2 + |dt_i omega - Log(iRk)|^2
/// with (rho, Log(R)) = log_se3(iXk). Fewer than two poses give zero velocity.
[[nodiscard]] VelocityEstimate estimate_velocity(std::span<const StampedPose> history);

/// last * exp(dt * [v; omega]).
[[nodiscard]] Isometry3 predict_pose(const StampedPose& last, const VelocityEstimate& vel,
                                     double dt);

/// Maps each point captured at fraction s of the scan into the frame at s = 1:
/// c' = exp((s - 1) * scan_period * [v; omega]) * c. Clouds without rel_times
/// are returned unchanged.
[[nodiscard]] PointCloud deskew(const PointCloud& cloud, const VelocityEstimate& vel,
                                double scan_period, std::size_t workers = 1);

}  // namespace madlo
