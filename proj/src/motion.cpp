#include "madlo/motion.hpp"

#include "madlo/parallel.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace madlo {

namespace {

// Rotation vector of `r` on the branch closest to `hint`, so that windows
// whose total rotation exceeds pi still give dt * omega.
Vec3 unwrapped_log(const Mat3& r, const Vec3& hint) {
  const Vec3 w = log_so3(r);
  const double angle = w.norm();
  if (angle < 1e-12) {
    if (hint.norm() < std::numbers::pi) return w;
    const Vec3 axis = hint.normalized();
    return axis * (2.0 * std::numbers::pi * std::round(hint.norm() / (2.0 * std::numbers::pi)));
  }
  const Vec3 axis = w / angle;
  const double along = hint.dot(axis);
  const double m = std::round((along - angle) / (2.0 * std::numbers::pi));
  return axis * (angle + 2.0 * std::numbers::pi * m);
}

}  // namespace

VelocityEstimate estimate_velocity(std::span<const StampedPose> history) {
  if (history.size() < 2) return {};
  const StampedPose& newest = history.back();
  const Isometry3 newest_inv = newest.pose.inverse();

  Vec3 sum_rho = Vec3::Zero();
  Vec3 sum_theta = Vec3::Zero();
  double sum_dt2 = 0.0;
  // Sum of consecutive-step rotation vectors from pose i to the newest pose.
  Vec3 chain = Vec3::Zero();
  for (std::size_t i = history.size() - 1; i-- > 0;) {
    const double dt = newest.stamp - history[i].stamp;
    if (!(dt > 0.0) || !(history[i + 1].stamp > history[i].stamp)) {
      throw std::invalid_argument("estimate_velocity: stamps must increase");
    }
    chain += log_so3(history[i].pose.rotation().transpose() * history[i + 1].pose.rotation());
    // iXk = iXw * wXk
    const Isometry3 relative = (newest_inv * history[i].pose).inverse();
    const Vec3 theta = unwrapped_log(relative.rotation(), chain);
    sum_rho += dt * (so3_left_jacobian_inverse(theta) * relative.translation());
    sum_theta += dt * theta;
    sum_dt2 += dt * dt;
  }
  return {sum_rho / sum_dt2, sum_theta / sum_dt2};
}

Isometry3 predict_pose(const StampedPose& last, const VelocityEstimate& vel, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("predict_pose: dt must be positive");
  return last.pose * exp_se3(vel.twist(dt));
}

PointCloud deskew(const PointCloud& cloud, const VelocityEstimate& vel, double scan_period,
                  std::size_t workers) {
  if (!(scan_period > 0.0)) throw std::invalid_argument("deskew: scan_period must be positive");
  if (!cloud.rel_times) return cloud;
  if (vel.v.isZero(0.0) && vel.omega.isZero(0.0)) return cloud;

  PointCloud out = cloud;
  const auto& times = *cloud.rel_times;
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (cloud.size() + kBlock - 1) / kBlock;
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t end = std::min(cloud.size(), (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const Isometry3 x = exp_se3(vel.twist((times[i] - 1.0) * scan_period));
      out.points[i] = x * cloud.points[i];
    }
  });
  return out;
}

}  // namespace madlo
