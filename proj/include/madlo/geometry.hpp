#pragma once

// Core 3D types: points, clouds, rigid transforms and the se(3)/so(3)
// exponential and logarithm maps. Everything is fixed to double precision.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace madlo {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Point3 = Vec3;

/// Ordered set of points with optional per-point capture time expressed as a
/// fraction of the scan period in [0, 1].
struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::vector<double>> rel_times;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
  [[nodiscard]] bool has_rel_times() const { return rel_times.has_value(); }

  /// Throws std::invalid_argument when a point is non-finite or the time
  /// channel is inconsistent.
  void validate() const;
};

/// se(3) tangent vector. rho is the translational part, theta the rotation
/// vector (axis * angle).
struct Twist6 {
  Vec3 rho = Vec3::Zero();
  Vec3 theta = Vec3::Zero();

  Twist6() = default;
  Twist6(const Vec3& rho_, const Vec3& theta_) : rho(rho_), theta(theta_) {}
  explicit Twist6(const Vec6& v) : rho(v.head<3>()), theta(v.tail<3>()) {}

  /// Stacked as (rho, theta).
  [[nodiscard]] Vec6 vector() const {
    Vec6 v;
    v << rho, theta;
    return v;
  }
  [[nodiscard]] Twist6 scaled(double s) const { return {rho * s, theta * s}; }
};

/// Rigid transform in SE(3). The rotation is kept orthonormal: after every
/// kReorthonormalizePeriod compositions it is projected back onto SO(3).
class Isometry3 {
 public:
  static constexpr int kReorthonormalizePeriod = 256;

  Isometry3() = default;

  /// Throws std::invalid_argument if `rotation` is not orthonormal within
  /// `tolerance` or has negative determinant.
  Isometry3(const Mat3& rotation, const Vec3& translation,
            double tolerance = 1e-9);

  static Isometry3 identity() { return {}; }
  static Isometry3 from_translation(const Vec3& t) {
    return {Mat3::Identity(), t};
  }
  /// Projects an approximately orthonormal 3x3 block onto SO(3) (polar
  /// decomposition) before constructing. For parsed, rounded pose files.
  static Isometry3 from_approximate(const Mat3& rotation,
                                    const Vec3& translation);
  static Isometry3 from_matrix(const Eigen::Matrix4d& m,
                               double tolerance = 1e-9);

  [[nodiscard]] const Mat3& rotation() const { return rotation_; }
  [[nodiscard]] const Vec3& translation() const { return translation_; }
  [[nodiscard]] Eigen::Matrix4d matrix() const;

  [[nodiscard]] Isometry3 inverse() const;
  [[nodiscard]] Vec3 operator*(const Vec3& p) const {
    return rotation_ * p + translation_;
  }
  [[nodiscard]] Isometry3 operator*(const Isometry3& other) const;

  /// Number of compositions since the rotation was last re-orthonormalized.
  [[nodiscard]] int compositions() const { return compositions_; }

  friend bool operator==(const Isometry3& a, const Isometry3& b) {
    return a.rotation_ == b.rotation_ && a.translation_ == b.translation_;
  }

 private:
  struct Unchecked {};
  Isometry3(const Mat3& r, const Vec3& t, Unchecked, int compositions)
      : rotation_(r), translation_(t), compositions_(compositions) {}

  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
  int compositions_ = 0;
};

/// Symmetric 3x3 matrix stored by its six unique entries.
class SymMat3 {
 public:
  SymMat3() = default;
  SymMat3(double xx, double xy, double xz, double yy, double yz, double zz)
      : e_{xx, xy, xz, yy, yz, zz} {}
  /// Takes the upper triangle of `m`.
  explicit SymMat3(const Mat3& m)
      : e_{m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2)} {}

  [[nodiscard]] double operator()(int r, int c) const;
  [[nodiscard]] Mat3 matrix() const;
  [[nodiscard]] const std::array<double, 6>& entries() const { return e_; }

 private:
  std::array<double, 6> e_{};
};

/// Eigenvalues ascending and matching orthonormal eigenvectors as columns.
/// Each eigenvector is sign-normalized so its largest-magnitude component is
/// positive.
struct SymEigen3 {
  Vec3 values;
  Mat3 vectors;
};

struct MeanCovariance {
  Point3 mean;
  SymMat3 covariance;
};

[[nodiscard]] Mat3 skew(const Vec3& v);
[[nodiscard]] Vec3 vee(const Mat3& m);

[[nodiscard]] Mat3 exp_so3(const Vec3& theta);
/// Rotation vector with norm in [0, pi]. Throws std::invalid_argument for
/// matrices that are not rotations within 1e-6.
[[nodiscard]] Vec3 log_so3(const Mat3& rotation);

/// Left Jacobian of SO(3); maps rho to the translation of exp_se3.
[[nodiscard]] Mat3 so3_left_jacobian(const Vec3& theta);
[[nodiscard]] Mat3 so3_left_jacobian_inverse(const Vec3& theta);

[[nodiscard]] Isometry3 exp_se3(const Twist6& xi);
[[nodiscard]] Twist6 log_se3(const Isometry3& x);

[[nodiscard]] SymEigen3 eig_sym3(const SymMat3& m);

/// Population (1/N) mean and covariance. Throws std::invalid_argument on an
/// empty input.
[[nodiscard]] MeanCovariance mean_and_covariance(std::span<const Point3> points);
[[nodiscard]] MeanCovariance mean_and_covariance(const PointCloud& cloud);
/// Statistics of the subset of `points` addressed by `indices`.
[[nodiscard]] MeanCovariance mean_and_covariance(
    std::span<const Point3> points, std::span<const std::uint32_t> indices);

}  // namespace madlo
