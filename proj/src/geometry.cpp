#include "madlo/geometry.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace madlo {

namespace {

constexpr double kSmallAngle = 1e-8;

Mat3 project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

bool is_rotation(const Mat3& r, double tolerance) {
  const double err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return r.allFinite() && err < tolerance && r.determinant() > 0.0;
}

}  // namespace

void PointCloud::validate() const {
  for (const auto& p : points) {
    if (!p.allFinite()) throw std::invalid_argument("point cloud contains a non-finite point");
  }
  if (rel_times) {
    if (rel_times->size() != points.size()) {
      throw std::invalid_argument("rel_times length differs from point count");
    }
    for (double s : *rel_times) {
      if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("rel_time outside [0, 1]");
    }
  }
}

Isometry3::Isometry3(const Mat3& rotation, const Vec3& translation, double tolerance)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation, tolerance)) {
    throw std::invalid_argument("Isometry3: rotation block is not orthonormal");
  }
  if (!translation.allFinite()) {
    throw std::invalid_argument("Isometry3: non-finite translation");
  }
}

Isometry3 Isometry3::from_approximate(const Mat3& rotation, const Vec3& translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw std::invalid_argument("Isometry3: non-finite input");
  }
  return {project_to_so3(rotation), translation, Unchecked{}, 0};
}

Isometry3 Isometry3::from_matrix(const Eigen::Matrix4d& m, double tolerance) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>(), tolerance};
}

Eigen::Matrix4d Isometry3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Isometry3 Isometry3::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_), Unchecked{}, compositions_};
}

Isometry3 Isometry3::operator*(const Isometry3& other) const {
  Mat3 r = rotation_ * other.rotation_;
  const Vec3 t = rotation_ * other.translation_ + translation_;
  int count = std::max(compositions_, other.compositions_) + 1;
  if (count >= kReorthonormalizePeriod) {
    r = project_to_so3(r);
    count = 0;
  }
  return {r, t, Unchecked{}, count};
}

double SymMat3::operator()(int r, int c) const {
  if (r > c) std::swap(r, c);
  static constexpr int kIndex[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  return e_[kIndex[r][c]];
}

Mat3 SymMat3::matrix() const {
  Mat3 m;
  m << e_[0], e_[1], e_[2],
       e_[1], e_[3], e_[4],
       e_[2], e_[4], e_[5];
  return m;
}

Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 exp_so3(const Vec3& theta) {
  const double angle2 = theta.squaredNorm();
  const double angle = std::sqrt(angle2);
  const Mat3 k = skew(theta);
  double a;
  double b;
  if (angle < kSmallAngle) {
    a = 1.0 - angle2 / 6.0;
    b = 0.5 - angle2 / 24.0;
  } else {
    a = std::sin(angle) / angle;
    b = (1.0 - std::cos(angle)) / angle2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Vec3 log_so3(const Mat3& rotation) {
  if (!is_rotation(rotation, 1e-6)) {
    throw std::invalid_argument("log_so3: input is not a rotation matrix");
  }
  const Vec3 w = vee(rotation - rotation.transpose()) * 0.5;  // sin(angle) * axis
  const double sin_angle = w.norm();
  const double cos_angle = std::clamp(0.5 * (rotation.trace() - 1.0), -1.0, 1.0);
  const double angle = std::atan2(sin_angle, cos_angle);

  if (angle < kSmallAngle) return w;
  if (cos_angle > -0.5) return w * (angle / sin_angle);

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part, (R + R^T)/2 - cos I = (1 - cos) a a^T.
  const Mat3 aat =
      (0.5 * (rotation + rotation.transpose()) - cos_angle * Mat3::Identity()) /
      (1.0 - cos_angle);
  int col = 0;
  aat.diagonal().maxCoeff(&col);
  Vec3 axis = aat.col(col).normalized();
  if (axis.dot(w) < 0.0) axis = -axis;
  return axis * angle;
}

Mat3 so3_left_jacobian(const Vec3& theta) {
  const double angle2 = theta.squaredNorm();
  const double angle = std::sqrt(angle2);
  const Mat3 k = skew(theta);
  double a;
  double b;
  if (angle < 1e-5) {
    a = 0.5 - angle2 / 24.0;
    b = 1.0 / 6.0 - angle2 / 120.0;
  } else {
    a = (1.0 - std::cos(angle)) / angle2;
    b = (angle - std::sin(angle)) / (angle2 * angle);
  }
  return Mat3::Identity() + a * k + b * k * k;
}

Mat3 so3_left_jacobian_inverse(const Vec3& theta) {
  const double angle2 = theta.squaredNorm();
  const double angle = std::sqrt(angle2);
  const Mat3 k = skew(theta);
  double c;
  if (angle < 1e-5) {
    c = 1.0 / 12.0 + angle2 / 720.0;
  } else {
    const double half = 0.5 * angle;
    c = 1.0 / angle2 - std::cos(half) / (std::sin(half) * 2.0 * angle);
  }
  return Mat3::Identity() - 0.5 * k + c * k * k;
}

Isometry3 exp_se3(const Twist6& xi) {
  return {exp_so3(xi.theta), so3_left_jacobian(xi.theta) * xi.rho};
}

Twist6 log_se3(const Isometry3& x) {
  const Vec3 theta = log_so3(x.rotation());
  return {so3_left_jacobian_inverse(theta) * x.translation(), theta};
}

SymEigen3 eig_sym3(const SymMat3& m) {
  Eigen::SelfAdjointEigenSolver<Mat3> solver(m.matrix());
  SymEigen3 out{solver.eigenvalues(), solver.eigenvectors()};
  for (int i = 0; i < 3; ++i) {
    auto col = out.vectors.col(i);
    int idx = 0;
    col.cwiseAbs().maxCoeff(&idx);
    if (col(idx) < 0.0) col = -col;
  }
  return out;
}

namespace {

// Single-pass Welford accumulation of mean and scatter.
struct MomentAccumulator {
  std::size_t n = 0;
  Vec3 mean = Vec3::Zero();
  Mat3 scatter = Mat3::Zero();

  void add(const Vec3& p) {
    ++n;
    const Vec3 delta = p - mean;
    mean += delta / static_cast<double>(n);
    scatter.noalias() += delta * (p - mean).transpose();
  }

  MeanCovariance finish() const {
    if (n == 0) throw std::invalid_argument("mean_and_covariance: empty input");
    const Mat3 cov = scatter / static_cast<double>(n);
    return {mean, SymMat3(0.5 * (cov + cov.transpose()))};
  }
};

}  // namespace

MeanCovariance mean_and_covariance(std::span<const Point3> points) {
  MomentAccumulator acc;
  for (const auto& p : points) acc.add(p);
  return acc.finish();
}

MeanCovariance mean_and_covariance(const PointCloud& cloud) {
  return mean_and_covariance(std::span<const Point3>(cloud.points));
}

MeanCovariance mean_and_covariance(std::span<const Point3> points,
                                   std::span<const std::uint32_t> indices) {
  MomentAccumulator acc;
  for (auto i : indices) acc.add(points[i]);
  return acc.finish();
}

}  // namespace madlo
