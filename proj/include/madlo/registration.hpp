#pragma once

// Point-to-plane ICP of a scan tree against a forest of world-frame trees.

#include "madlo/geometry.hpp"
#include "madlo/mad_tree.hpp"

#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

namespace madlo {

struct RegistrationParams {
  double b_max = 0.2;     ///< leaf size, base of the association gate
  double b_ratio = 0.02;  ///< gate growth per meter of query range
  double rho_ker = 0.1;   ///< Huber threshold, meters
  int max_iterations = 15;
  /// Anytime cap on ICP wall time, seconds. Infinite means iteration-bound only.
  double time_budget = std::numeric_limits<double>::infinity();
  /// Levenberg term is damping * trace(H) / 6.
  double damping = 1e-6;
  double convergence_eps = 1e-6;
  double max_condition = 1e12;
  std::size_t workers = 1;

  void validate() const;
};

struct MatchPair {
  const KdNode* query = nullptr;
  const KdNode* model = nullptr;
  Point3 query_world = Point3::Zero();
  double distance = 0.0;
  bool accepted = false;
};

struct ResidualJacobian {
  double error = 0.0;
  Eigen::Matrix<double, 1, 6> jacobian;  ///< columns (translation | rotation)
};

struct RegistrationResult {
  Isometry3 pose;
  Mat6 information = Mat6::Zero();
  double matched_fraction = 0.0;
  int iterations = 0;
  double mean_error = 0.0;
  std::size_t num_residuals = 0;
  bool converged = false;
  std::vector<double> cost_history;  ///< robust cost at each iteration's linearization point
};

/// Raised when the system matrix is rank deficient; carries the iterate
/// reached so far.
class DegenerateRegistration : public std::runtime_error {
 public:
  DegenerateRegistration(const std::string& what, RegistrationResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const RegistrationResult& partial() const { return partial_; }

 private:
  RegistrationResult partial_;
};

using Forest = std::vector<std::shared_ptr<const KdTree>>;

[[nodiscard]] inline double gate_radius(const Point3& mu_q, double b_max, double b_ratio) {
  return b_max + mu_q.norm() * b_ratio;
}

/// IRLS weight of the Huber loss.
[[nodiscard]] double huber_weight(double e, double rho_ker);
[[nodiscard]] double huber_cost(double e, double rho_ker);

/// Transforms the sensor-frame query leaf by `pose`, descends `model` and
/// gates the result.
[[nodiscard]] MatchPair associate(const KdNode& query_leaf, const KdTree& model,
                                  const Isometry3& pose, const RegistrationParams& params);

/// e = n_l . (X mu_q - mu_l) and its derivative for a left increment exp(xi) * X.
[[nodiscard]] ResidualJacobian point_to_plane_residual_jacobian(const MatchPair& pair,
                                                                const Isometry3& pose);

/// Throws DegenerateRegistration for a rank-deficient system and
/// std::invalid_argument for an empty model.
[[nodiscard]] RegistrationResult icp(std::span<const std::shared_ptr<const KdTree>> model,
                                     const KdTree& scan_tree, const Isometry3& guess,
                                     const RegistrationParams& params);
[[nodiscard]] RegistrationResult icp(const KdTree& model, const KdTree& scan_tree,
                                     const Isometry3& guess, const RegistrationParams& params);

}  // namespace madlo
