#include "madlo/registration.hpp"

#include "madlo/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace madlo {

void RegistrationParams::validate() const {
  if (!(b_max > 0.0)) throw std::invalid_argument("RegistrationParams: b_max must be positive");
  if (!(b_ratio > 0.0)) throw std::invalid_argument("RegistrationParams: b_ratio must be positive");
  if (!(rho_ker > 0.0)) throw std::invalid_argument("RegistrationParams: rho_ker must be positive");
  if (max_iterations <= 0 && !std::isfinite(time_budget)) {
    throw std::invalid_argument("RegistrationParams: need max_iterations or a finite time budget");
  }
  if (!(time_budget >= 0.0)) throw std::invalid_argument("RegistrationParams: negative time budget");
}

double huber_weight(double e, double rho_ker) {
  const double a = std::abs(e);
  return a <= rho_ker ? 1.0 : rho_ker / a;
}

double huber_cost(double e, double rho_ker) {
  const double a = std::abs(e);
  return a <= rho_ker ? 0.5 * e * e : rho_ker * (a - 0.5 * rho_ker);
}

MatchPair associate(const KdNode& query_leaf, const KdTree& model, const Isometry3& pose,
                    const RegistrationParams& params) {
  MatchPair pair;
  pair.query = &query_leaf;
  pair.query_world = pose * query_leaf.mu;
  pair.model = &model.search_leaf(pair.query_world);
  pair.distance = (pair.model->mu - pair.query_world).norm();
  pair.accepted = pair.model->valid_normal &&
                  pair.distance <= gate_radius(query_leaf.mu, params.b_max, params.b_ratio);
  return pair;
}

ResidualJacobian point_to_plane_residual_jacobian(const MatchPair& pair, const Isometry3& pose) {
  const Vec3& n = pair.model->normal;
  const Vec3 p = pose * pair.query->mu;
  ResidualJacobian out;
  out.error = n.dot(p - pair.model->mu);
  out.jacobian.head<3>() = n.transpose();
  out.jacobian.tail<3>() = p.cross(n).transpose();  // n^T (-[p]x)
  return out;
}

namespace {

struct TreeAccumulator {
  Mat6 h = Mat6::Zero();
  Vec6 b = Vec6::Zero();
  double cost = 0.0;
  double abs_error = 0.0;
  std::size_t residuals = 0;
  std::vector<char> matched;
};

void accumulate(const KdTree& tree, const std::vector<KdNode>& leaves, const Isometry3& pose,
                const RegistrationParams& params, TreeAccumulator& acc) {
  acc = TreeAccumulator{};
  acc.matched.assign(leaves.size(), 0);
  for (std::size_t j = 0; j < leaves.size(); ++j) {
    const MatchPair pair = associate(leaves[j], tree, pose, params);
    if (!pair.accepted) continue;
    const ResidualJacobian rj = point_to_plane_residual_jacobian(pair, pose);
    const double w = huber_weight(rj.error, params.rho_ker);
    acc.h.noalias() += w * rj.jacobian.transpose() * rj.jacobian;
    acc.b.noalias() += w * rj.jacobian.transpose() * rj.error;
    acc.cost += huber_cost(rj.error, params.rho_ker);
    acc.abs_error += std::abs(rj.error);
    ++acc.residuals;
    acc.matched[j] = 1;
  }
}

void check_conditioning(const Mat6& h, double max_condition, const RegistrationResult& partial) {
  Eigen::SelfAdjointEigenSolver<Mat6> solver(h, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  const double hi = ev(5);
  const double lo = ev(0);
  if (!(hi > 0.0) || lo <= 0.0 || hi / lo > max_condition) {
    throw DegenerateRegistration(
        "icp: rank-deficient system (eigenvalues " + std::to_string(lo) + " .. " +
            std::to_string(hi) + ")",
        partial);
  }
}

}  // namespace

RegistrationResult icp(std::span<const std::shared_ptr<const KdTree>> model,
                       const KdTree& scan_tree, const Isometry3& guess,
                       const RegistrationParams& params) {
  params.validate();
  if (model.empty()) throw std::invalid_argument("icp: empty model");

  std::vector<KdNode> leaves;
  for (auto& leaf : scan_tree.collect_leaves()) {
    if (leaf.valid_normal) leaves.push_back(leaf);
  }

  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const int max_iterations =
      params.max_iterations > 0 ? params.max_iterations : std::numeric_limits<int>::max();

  RegistrationResult result;
  result.pose = guess;
  std::vector<TreeAccumulator> partial(model.size());
  std::vector<char> matched(leaves.size());

  for (int it = 0; it < max_iterations; ++it) {
    if (it > 0) {
      const std::chrono::duration<double> elapsed = Clock::now() - start;
      if (elapsed.count() >= params.time_budget) break;
    }

    const Isometry3 pose = result.pose;
    parallel_for(model.size(), params.workers, [&](std::size_t t) {
      accumulate(*model[t], leaves, pose, params, partial[t]);
    });

    // Reduce in tree order so the sums are independent of the worker count.
    Mat6 h = Mat6::Zero();
    Vec6 b = Vec6::Zero();
    double cost = 0.0;
    double abs_error = 0.0;
    std::size_t residuals = 0;
    std::fill(matched.begin(), matched.end(), 0);
    for (const auto& acc : partial) {
      h += acc.h;
      b += acc.b;
      cost += acc.cost;
      abs_error += acc.abs_error;
      residuals += acc.residuals;
      for (std::size_t j = 0; j < matched.size(); ++j) matched[j] |= acc.matched[j];
    }
    const auto matched_leaves =
        static_cast<double>(std::count(matched.begin(), matched.end(), char{1}));

    result.information = 0.5 * (h + h.transpose());
    result.matched_fraction = leaves.empty() ? 0.0 : matched_leaves / double(leaves.size());
    result.iterations = it + 1;
    result.num_residuals = residuals;
    result.mean_error = residuals ? abs_error / double(residuals) : 0.0;
    result.cost_history.push_back(cost);

    if (residuals == 0) throw DegenerateRegistration("icp: no accepted matches", result);
    check_conditioning(result.information, params.max_condition, result);

    Mat6 a = result.information;
    a.diagonal().array() += params.damping * a.trace() / 6.0;
    const Vec6 xi = -a.ldlt().solve(b);
    result.pose = exp_se3(Twist6(xi)) * result.pose;
    if (xi.norm() < params.convergence_eps) {
      result.converged = true;
      break;
    }
  }
  return result;
}

RegistrationResult icp(const KdTree& model, const KdTree& scan_tree, const Isometry3& guess,
                       const RegistrationParams& params) {
  const std::shared_ptr<const KdTree> view(std::shared_ptr<const KdTree>{}, &model);
  return icp(std::span(&view, 1), scan_tree, guess, params);
}

}  // namespace madlo
