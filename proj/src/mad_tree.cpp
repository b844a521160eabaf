#include "madlo/mad_tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace madlo {

void TreeParams::validate() const {
  if (!(b_min > 0.0 && b_min < b_max)) {
    throw std::invalid_argument("TreeParams: require 0 < b_min < b_max");
  }
}

namespace {

constexpr std::uint32_t kMinPointsForNormal = 3;

class Builder {
 public:
  Builder(const std::vector<Point3>& points, const TreeParams& params,
          std::vector<KdNode>& nodes)
      : points_(points), params_(params), nodes_(nodes) {}

  std::size_t leaves() const { return leaves_; }

  std::int32_t build(std::span<std::uint32_t> indices, bool inherits_normal,
                     const Vec3& inherited_normal) {
    const auto self = static_cast<std::int32_t>(nodes_.size());
    nodes_.emplace_back();

    const MeanCovariance stats = mean_and_covariance(points_, indices);
    const SymEigen3 eig = eig_sym3(stats.covariance);

    KdNode node;
    node.mu = stats.mean;
    node.normal = eig.vectors.col(0);
    node.direction = eig.vectors.col(2);
    node.num_points = static_cast<std::uint32_t>(indices.size());
    node.valid_normal = indices.size() >= kMinPointsForNormal;
    node.bbox = oriented_extents(indices, stats.mean, eig.vectors);

    const bool small = node.bbox(2) < params_.b_max;
    if (small || indices.size() < kMinPointsForNormal) {
      return finish_leaf(self, node, inherits_normal, inherited_normal);
    }

    Vec3 propagated = inherited_normal;
    if (!inherits_normal && node.bbox(0) < params_.b_min) {
      inherits_normal = true;
      propagated = node.normal;
    }

    const auto mid = std::partition(indices.begin(), indices.end(), [&](std::uint32_t i) {
      return !goes_right(node, points_[i]);
    });
    const auto n_left = static_cast<std::size_t>(mid - indices.begin());
    if (n_left == 0 || n_left == indices.size()) {
      // Can only happen through rounding on near-degenerate spreads.
      return finish_leaf(self, node, inherits_normal, propagated);
    }

    node.left = build(indices.first(n_left), inherits_normal, propagated);
    node.right = build(indices.subspan(n_left), inherits_normal, propagated);
    nodes_[self] = node;
    return self;
  }

 private:
  std::int32_t finish_leaf(std::int32_t self, KdNode& node, bool inherits_normal,
                           const Vec3& inherited_normal) {
    if (inherits_normal) {
      node.normal = inherited_normal;
      node.valid_normal = true;
    }
    nodes_[self] = node;
    ++leaves_;
    return self;
  }

  Vec3 oriented_extents(std::span<const std::uint32_t> indices, const Vec3& mean,
                        const Mat3& basis) const {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    const Mat3 rt = basis.transpose();
    for (auto i : indices) {
      const Vec3 local = rt * (points_[i] - mean);
      lo = lo.cwiseMin(local);
      hi = hi.cwiseMax(local);
    }
    Vec3 extents = hi - lo;
    // Eigenvalues ascend, but extents need not follow exactly; keep b0<=b1<=b2.
    std::sort(extents.data(), extents.data() + 3);
    return extents;
  }

  const std::vector<Point3>& points_;
  const TreeParams& params_;
  std::vector<KdNode>& nodes_;
  std::size_t leaves_ = 0;
};

}  // namespace

KdTree KdTree::build(const PointCloud& cloud, const TreeParams& params) {
  params.validate();
  if (cloud.empty()) throw std::invalid_argument("build_tree: empty cloud");
  for (const auto& p : cloud.points) {
    if (!p.allFinite()) throw std::invalid_argument("build_tree: non-finite point");
  }

  std::vector<std::uint32_t> indices(cloud.size());
  std::iota(indices.begin(), indices.end(), 0U);

  KdTree tree;
  tree.nodes_.reserve(2 * cloud.size() / 3 + 1);
  Builder builder(cloud.points, params, tree.nodes_);
  builder.build(indices, false, Vec3::Zero());
  tree.leaf_count_ = builder.leaves();
  tree.nodes_.shrink_to_fit();
  return tree;
}

std::size_t KdTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    const auto [idx, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const KdNode& n = nodes_[idx];
    if (!n.is_leaf()) {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return best;
}

const KdNode& KdTree::search_leaf(const Point3& query) const {
  const KdNode* n = &nodes_.front();
  while (!n->is_leaf()) {
    n = &nodes_[goes_right(*n, query) ? n->right : n->left];
  }
  return *n;
}

void KdTree::transform(const Isometry3& x) {
  const Mat3& r = x.rotation();
  const Vec3& t = x.translation();
  for (auto& n : nodes_) {
    n.mu = r * n.mu + t;
    n.normal = r * n.normal;
    n.direction = r * n.direction;
  }
  pose_applied_ = x * pose_applied_;
}

std::vector<KdNode> KdTree::collect_leaves() const {
  std::vector<KdNode> out;
  out.reserve(leaf_count_);
  std::vector<std::int32_t> stack{0};
  while (!stack.empty()) {
    const KdNode& n = nodes_[stack.back()];
    stack.pop_back();
    if (n.is_leaf()) {
      out.push_back(n);
    } else {
      stack.push_back(n.right);
      stack.push_back(n.left);
    }
  }
  return out;
}

void write_leaves_csv(const KdTree& tree, std::ostream& out) {
  out << "mu_x,mu_y,mu_z,n_x,n_y,n_z,num_points\n";
  const auto old_precision = out.precision(17);
  for (const auto& leaf : tree.collect_leaves()) {
    out << leaf.mu.x() << ',' << leaf.mu.y() << ',' << leaf.mu.z() << ','
        << leaf.normal.x() << ',' << leaf.normal.y() << ',' << leaf.normal.z() << ','
        << leaf.num_points << '\n';
  }
  out.precision(old_precision);
}

}  // namespace madlo
