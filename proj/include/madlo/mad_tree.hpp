#pragma once

// PCA-split kd-tree. Each node splits its points with the plane through the
// node mean whose normal is the direction of maximum spread; leaves are small
// planar patches carrying a mean and a surface normal. The whole tree can be
// moved by an isometry without rebuilding, and a single root-to-leaf descent
// with the build predicate serves as the nearest-neighbor query.

#include "madlo/geometry.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace madlo {

struct TreeParams {
  double b_max = 0.2;  ///< leaves stop splitting when their largest extent is below this
  double b_min = 0.1;  ///< nodes thinner than this propagate their normal downwards

  void validate() const;
};

struct KdNode {
  static constexpr std::int32_t kNone = -1;

  Point3 mu = Point3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 direction = Vec3::UnitX();
  Vec3 bbox = Vec3::Zero();  ///< oriented extents b0 <= b1 <= b2
  std::int32_t left = kNone;
  std::int32_t right = kNone;
  std::uint32_t num_points = 0;
  bool valid_normal = false;

  [[nodiscard]] bool is_leaf() const { return left == kNone; }
};

/// Descent predicate shared by construction and search: true means "right".
/// Ties go left.
[[nodiscard]] inline bool goes_right(const KdNode& node, const Point3& p) {
  return node.direction.dot(p - node.mu) > 0.0;
}

class KdTree {
 public:
  /// Throws std::invalid_argument for an empty cloud or non-finite points.
  static KdTree build(const PointCloud& cloud, const TreeParams& params);

  [[nodiscard]] const KdNode& root() const { return nodes_.front(); }
  [[nodiscard]] const KdNode& node(std::int32_t index) const { return nodes_[index]; }
  [[nodiscard]] const std::vector<KdNode>& nodes() const { return nodes_; }
  [[nodiscard]] std::size_t num_nodes() const { return nodes_.size(); }
  [[nodiscard]] std::size_t num_leaves() const { return leaf_count_; }
  [[nodiscard]] const Isometry3& pose_applied() const { return pose_applied_; }
  [[nodiscard]] std::size_t depth() const;

  /// Single descent from the root; no backtracking.
  [[nodiscard]] const KdNode& search_leaf(const Point3& query) const;

  /// Moves every node by `x`. Extents are unchanged.
  void transform(const Isometry3& x);

  /// Leaves in left-to-right order.
  [[nodiscard]] std::vector<KdNode> collect_leaves() const;

 private:
  KdTree() = default;

  std::vector<KdNode> nodes_;
  std::size_t leaf_count_ = 0;
  Isometry3 pose_applied_;
};

[[nodiscard]] inline KdTree build_tree(const PointCloud& cloud, const TreeParams& params) {
  return KdTree::build(cloud, params);
}
[[nodiscard]] inline const KdNode& search_leaf(const KdTree& tree, const Point3& query) {
  return tree.search_leaf(query);
}
inline void transform_tree(KdTree& tree, const Isometry3& x) { tree.transform(x); }
[[nodiscard]] inline std::vector<KdNode> collect_leaves(const KdTree& tree) {
  return tree.collect_leaves();
}

/// CSV rows `mu_x,mu_y,mu_z,n_x,n_y,n_z,num_points`, with header.
void write_leaves_csv(const KdTree& tree, std::ostream& out);

}  // namespace madlo
