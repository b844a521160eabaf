#include "madlo/mad_tree.hpp"

#include "simulator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace madlo {
namespace {

const TreeParams kParams{};

PointCloud uniform_box(std::mt19937_64& rng, std::size_t n, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

// Independent descent written directly against the raw predicate.
std::int32_t oracle_descent(const KdTree& tree, std::int32_t idx, const Point3& q) {
  const KdNode& n = tree.node(idx);
  if (n.left == KdNode::kNone && n.right == KdNode::kNone) return idx;
  const double side = n.direction.x() * (q.x() - n.mu.x()) + n.direction.y() * (q.y() - n.mu.y()) +
                      n.direction.z() * (q.z() - n.mu.z());
  return oracle_descent(tree, side > 0.0 ? n.right : n.left, q);
}

std::int32_t index_of(const KdTree& tree, const KdNode& n) {
  return static_cast<std::int32_t>(&n - tree.nodes().data());
}

TEST(BuildTree, PlanePatchLeavesHavePlaneNormal) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c;
  for (int i = 0; i < 100; ++i) c.points.emplace_back(u(rng), u(rng), 0.0);
  const KdTree tree = build_tree(c, kParams);
  const auto leaves = collect_leaves(tree);
  EXPECT_GT(leaves.size(), 1U);
  for (const auto& leaf : leaves) {
    if (!leaf.valid_normal) continue;
    EXPECT_LT(std::abs(std::abs(leaf.normal.z()) - 1.0), 1e-6);
  }
}

TEST(BuildTree, TinyClusterIsSingleLeaf) {
  PointCloud c;
  c.points = {{0.01, 0.0, 0.0}, {0.0, 0.02, 0.0}, {0.0, 0.0, 0.03}};
  const KdTree tree = build_tree(c, kParams);
  ASSERT_EQ(tree.num_nodes(), 1U);
  EXPECT_TRUE(tree.root().is_leaf());
  EXPECT_LT((tree.root().mu - Vec3(0.01, 0.02, 0.03) / 3.0).norm(), 1e-15);
  EXPECT_TRUE(tree.root().valid_normal);
}

TEST(BuildTree, FewPointLeavesHaveNoNormalUnlessInherited) {
  PointCloud c;
  c.points = {{0, 0, 0}, {1, 0, 0}};
  const KdTree tree = build_tree(c, kParams);
  EXPECT_TRUE(tree.root().is_leaf());
  EXPECT_FALSE(tree.root().valid_normal);
  EXPECT_EQ(tree.root().num_points, 2U);
}

TEST(BuildTree, ParallelPlanesNeverShareALeaf) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  PointCloud c;
  std::vector<int> tag;
  for (int i = 0; i < 20000; ++i) {
    const int t = i % 2;
    c.points.emplace_back(u(rng), u(rng), t == 0 ? 0.0 : 5.0);
    tag.push_back(t);
  }
  const KdTree tree = build_tree(c, kParams);
  std::map<const KdNode*, std::set<int>> seen;
  for (std::size_t i = 0; i < c.size(); ++i) seen[&tree.search_leaf(c.points[i])].insert(tag[i]);
  for (const auto& [leaf, tags] : seen) EXPECT_EQ(tags.size(), 1U);
}

TEST(BuildTree, DescentOfBuildPointsReproducesLeafCounts) {
  std::mt19937_64 rng(3);
  const PointCloud c = uniform_box(rng, 5000, 2.0);
  const KdTree tree = build_tree(c, kParams);
  std::map<const KdNode*, std::uint32_t> counts;
  for (const auto& p : c.points) ++counts[&tree.search_leaf(p)];
  std::size_t total = 0;
  for (const auto& [leaf, n] : counts) {
    EXPECT_EQ(leaf->num_points, n);
    total += n;
  }
  EXPECT_EQ(total, c.size());
  EXPECT_EQ(counts.size(), tree.num_leaves());
}

TEST(BuildTree, NodeInvariants) {
  std::mt19937_64 rng(4);
  const PointCloud c = uniform_box(rng, 3000, 1.5);
  const KdTree tree = build_tree(c, kParams);
  for (const auto& n : tree.nodes()) {
    EXPECT_EQ(n.left == KdNode::kNone, n.right == KdNode::kNone);
    EXPECT_LE(n.bbox(0), n.bbox(1));
    EXPECT_LE(n.bbox(1), n.bbox(2));
    if (n.is_leaf()) EXPECT_TRUE(n.bbox(2) < kParams.b_max || n.num_points < 3);
    if (n.valid_normal) {
      EXPECT_NEAR(n.normal.norm(), 1.0, 1e-9);
      EXPECT_NEAR(n.direction.norm(), 1.0, 1e-9);
    }
    if (!n.is_leaf()) {
      EXPECT_EQ(tree.node(n.left).num_points + tree.node(n.right).num_points, n.num_points);
    }
  }
}

TEST(BuildTree, FlatAncestorNormalPropagatesToEveryLeaf) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> z(-0.02, 0.02);
  PointCloud c;
  for (int i = 0; i < 3000; ++i) c.points.emplace_back(u(rng), u(rng), z(rng));
  const KdTree tree = build_tree(c, kParams);
  ASSERT_LT(tree.root().bbox(0), kParams.b_min);
  for (const auto& leaf : collect_leaves(tree)) {
    EXPECT_TRUE(leaf.valid_normal);
    EXPECT_EQ(leaf.normal, tree.root().normal);
  }
}

TEST(BuildTree, NoisyPlaneNormalQuality) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::normal_distribution<double> noise(0.0, 0.01);
  // 500 pts/m^2 on a tilted plane, plus a second perpendicular plane so the
  // root is not flat and leaf normals come from their own PCA.
  const Vec3 true_normal = Vec3(0.3, -0.2, 1.0).normalized();
  const Vec3 e1 = true_normal.unitOrthogonal();
  const Vec3 e2 = true_normal.cross(e1);
  PointCloud c;
  for (int i = 0; i < 8000; ++i) {
    c.points.push_back(e1 * u(rng) + e2 * u(rng) + true_normal * noise(rng));
  }
  for (int i = 0; i < 8000; ++i) {
    c.points.push_back(e1 * (4.0 + noise(rng)) + e2 * u(rng) + true_normal * u(rng));
  }
  const KdTree tree = build_tree(c, kParams);
  int good = 0;
  int total = 0;
  for (const auto& leaf : collect_leaves(tree)) {
    // Only leaves on the first plane, away from the fold.
    if (!leaf.valid_normal || std::abs(leaf.mu.dot(true_normal)) > 0.05) continue;
    if (leaf.mu.dot(e1) > 3.7) continue;
    ++total;
    const double angle = std::acos(std::min(1.0, std::abs(leaf.normal.dot(true_normal))));
    good += angle < 5.0 * std::numbers::pi / 180.0;
  }
  ASSERT_GT(total, 50);
  EXPECT_GE(good, 0.95 * total) << good << " of " << total;
}

TEST(BuildTree, DepthBoundOnUniformClouds) {
  std::mt19937_64 rng(7);
  for (std::size_t n : {1000U, 10000U, 50000U}) {
    const double half = 5.0;
    const PointCloud c = uniform_box(rng, n, half);
    const KdTree tree = build_tree(c, kParams);
    const double bound = std::ceil(std::log2(double(n))) +
                         std::ceil(std::log2(2.0 * half * std::sqrt(3.0) / kParams.b_max)) + 8;
    EXPECT_LE(double(tree.depth()), bound) << n;
  }
}

TEST(BuildTree, Errors) {
  EXPECT_THROW((void)build_tree(PointCloud{}, kParams), std::invalid_argument);
  PointCloud c;
  c.points = {{0, 0, 0}, {1, std::numeric_limits<double>::infinity(), 0}};
  EXPECT_THROW((void)build_tree(c, kParams), std::invalid_argument);
  c.points = {{0, 0, 0}};
  EXPECT_THROW((void)build_tree(c, TreeParams{0.1, 0.2}), std::invalid_argument);
}

TEST(SearchLeaf, TieGoesLeft) {
  KdNode n;
  n.mu = Vec3(1, 2, 3);
  n.direction = Vec3::UnitX();
  EXPECT_FALSE(goes_right(n, Vec3(1, 50, -7)));
  EXPECT_TRUE(goes_right(n, Vec3(1 + 1e-12, 0, 0)));
}

TEST(SearchLeaf, ClusterMeansFindTheirOwnLeaf) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  PointCloud c;
  std::vector<Vec3> centers;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) centers.emplace_back(2.0 * i, 2.0 * j, (i * j) % 3 * 2.0);
  for (const auto& ctr : centers)
    for (int k = 0; k < 20; ++k) c.points.push_back(ctr + Vec3(jitter(rng), jitter(rng), jitter(rng)));
  const KdTree tree = build_tree(c, kParams);
  // A split plane may cut through a cluster, so only a lower bound holds.
  EXPECT_GE(tree.num_leaves(), centers.size());
  for (const auto& leaf : collect_leaves(tree)) {
    EXPECT_EQ(tree.search_leaf(leaf.mu).mu, leaf.mu);
  }
}

TEST(SearchLeaf, SingleLeafTreeReturnsRoot) {
  PointCloud c;
  c.points = {{0, 0, 0}, {0.01, 0, 0}, {0, 0.01, 0}};
  const KdTree tree = build_tree(c, kParams);
  std::mt19937_64 rng(9);
  const PointCloud q = uniform_box(rng, 50, 100.0);
  for (const auto& p : q.points) EXPECT_EQ(&search_leaf(tree, p), &tree.root());
}

TEST(SearchLeaf, MatchesIndependentDescentOracle) {
  std::mt19937_64 rng(10);
  const PointCloud c = uniform_box(rng, 8000, 3.0);
  const KdTree tree = build_tree(c, kParams);
  const PointCloud q = uniform_box(rng, 1000, 4.0);
  for (const auto& p : q.points) {
    const auto expected = oracle_descent(tree, 0, p);
    EXPECT_EQ(index_of(tree, search_leaf(tree, p)), expected);
    EXPECT_EQ(&search_leaf(tree, p), &search_leaf(tree, p));
  }
}

TEST(TransformTree, IdentityKeepsFieldsBitwise) {
  std::mt19937_64 rng(11);
  KdTree tree = build_tree(uniform_box(rng, 2000, 2.0), kParams);
  const auto before = tree.nodes();
  transform_tree(tree, Isometry3::identity());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i].mu, tree.nodes()[i].mu);
    EXPECT_EQ(before[i].normal, tree.nodes()[i].normal);
    EXPECT_EQ(before[i].direction, tree.nodes()[i].direction);
  }
}

TEST(TransformTree, InverseRestoresFields) {
  std::mt19937_64 rng(12);
  KdTree tree = build_tree(uniform_box(rng, 2000, 2.0), kParams);
  const auto before = tree.nodes();
  const Isometry3 x = sim::random_isometry(rng, 3.0, 20.0);
  transform_tree(tree, x);
  EXPECT_LT((tree.pose_applied().matrix() - x.matrix()).norm(), 1e-15);
  transform_tree(tree, x.inverse());
  for (std::size_t i = 0; i < before.size(); ++i) {
    const KdNode& a = before[i];
    const KdNode& b = tree.nodes()[i];
    EXPECT_LT((a.mu - b.mu).norm(), 1e-9);
    EXPECT_LT((a.normal - b.normal).norm(), 1e-9);
    EXPECT_LT((a.direction - b.direction).norm(), 1e-9);
    EXPECT_EQ(a.bbox, b.bbox);
  }
}

TEST(TransformTree, SearchIsEquivariant) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const PointCloud c = uniform_box(rng, 2000, 3.0);
    const KdTree tree = build_tree(c, kParams);
    KdTree moved = tree;
    const Isometry3 x = sim::random_isometry(rng, std::numbers::pi, 30.0);
    transform_tree(moved, x);
    const PointCloud q = uniform_box(rng, 10, 3.5);
    for (const auto& p : q.points) {
      const KdNode& a = search_leaf(tree, p);
      const KdNode& b = search_leaf(moved, x * p);
      EXPECT_EQ(index_of(tree, a), index_of(moved, b));
      EXPECT_LT((b.mu - x * a.mu).norm(), 1e-9);
    }
  }
}

TEST(CollectLeaves, Structure) {
  PointCloud single;
  single.points = {{0, 0, 0}, {0.05, 0, 0}, {0, 0.05, 0}};
  EXPECT_EQ(collect_leaves(build_tree(single, kParams)).size(), 1U);

  PointCloud two;
  for (double x : {-1.0, 1.0})
    for (int k = 0; k < 5; ++k) two.points.emplace_back(x + 0.01 * k, 0.005 * k, 0.0);
  const KdTree tree = build_tree(two, kParams);
  const auto leaves = collect_leaves(tree);
  ASSERT_EQ(leaves.size(), 2U);
  EXPECT_EQ(leaves[0].mu, tree.node(tree.root().left).mu);
  EXPECT_EQ(leaves[1].mu, tree.node(tree.root().right).mu);
}

TEST(CollectLeaves, ConservesPoints) {
  std::mt19937_64 rng(14);
  for (std::size_t n : {1U, 2U, 17U, 999U, 20000U}) {
    const KdTree tree = build_tree(uniform_box(rng, n, 4.0), kParams);
    std::size_t total = 0;
    const auto leaves = collect_leaves(tree);
    for (const auto& l : leaves) total += l.num_points;
    EXPECT_EQ(total, n);
    EXPECT_EQ(leaves.size(), tree.num_leaves());
  }
}

TEST(LeafDump, CsvHasOneRowPerLeaf) {
  std::mt19937_64 rng(15);
  const KdTree tree = build_tree(uniform_box(rng, 500, 1.0), kParams);
  std::ostringstream out;
  write_leaves_csv(tree, out);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("mu_x,mu_y,mu_z,n_x,n_y,n_z,num_points\n", 0), 0U);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), static_cast<long>(tree.num_leaves() + 1));
}

}  // namespace
}  // namespace madlo
