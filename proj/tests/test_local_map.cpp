#include "madlo/local_map.hpp"

#include <gtest/gtest.h>

#include <Eigen/LU>

#include <algorithm>
#include <random>
#include <sstream>

namespace madlo {
namespace {

std::shared_ptr<const KdTree> tiny_tree(double offset) {
  PointCloud c;
  c.points = {{offset, 0, 0}, {offset + 0.01, 0, 0}, {offset, 0.01, 0}};
  return std::make_shared<KdTree>(KdTree::build(c, TreeParams{}));
}

Keyframe make_keyframe(std::size_t index, const Mat6& h) {
  Keyframe kf;
  kf.tree = tiny_tree(static_cast<double>(index));
  kf.information = h;
  kf.pose = Isometry3::from_translation(Vec3(double(index), 0, 0));
  kf.frame_index = index;
  return kf;
}

Mat6 random_spd(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat6 a;
  for (int k = 0; k < 36; ++k) a.data()[k] = u(rng);
  return a * a.transpose() + 0.1 * Mat6::Identity();
}

TEST(LocalMap, PushOntoEmptyQueue) {
  LocalMap map;
  map.push_candidate(make_keyframe(0, Mat6::Identity()));
  EXPECT_EQ(map.candidates().size(), 1u);
}

TEST(LocalMap, CandidateQueueIsBounded) {
  LocalMap map(8, 64);
  for (std::size_t i = 0; i < 65; ++i) map.push_candidate(make_keyframe(i, Mat6::Identity()));
  EXPECT_EQ(map.candidates().size(), 64u);
  EXPECT_EQ(map.candidates().front().frame_index, 1u);
}

TEST(LocalMap, CandidatesKeepTheirInformation) {
  std::mt19937_64 rng(1);
  const Mat6 h = random_spd(rng);
  LocalMap map;
  map.push_candidate(make_keyframe(3, h));
  EXPECT_EQ(map.candidates().front().information, h);
}

TEST(SelectBest, SingleCandidate) {
  const std::vector<Keyframe> q{make_keyframe(4, Mat6::Identity())};
  EXPECT_EQ(select_best(q).frame_index, 4u);
}

TEST(SelectBest, LargerDeterminantWins) {
  const std::vector<Keyframe> q{make_keyframe(1, 2.0 * Mat6::Identity()),
                                make_keyframe(2, Mat6::Identity())};
  EXPECT_EQ(select_best(q).frame_index, 1u);
}

TEST(SelectBest, TiesGoToMostRecent) {
  const std::vector<Keyframe> q{make_keyframe(5, Mat6::Identity()),
                                make_keyframe(9, Mat6::Identity()),
                                make_keyframe(7, Mat6::Identity())};
  EXPECT_EQ(select_best(q).frame_index, 9u);
}

TEST(SelectBest, MatchesLuDeterminantOracle) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Keyframe> q;
    std::size_t oracle = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < 3; ++i) {
      q.push_back(make_keyframe(i, random_spd(rng)));
      const double det = Eigen::FullPivLU<Mat6>(q.back().information).determinant();
      if (det > best) {
        best = det;
        oracle = i;
      }
    }
    EXPECT_EQ(select_best(q).frame_index, oracle);
  }
}

TEST(SelectBest, EmptyQueueThrows) {
  EXPECT_THROW((void)select_best(std::vector<Keyframe>{}), std::invalid_argument);
}

TEST(SelectBest, PermutationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<Keyframe> q;
  for (std::size_t i = 0; i < 10; ++i) q.push_back(make_keyframe(i, random_spd(rng)));
  q.push_back(make_keyframe(20, q[4].information));
  const std::size_t expected = select_best(q).frame_index;
  for (int k = 0; k < 50; ++k) {
    std::shuffle(q.begin(), q.end(), rng);
    EXPECT_EQ(select_best(q).frame_index, expected);
  }
}

TEST(SelectBest, DegenerateCandidateNeverWins) {
  std::vector<Keyframe> q{make_keyframe(1, Mat6::Identity()),
                          make_keyframe(2, 100.0 * Mat6::Identity())};
  q[1].degenerate = true;
  EXPECT_EQ(select_best(q).frame_index, 1u);
  Mat6 singular = Mat6::Identity();
  singular(5, 5) = 0.0;
  q[1] = make_keyframe(2, 1e6 * singular);
  EXPECT_EQ(select_best(q).frame_index, 1u);
}

TEST(LogDetSpd, MatchesDeterminant) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Mat6 h = random_spd(rng);
    EXPECT_NEAR(log_det_spd(h), std::log(Eigen::FullPivLU<Mat6>(h).determinant()), 1e-9);
  }
  EXPECT_EQ(log_det_spd(-Mat6::Identity()), -std::numeric_limits<double>::infinity());
}

TEST(MaybeUpdate, WellSupportedScanDoesNotUpdate) {
  LocalMap map;
  map.bootstrap(make_keyframe(0, Mat6::Identity()));
  map.push_candidate(make_keyframe(1, Mat6::Identity()));
  const Forest before = map.forest();
  EXPECT_FALSE(maybe_update(map, 0.9, 0.8));
  EXPECT_EQ(map.forest(), before);
  EXPECT_EQ(map.candidates().size(), 1u);
}

TEST(MaybeUpdate, PromotesMaxDeterminantAndEmptiesQueue) {
  LocalMap map;
  map.bootstrap(make_keyframe(0, Mat6::Identity()));
  map.push_candidate(make_keyframe(1, Mat6::Identity()));
  map.push_candidate(make_keyframe(2, 3.0 * Mat6::Identity()));
  map.push_candidate(make_keyframe(3, 2.0 * Mat6::Identity()));
  EXPECT_TRUE(maybe_update(map, 0.5, 0.8));
  EXPECT_TRUE(map.candidates().empty());
  ASSERT_EQ(map.keyframes().size(), 2u);
  EXPECT_EQ(map.keyframes().back().frame_index, 2u);
  EXPECT_EQ(map.forest().size(), 2u);
  EXPECT_EQ(map.forest().back(), map.keyframes().back().tree);
}

TEST(MaybeUpdate, ThresholdIsStrict) {
  LocalMap map;
  map.bootstrap(make_keyframe(0, Mat6::Identity()));
  map.push_candidate(make_keyframe(1, Mat6::Identity()));
  EXPECT_FALSE(maybe_update(map, 0.8, 0.8));
  EXPECT_TRUE(maybe_update(map, 0.7999, 0.8));
}

TEST(MaybeUpdate, EmptyQueueDoesNotUpdate) {
  LocalMap map;
  map.bootstrap(make_keyframe(0, Mat6::Identity()));
  EXPECT_FALSE(maybe_update(map, 0.1, 0.8));
  EXPECT_EQ(map.keyframes().size(), 1u);
}

TEST(MaybeUpdate, OnlyDegenerateCandidatesNeverPromote) {
  LocalMap map;
  map.bootstrap(make_keyframe(0, Mat6::Identity()));
  Keyframe bad = make_keyframe(1, Mat6::Identity());
  bad.degenerate = true;
  map.push_candidate(bad);
  EXPECT_FALSE(maybe_update(map, 0.1, 0.8));
  EXPECT_EQ(map.keyframes().size(), 1u);
}

TEST(MaybeUpdate, EvictsSmallestFrameIndexAtCapacity) {
  LocalMap map(3);
  map.bootstrap(make_keyframe(0, Mat6::Identity()));
  for (std::size_t i = 1; i <= 5; ++i) {
    map.push_candidate(make_keyframe(i, Mat6::Identity()));
    ASSERT_TRUE(maybe_update(map, 0.0, 0.8));
    EXPECT_LE(map.keyframes().size(), 3u);
  }
  std::vector<std::size_t> indices;
  for (const auto& kf : map.keyframes()) indices.push_back(kf.frame_index);
  EXPECT_EQ(indices, (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(map.forest().size(), 3u);
}

TEST(LocalMapProperty, RandomOperationsKeepInvariants) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LocalMap map(4, 16);
  map.bootstrap(make_keyframe(0, Mat6::Identity()));
  for (std::size_t i = 1; i < 500; ++i) {
    map.push_candidate(make_keyframe(i, random_spd(rng)));
    const Forest before = map.forest();
    const bool updated = maybe_update(map, u(rng), 0.8);
    if (updated) {
      EXPECT_TRUE(map.candidates().empty());
    } else {
      EXPECT_EQ(map.forest(), before);
    }
    ASSERT_LE(map.keyframes().size(), 4u);
    ASSERT_LE(map.candidates().size(), 16u);
    ASSERT_EQ(map.forest().size(), map.keyframes().size());
  }
}

TEST(LocalMap, RejectsZeroCapacity) {
  EXPECT_THROW(LocalMap(0), std::invalid_argument);
  EXPECT_THROW(LocalMap(4, 0), std::invalid_argument);
}

TEST(KeyframeDump, CsvRows) {
  LocalMap map;
  map.bootstrap(make_keyframe(7, 2.0 * Mat6::Identity()));
  std::ostringstream out;
  write_keyframes_csv(map, out);
  std::istringstream in(out.str());
  std::string header;
  std::string row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header.substr(0, 12), "frame_index,");
  EXPECT_EQ(row.substr(0, 2), "7,");
  EXPECT_NE(row.find(",64"), std::string::npos);
}

}  // namespace
}  // namespace madlo
