#pragma once

// Local map: a bounded forest of world-frame keyframe trees plus the queue of
// candidates registered since the last update. Updates fire only when the
// current scan is poorly supported by the map, and promote the candidate with
// the most informative registration (largest det H).

#include "madlo/geometry.hpp"
#include "madlo/mad_tree.hpp"
#include "madlo/registration.hpp"

#include <deque>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace madlo {

struct Keyframe {
  std::shared_ptr<const KdTree> tree;  ///< already in the world frame
  Mat6 information = Mat6::Zero();
  Isometry3 pose;
  std::size_t frame_index = 0;
  bool degenerate = false;  ///< fallback frames never qualify for promotion
};

/// log det(H) via Cholesky; -inf when H is not positive definite or the
/// keyframe is flagged degenerate.
[[nodiscard]] double information_score(const Keyframe& kf);
[[nodiscard]] double log_det_spd(const Mat6& h);

/// Max-det candidate; ties go to the most recent frame_index. Throws
/// std::invalid_argument for an empty queue.
[[nodiscard]] const Keyframe& select_best(std::span<const Keyframe> queue);
[[nodiscard]] const Keyframe& select_best(const std::deque<Keyframe>& queue);

class LocalMap {
 public:
  static constexpr std::size_t kDefaultCapacity = 8;
  static constexpr std::size_t kDefaultCandidateCapacity = 64;

  explicit LocalMap(std::size_t capacity = kDefaultCapacity,
                    std::size_t candidate_capacity = kDefaultCandidateCapacity);

  /// Installs the first keyframe unconditionally.
  void bootstrap(Keyframe kf);
  void push_candidate(Keyframe candidate);

  /// Promotes the best candidate when p < p_th. Returns whether the forest changed.
  bool maybe_update(double p, double p_th);

  [[nodiscard]] const std::deque<Keyframe>& keyframes() const { return keyframes_; }
  [[nodiscard]] const std::deque<Keyframe>& candidates() const { return candidates_; }
  [[nodiscard]] const Forest& forest() const { return forest_; }
  [[nodiscard]] std::size_t capacity() const { return capacity_; }
  [[nodiscard]] std::size_t candidate_capacity() const { return candidate_capacity_; }
  [[nodiscard]] bool empty() const { return keyframes_.empty(); }

 private:
  void insert(Keyframe kf);

  std::size_t capacity_;
  std::size_t candidate_capacity_;
  std::deque<Keyframe> keyframes_;
  std::deque<Keyframe> candidates_;
  Forest forest_;
};

[[nodiscard]] inline bool maybe_update(LocalMap& map, double p, double p_th) {
  return map.maybe_update(p, p_th);
}

/// CSV rows `frame_index,r00,...,t2,det_H` (KITTI 3x4 order), with header.
void write_keyframes_csv(const LocalMap& map, std::ostream& out);

}  // namespace madlo
