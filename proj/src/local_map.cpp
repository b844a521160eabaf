#include "madlo/local_map.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace madlo {

double log_det_spd(const Mat6& h) {
  Eigen::LLT<Mat6> llt(h);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Vec6 diag = llt.matrixLLT().diagonal();
  if ((diag.array() <= 0.0).any()) return -std::numeric_limits<double>::infinity();
  return 2.0 * diag.array().log().sum();
}

double information_score(const Keyframe& kf) {
  if (kf.degenerate) return -std::numeric_limits<double>::infinity();
  return log_det_spd(kf.information);
}

namespace {

template <typename Range>
const Keyframe& select_best_impl(const Range& queue) {
  if (queue.empty()) throw std::invalid_argument("select_best: empty candidate queue");
  const Keyframe* best = nullptr;
  double best_score = 0.0;
  for (const Keyframe& kf : queue) {
    const double score = information_score(kf);
    if (best == nullptr || score > best_score ||
        (score == best_score && kf.frame_index > best->frame_index)) {
      best = &kf;
      best_score = score;
    }
  }
  return *best;
}

}  // namespace

const Keyframe& select_best(std::span<const Keyframe> queue) { return select_best_impl(queue); }
const Keyframe& select_best(const std::deque<Keyframe>& queue) { return select_best_impl(queue); }

LocalMap::LocalMap(std::size_t capacity, std::size_t candidate_capacity)
    : capacity_(capacity), candidate_capacity_(candidate_capacity) {
  if (capacity_ == 0 || candidate_capacity_ == 0) {
    throw std::invalid_argument("LocalMap: capacities must be positive");
  }
}

void LocalMap::bootstrap(Keyframe kf) {
  keyframes_.clear();
  candidates_.clear();
  forest_.clear();
  insert(std::move(kf));
}

void LocalMap::push_candidate(Keyframe candidate) {
  candidates_.push_back(std::move(candidate));
  while (candidates_.size() > candidate_capacity_) candidates_.pop_front();
}

bool LocalMap::maybe_update(double p, double p_th) {
  if (!(p < p_th) || candidates_.empty()) return false;
  const Keyframe& best = select_best(candidates_);
  if (!std::isfinite(information_score(best))) return false;
  Keyframe promoted = best;
  candidates_.clear();
  insert(std::move(promoted));
  return true;
}

void LocalMap::insert(Keyframe kf) {
  if (!kf.tree) throw std::invalid_argument("LocalMap: keyframe without a tree");
  keyframes_.push_back(std::move(kf));
  while (keyframes_.size() > capacity_) {
    const auto oldest = std::min_element(
        keyframes_.begin(), keyframes_.end(),
        [](const Keyframe& a, const Keyframe& b) { return a.frame_index < b.frame_index; });
    keyframes_.erase(oldest);
  }
  forest_.clear();
  for (const auto& k : keyframes_) forest_.push_back(k.tree);
}

void write_keyframes_csv(const LocalMap& map, std::ostream& out) {
  out << "frame_index,r00,r01,r02,t0,r10,r11,r12,t1,r20,r21,r22,t2,det_H\n";
  const auto old_precision = out.precision(17);
  for (const auto& kf : map.keyframes()) {
    out << kf.frame_index;
    const Mat3& r = kf.pose.rotation();
    const Vec3& t = kf.pose.translation();
    for (int i = 0; i < 3; ++i) {
      out << ',' << r(i, 0) << ',' << r(i, 1) << ',' << r(i, 2) << ',' << t(i);
    }
    out << ',' << std::exp(information_score(kf)) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace madlo
