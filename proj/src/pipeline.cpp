#include "madlo/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <memory>
#include <ostream>

namespace madlo {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

OdometryParams OdometryParams::from_config(const RunConfig& config) {
  config.validate();
  OdometryParams p;
  p.tree.b_max = config.b_max;
  p.tree.b_min = config.b_min;
  p.registration.b_max = config.b_max;
  p.registration.b_ratio = config.b_ratio;
  p.registration.rho_ker = config.rho_ker;
  p.registration.max_iterations = config.max_iterations;
  p.registration.time_budget = config.time_budget_ms > 0.0
                                   ? config.time_budget_ms / 1000.0
                                   : std::numeric_limits<double>::infinity();
  p.registration.workers = static_cast<std::size_t>(config.threads);
  p.p_th = config.p_th;
  p.history = static_cast<std::size_t>(config.n);
  p.scan_period = config.scan_period;
  p.deskew = config.deskew;
  p.keyframes = static_cast<std::size_t>(config.keyframes);
  p.workers = static_cast<std::size_t>(config.threads);
  return p;
}

Odometry::Odometry(OdometryParams params)
    : params_(std::move(params)), map_(params_.keyframes, params_.candidates) {
  params_.tree.validate();
  params_.registration.validate();
  if (params_.history < 2) throw std::invalid_argument("Odometry: history must hold at least 2 poses");
}

FrameOutput Odometry::process_frame(const PointCloud& cloud, std::optional<double> stamp) {
  FrameOutput out;
  out.frame = frame_index_;
  const double t_k = stamp.value_or(static_cast<double>(frame_index_) * params_.scan_period);

  Isometry3 guess;
  double dt = params_.scan_period;
  if (!history_.empty()) {
    if (t_k > history_.back().stamp) dt = t_k - history_.back().stamp;
    guess = predict_pose(history_.back(), velocity_, dt);
  }

  auto record_pose = [&](const Isometry3& pose) {
    // Keep stamps strictly increasing even if the source repeats one.
    const double s = history_.empty() ? t_k : history_.back().stamp + dt;
    history_.push_back({pose, s});
    while (history_.size() > params_.history) history_.pop_front();
    std::vector<StampedPose> window(history_.begin(), history_.end());
    velocity_ = estimate_velocity(window);
    ++frame_index_;
  };

  if (cloud.empty()) {
    out.pose = guess;
    out.fallback = true;
    out.det_information = -std::numeric_limits<double>::infinity();
    record_pose(guess);
    return out;
  }

  if (map_.empty()) {
    // Initialization: the first scan becomes the only keyframe.
    auto t0 = Clock::now();
    auto tree = std::make_shared<KdTree>(KdTree::build(cloud, params_.tree));
    if (!(guess == Isometry3::identity())) tree->transform(guess);
    out.timings.build_ms = ms_since(t0);
    map_.bootstrap(Keyframe{std::move(tree), Mat6::Zero(), guess, frame_index_, false});
    out.pose = guess;
    out.matched_fraction = 1.0;
    out.map_updated = true;
    record_pose(guess);
    return out;
  }

  auto t0 = Clock::now();
  const PointCloud deskewed =
      params_.deskew ? deskew(cloud, velocity_, params_.scan_period, params_.workers) : cloud;
  out.timings.deskew_ms = ms_since(t0);

  t0 = Clock::now();
  auto tree = std::make_shared<KdTree>(KdTree::build(deskewed, params_.tree));
  out.timings.build_ms = ms_since(t0);

  t0 = Clock::now();
  RegistrationResult reg;
  try {
    reg = icp(map_.forest(), *tree, guess, params_.registration);
  } catch (const DegenerateRegistration& e) {
    reg = e.partial();
    reg.pose = guess;
    out.fallback = true;
  }
  out.timings.icp_ms = ms_since(t0);

  t0 = Clock::now();
  tree->transform(reg.pose);
  Keyframe candidate{std::move(tree), reg.information, reg.pose, frame_index_, out.fallback};
  out.det_information = std::exp(information_score(candidate));
  if (out.fallback) out.det_information = -std::numeric_limits<double>::infinity();
  map_.push_candidate(std::move(candidate));

  out.pose = reg.pose;
  out.matched_fraction = reg.matched_fraction;
  out.iterations = reg.iterations;
  record_pose(reg.pose);
  out.map_updated = map_.maybe_update(reg.matched_fraction, params_.p_th);
  out.timings.update_ms = ms_since(t0);
  return out;
}

SequenceResult run_sequence(const ScanSource& source, const RunConfig& config) {
  source.validate();
  SequenceResult result;
  const auto scans = list_scans(source.path, source.kind);
  if (scans.empty()) return result;
  const auto stamps = scan_stamps(source.path, scans.size(), source.scan_period);

  Odometry odom(OdometryParams::from_config(config));
  auto load = [&](std::size_t k) {
    PointCloud c = read_scan(scans[k], source);
    if (config.deskew && !c.has_rel_times() && !c.empty()) c = synthesize_rel_times(c);
    return c;
  };

  std::future<PointCloud> next = std::async(std::launch::async, load, std::size_t{0});
  for (std::size_t k = 0; k < scans.size(); ++k) {
    PointCloud cloud;
    try {
      cloud = next.get();
    } catch (const std::exception& e) {
      result.error = e.what();
      break;
    }
    if (k + 1 < scans.size()) next = std::async(std::launch::async, load, k + 1);
    FrameOutput frame = odom.process_frame(cloud, stamps[k]);
    result.trajectory.push_back({frame.pose, stamps[k]});
    result.frames.push_back(frame);
  }
  return result;
}

void write_frame_log_csv(const std::vector<FrameOutput>& frames, std::ostream& out) {
  out << "frame,t_deskew_ms,t_build_ms,t_icp_ms,t_update_ms,p,det_H,fallback\n";
  const auto old_precision = out.precision(10);
  for (const auto& f : frames) {
    out << f.frame << ',' << f.timings.deskew_ms << ',' << f.timings.build_ms << ','
        << f.timings.icp_ms << ',' << f.timings.update_ms << ',' << f.matched_fraction << ','
        << f.det_information << ',' << (f.fallback ? 1 : 0) << '\n';
  }
  out.precision(old_precision);
}

}  // namespace madlo
