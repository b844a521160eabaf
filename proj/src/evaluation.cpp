#include "madlo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace madlo {

void RpeConfig::validate() const {
  if (lengths.empty()) throw std::invalid_argument("RpeConfig: no lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (!(lengths[i] > 0.0)) throw std::invalid_argument("RpeConfig: lengths must be positive");
    if (i > 0 && !(lengths[i] > lengths[i - 1])) {
      throw std::invalid_argument("RpeConfig: lengths must be strictly increasing");
    }
  }
  if (step == 0) throw std::invalid_argument("RpeConfig: step must be positive");
}

RpeConfig RpeConfig::long_range() { return {{100, 200, 300, 400, 500, 600, 700, 800}, 1}; }
RpeConfig RpeConfig::short_range() { return {{10, 20, 30, 40, 50, 60, 70, 80}, 1}; }

std::vector<double> parse_lengths(const std::string& text) {
  const auto c1 = text.find(':');
  const auto c2 = c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
  if (c2 == std::string::npos) throw std::invalid_argument("lengths must look like A:B:S");
  double a = 0.0, b = 0.0, s = 0.0;
  try {
    a = std::stod(text.substr(0, c1));
    b = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    s = std::stod(text.substr(c2 + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("lengths must look like A:B:S");
  }
  if (!(a > 0.0 && s > 0.0 && b >= a)) throw std::invalid_argument("lengths: need 0 < A <= B, S > 0");
  std::vector<double> out;
  const auto count = static_cast<std::size_t>(std::floor((b - a) / s + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) out.push_back(a + static_cast<double>(i) * s);
  return out;
}

RpeReport compute_rpe(const Trajectory& est, const Trajectory& gt, const RpeConfig& cfg) {
  cfg.validate();
  if (est.size() != gt.size()) throw std::invalid_argument("compute_rpe: trajectory length mismatch");
  if (gt.size() < 2) throw std::invalid_argument("compute_rpe: need at least two poses");

  std::vector<double> dist(gt.size(), 0.0);
  for (std::size_t k = 1; k < gt.size(); ++k) {
    dist[k] = dist[k - 1] + (gt[k].pose.translation() - gt[k - 1].pose.translation()).norm();
  }

  RpeReport report;
  std::map<double, std::pair<double, std::size_t>> by_length;
  for (std::size_t i = 0; i < gt.size(); i += cfg.step) {
    for (double len : cfg.lengths) {
      const auto it = std::lower_bound(dist.begin() + static_cast<std::ptrdiff_t>(i), dist.end(),
                                       dist[i] + len);
      if (it == dist.end()) continue;
      const auto j = static_cast<std::size_t>(it - dist.begin());
      const double travelled = dist[j] - dist[i];
      if (!(travelled > 0.0)) continue;

      const Isometry3 gt_rel = gt[i].pose.inverse() * gt[j].pose;
      const Isometry3 est_rel = est[i].pose.inverse() * est[j].pose;
      const Isometry3 err = gt_rel.inverse() * est_rel;
      const double cos_angle =
          std::clamp(0.5 * (err.rotation().trace() - 1.0), -1.0, 1.0);

      RpeRecord rec;
      rec.start = i;
      rec.end = j;
      rec.length = len;
      rec.path_length = travelled;
      rec.trans_error_pct = 100.0 * err.translation().norm() / travelled;
      rec.rot_error_deg_per_m = std::acos(cos_angle) * 180.0 / std::numbers::pi / travelled;
      report.records.push_back(rec);
      auto& slot = by_length[len];
      slot.first += rec.trans_error_pct;
      ++slot.second;
    }
  }

  for (const auto& [len, acc] : by_length) {
    report.per_length.emplace_back(len, acc.first / static_cast<double>(acc.second));
  }
  if (report.records.empty()) {
    report.overall = std::numeric_limits<double>::quiet_NaN();
  } else {
    double sum = 0.0;
    for (const auto& r : report.records) sum += r.trans_error_pct;
    report.overall = sum / static_cast<double>(report.records.size());
  }
  return report;
}

CumulativeCurve cumulative_curve(std::span<const double> errors, double max_err, double resolution) {
  if (errors.empty()) throw std::invalid_argument("cumulative_curve: no errors");
  if (!(max_err > 0.0 && resolution > 0.0)) {
    throw std::invalid_argument("cumulative_curve: max_err and resolution must be positive");
  }
  for (double e : errors) {
    if (!(e >= 0.0)) throw std::invalid_argument("cumulative_curve: errors must be non-negative");
  }

  CumulativeCurve curve;
  // Each sequence with error e <= max_err contributes the interval [e, max_err].
  for (double e : errors) {
    if (e <= max_err) curve.auc += max_err - e;
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const auto steps = static_cast<std::size_t>(std::llround(max_err / resolution));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double x = std::min(max_err, static_cast<double>(k) * resolution);
    const auto count = static_cast<std::size_t>(
        std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
    curve.samples.emplace_back(x, count);
  }
  return curve;
}

double mean_of_dataset_means(std::span<const std::vector<double>> per_dataset) {
  if (per_dataset.empty()) throw std::invalid_argument("mean_of_dataset_means: no datasets");
  double total = 0.0;
  for (const auto& errors : per_dataset) {
    if (errors.empty()) throw std::invalid_argument("mean_of_dataset_means: empty dataset");
    double s = 0.0;
    for (double e : errors) s += e;
    total += s / static_cast<double>(errors.size());
  }
  return total / static_cast<double>(per_dataset.size());
}

void write_rpe_csv(const RpeReport& report, std::ostream& out) {
  out << "length,mean_err_pct\n";
  const auto old_precision = out.precision(10);
  for (const auto& [len, err] : report.per_length) out << len << ',' << err << '\n';
  out << "overall," << report.overall << '\n';
  out.precision(old_precision);
}

void write_curve_csv(const CumulativeCurve& curve, std::ostream& out) {
  out << "threshold,count\n";
  for (const auto& [x, count] : curve.samples) out << x << ',' << count << '\n';
}

}  // namespace madlo
