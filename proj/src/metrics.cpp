#include "pcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace pcc {
namespace {

void require_nonempty(std::span<const Vec3> a, std::span<const Vec3> b, const char* what) {
  if (a.empty() || b.empty()) throw std::invalid_argument(std::string(what) + ": empty cloud");
}

// For each point of `from`, index and squared distance of its nearest point in `to`.
void nearest(std::span<const Vec3> from, std::span<const Vec3> to, std::vector<std::size_t>& idx,
             std::vector<double>& d2) {
  idx.assign(from.size(), 0);
  d2.assign(from.size(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Vec3& p = from[i];
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < to.size(); ++j) {
      const double d = squared_distance(p, to[j]);
      if (d < best) {
        best = d;
        arg = j;
      }
    }
    idx[i] = arg;
    d2[i] = best;
  }
}

double directed_mean(std::span<const double> d2, bool squared) {
  double sum = 0.0;
  for (double d : d2) sum += squared ? d : std::sqrt(d);
  return sum / static_cast<double>(d2.size());
}

double directed_dcd(std::span<const std::size_t> idx, std::span<const double> d2, std::size_t target_size,
                    double alpha) {
  std::vector<std::size_t> hits(target_size, 0);
  for (std::size_t j : idx) ++hits[j];
  double sum = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    sum += 1.0 - std::exp(-alpha * d2[i]) / static_cast<double>(hits[idx[i]]);
  }
  return sum / static_cast<double>(idx.size());
}

}  // namespace

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b, bool squared) {
  require_nonempty(a, b, "chamfer_distance");
  std::vector<std::size_t> idx;
  std::vector<double> ab, ba;
  nearest(a, b, idx, ab);
  nearest(b, a, idx, ba);
  return directed_mean(ab, squared) + directed_mean(ba, squared);
}

double chamfer_distance(const PointCloud& a, const PointCloud& b, bool squared) {
  return chamfer_distance(std::span<const Vec3>(a.points()), std::span<const Vec3>(b.points()), squared);
}

double density_aware_cd(std::span<const Vec3> a, std::span<const Vec3> b, double alpha) {
  require_nonempty(a, b, "density_aware_cd");
  if (!(alpha > 0.0)) throw std::invalid_argument("density_aware_cd: alpha must be positive");
  std::vector<std::size_t> ia, ib;
  std::vector<double> da, db;
  nearest(a, b, ia, da);
  nearest(b, a, ib, db);
  const double v = 0.5 * (directed_dcd(ia, da, b.size(), alpha) + directed_dcd(ib, db, a.size(), alpha));
  return std::clamp(v, 0.0, 1.0);
}

double density_aware_cd(const PointCloud& a, const PointCloud& b, double alpha) {
  return density_aware_cd(std::span<const Vec3>(a.points()), std::span<const Vec3>(b.points()), alpha);
}

double f_score(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau) {
  require_nonempty(pred, gt, "f_score");
  if (!(tau > 0.0)) throw std::invalid_argument("f_score: tau must be positive");
  std::vector<std::size_t> idx;
  std::vector<double> pg, gp;
  nearest(pred, gt, idx, pg);
  nearest(gt, pred, idx, gp);
  const double tau2 = tau * tau;
  auto fraction = [tau2](const std::vector<double>& d2) {
    std::size_t hit = 0;
    for (double d : d2) hit += d <= tau2 ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(d2.size());
  };
  const double precision = fraction(pg);
  const double recall = fraction(gp);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double f_score(const PointCloud& pred, const PointCloud& gt, double tau) {
  return f_score(std::span<const Vec3>(pred.points()), std::span<const Vec3>(gt.points()), tau);
}

double segmentation_accuracy(std::span<const double> pred, std::span<const double> gt, double threshold) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("segmentation_accuracy: " + std::to_string(pred.size()) +
                                " predictions for " + std::to_string(gt.size()) + " labels");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("segmentation_accuracy: threshold must lie in (0,1)");
  }
  if (pred.empty()) throw std::invalid_argument("segmentation_accuracy: no points");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool object = pred[i] >= threshold;
    correct += object == (gt[i] >= 0.5) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

MetricValues compute_metrics(const PointCloud* pred, const PointCloud* gt,
                             std::span<const double> pred_labels, std::span<const double> gt_labels,
                             const MetricConfig& config) {
  MetricValues v;
  if (pred != nullptr && gt != nullptr) {
    v.cd = 1e4 * chamfer_distance(*pred, *gt, config.cd_squared);
    v.dcd = density_aware_cd(*pred, *gt, config.dcd_alpha);
    v.fscore_small = f_score(*pred, *gt, config.fscore_tau_small);
    v.fscore_large = f_score(*pred, *gt, config.fscore_tau_large);
  }
  if (!pred_labels.empty()) {
    v.seg_macc = segmentation_accuracy(pred_labels, gt_labels, config.seg_threshold);
  }
  return v;
}

}  // namespace pcc
