#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcc/geom.hpp"

namespace pcc {

/// Symmetric mean nearest-neighbour distance. Unsquared unless `squared`.
double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b, bool squared = false);
double chamfer_distance(const PointCloud& a, const PointCloud& b, bool squared = false);

/// Density-aware Chamfer distance, bounded in [0,1].
double density_aware_cd(std::span<const Vec3> a, std::span<const Vec3> b, double alpha = 1000.0);
double density_aware_cd(const PointCloud& a, const PointCloud& b, double alpha = 1000.0);

/// Harmonic mean of precision and recall at distance threshold `tau`.
double f_score(std::span<const Vec3> pred, std::span<const Vec3> gt, double tau);
double f_score(const PointCloud& pred, const PointCloud& gt, double tau);

/// Fraction of points with (pred >= threshold) == gt.
double segmentation_accuracy(std::span<const double> pred, std::span<const double> gt,
                             double threshold = 0.5);

struct MetricConfig {
  bool cd_squared = false;
  double dcd_alpha = 1000.0;
  double fscore_tau_small = 1e-4;  // F@0.01%
  double fscore_tau_large = 1e-3;  // F@0.1%
  double seg_threshold = 0.5;
};

/// One row of metric values. Absent fields are metrics that do not apply to
/// the evaluated configuration (no completion or no segmentation output).
struct MetricValues {
  std::optional<double> cd;  // scaled by 1e4
  std::optional<double> dcd;
  std::optional<double> fscore_small;
  std::optional<double> fscore_large;
  std::optional<double> seg_macc;
};

struct MetricRow {
  std::string id;  // sample id, "mean", or "mean:<category>"
  std::string category;
  int block = 0;  // 1-based cascade block the completion metrics came from
  MetricValues values;
};

struct MetricsReport {
  MetricConfig config;
  std::vector<MetricRow> samples;
  std::vector<MetricRow> aggregates;  // overall mean first, then one per category

  /// Fills `aggregates` from `samples`, grouping by block.
  void aggregate();
  const MetricRow& overall(int block) const;

  std::string to_csv() const;
  std::string to_markdown() const;
};

MetricValues compute_metrics(const PointCloud* pred, const PointCloud* gt,
                             std::span<const double> pred_labels, std::span<const double> gt_labels,
                             const MetricConfig& config);

}  // namespace pcc
