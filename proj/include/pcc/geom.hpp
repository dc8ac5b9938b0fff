#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace pcc {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
double distance(const Vec3& a, const Vec3& b);
double norm(const Vec3& a);

/// Ordered list of 3D points with optional per-point labels in [0,1].
///
/// Coordinates must be finite and labels, when present, match the point
/// count. Both are checked on construction and on every mutation.
class PointCloud {
 public:
  PointCloud() = default;
  explicit PointCloud(std::vector<Vec3> points);
  PointCloud(std::vector<Vec3> points, std::vector<double> labels);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  const std::vector<Vec3>& points() const { return points_; }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<double>& labels() const;

  void push_back(const Vec3& p);
  void push_back(const Vec3& p, double label);

  /// Subset in the given index order; labels follow their points.
  PointCloud select(std::span<const std::size_t> indices) const;

  /// Row-major N x 3 copy of the coordinates.
  std::vector<double> flat() const;
  static PointCloud from_flat(std::span<const double> xyz);

 private:
  std::vector<Vec3> points_;
  std::optional<std::vector<double>> labels_;
};

/// Row j lists the k nearest points to point j, nearest first, self at 0.
struct NeighborIndex {
  std::size_t k = 0;
  std::vector<std::size_t> indices;  // N * k, row-major

  std::size_t rows() const { return k == 0 ? 0 : indices.size() / k; }
  std::span<const std::size_t> row(std::size_t j) const { return {indices.data() + j * k, k}; }
};

struct Viewpoint {
  Vec3 position{};
  double flip_radius = 1.0;
};

/// Greedy maximin subset starting at `seed_index`; ties go to the lowest index.
std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t m,
                                               std::size_t seed_index = 0);
std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m,
                                               std::size_t seed_index = 0);

/// Exact k nearest neighbours by Euclidean distance, self included.
NeighborIndex knn(std::span<const Vec3> points, std::size_t k);
NeighborIndex knn(const PointCloud& cloud, std::size_t k);

/// N x (3k) row-major matrix of neighbour coordinates in index order.
std::vector<double> group_points(const PointCloud& cloud, const NeighborIndex& idx);

/// One centroid per occupied voxel; labels become the voxel mean.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

struct Normalization {
  Vec3 center{};
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (1.0 / scale) * (p - center); }
  Vec3 invert(const Vec3& p) const { return scale * p + center; }
};

/// Maps the cloud into the closed unit ball about its centroid.
std::pair<PointCloud, Normalization> normalize_unit_ball(const PointCloud& cloud);
PointCloud apply_normalization(const PointCloud& cloud, const Normalization& frame);

/// Maximum pairwise extent estimate: the diagonal of the axis-aligned bounding box.
double bounding_diagonal(std::span<const Vec3> points);

/// Indices (ascending) of points visible from `view` under the spherical-flip
/// convex hull operator.
std::vector<std::size_t> hidden_point_removal(std::span<const Vec3> points, const Viewpoint& view);
std::vector<std::size_t> hidden_point_removal(const PointCloud& cloud, const Viewpoint& view);

/// Flip radius used when callers do not pick one: 100 x the cloud diameter
/// measured together with the viewpoint.
double default_flip_radius(std::span<const Vec3> points, const Vec3& position);

}  // namespace pcc
