#include "pcc/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace pcc {

double distance(const Vec3& a, const Vec3& b) { return std::sqrt(squared_distance(a, b)); }
double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

namespace {

void check_finite(const Vec3& p) {
  if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
    throw std::invalid_argument("point cloud coordinates must be finite");
  }
}

void check_label(double l) {
  if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("point labels must lie in [0,1]");
}

}  // namespace

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {
  for (const auto& p : points_) check_finite(p);
}

PointCloud::PointCloud(std::vector<Vec3> points, std::vector<double> labels)
    : points_(std::move(points)), labels_(std::move(labels)) {
  if (labels_->size() != points_.size()) {
    throw std::invalid_argument("label count " + std::to_string(labels_->size()) +
                                " does not match point count " + std::to_string(points_.size()));
  }
  for (const auto& p : points_) check_finite(p);
  for (double l : *labels_) check_label(l);
}

const std::vector<double>& PointCloud::labels() const {
  if (!labels_) throw std::logic_error("point cloud has no labels");
  return *labels_;
}

void PointCloud::push_back(const Vec3& p) {
  if (labels_) throw std::invalid_argument("labelled cloud requires a label per point");
  check_finite(p);
  points_.push_back(p);
}

void PointCloud::push_back(const Vec3& p, double label) {
  if (!labels_) {
    if (!points_.empty()) throw std::invalid_argument("unlabelled cloud cannot take labels");
    labels_.emplace();
  }
  check_finite(p);
  check_label(label);
  points_.push_back(p);
  labels_->push_back(label);
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  std::vector<Vec3> pts;
  pts.reserve(indices.size());
  for (std::size_t i : indices) pts.push_back(points_.at(i));
  if (!labels_) return PointCloud(std::move(pts));
  std::vector<double> ls;
  ls.reserve(indices.size());
  for (std::size_t i : indices) ls.push_back((*labels_)[i]);
  return PointCloud(std::move(pts), std::move(ls));
}

std::vector<double> PointCloud::flat() const {
  std::vector<double> out;
  out.reserve(points_.size() * 3);
  for (const auto& p : points_) out.insert(out.end(), p.begin(), p.end());
  return out;
}

PointCloud PointCloud::from_flat(std::span<const double> xyz) {
  if (xyz.size() % 3 != 0) throw std::invalid_argument("flat coordinates must be a multiple of 3");
  std::vector<Vec3> pts(xyz.size() / 3);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
  return PointCloud(std::move(pts));
}

std::vector<std::size_t> farthest_point_sample(std::span<const Vec3> points, std::size_t m,
                                               std::size_t seed_index) {
  const std::size_t n = points.size();
  if (n == 0) throw std::invalid_argument("farthest_point_sample: empty cloud");
  if (m < 1 || m > n) {
    throw std::invalid_argument("farthest_point_sample: m=" + std::to_string(m) +
                                " outside [1, " + std::to_string(n) + "]");
  }
  if (seed_index >= n) throw std::invalid_argument("farthest_point_sample: seed index out of range");

  std::vector<std::size_t> picked;
  picked.reserve(m);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  std::size_t current = seed_index;
  for (;;) {
    picked.push_back(current);
    taken[current] = 1;
    if (picked.size() == m) break;
    const Vec3& c = points[current];
    std::size_t best = n;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double d2 = std::min(min_d2[i], squared_distance(points[i], c));
      min_d2[i] = d2;
      if (d2 > best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    current = best;
  }
  return picked;
}

std::vector<std::size_t> farthest_point_sample(const PointCloud& cloud, std::size_t m,
                                               std::size_t seed_index) {
  return farthest_point_sample(std::span<const Vec3>(cloud.points()), m, seed_index);
}

NeighborIndex knn(std::span<const Vec3> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k < 1 || k > n) {
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  NeighborIndex out;
  out.k = k;
  out.indices.resize(n * k);
  // Bounded max-heap on (distance, index); lexicographic order gives lowest-index ties.
  using Entry = std::pair<double, std::size_t>;
  std::vector<Entry> heap;
  heap.reserve(k + 1);
  for (std::size_t j = 0; j < n; ++j) {
    heap.clear();
    const Vec3& q = points[j];
    for (std::size_t i = 0; i < n; ++i) {
      const Entry e{squared_distance(points[i], q), i};
      if (heap.size() < k) {
        heap.push_back(e);
        std::push_heap(heap.begin(), heap.end());
      } else if (e < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = e;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    std::sort_heap(heap.begin(), heap.end());
    // Self sits at distance 0; a coincident lower-index duplicate would otherwise precede it.
    auto self = std::find_if(heap.begin(), heap.end(), [j](const Entry& e) { return e.second == j; });
    if (self == heap.end()) {
      heap.back() = {0.0, j};
      self = heap.end() - 1;
    }
    std::rotate(heap.begin(), self, self + 1);
    for (std::size_t r = 0; r < k; ++r) out.indices[j * k + r] = heap[r].second;
  }
  return out;
}

NeighborIndex knn(const PointCloud& cloud, std::size_t k) {
  return knn(std::span<const Vec3>(cloud.points()), k);
}

std::vector<double> group_points(const PointCloud& cloud, const NeighborIndex& idx) {
  const std::size_t n = cloud.size();
  if (idx.k == 0 || idx.indices.size() != n * idx.k) {
    throw std::invalid_argument("group_points: neighbour index does not match cloud size");
  }
  std::vector<double> out;
  out.reserve(n * idx.k * 3);
  for (std::size_t i : idx.indices) {
    if (i >= n) throw std::invalid_argument("group_points: neighbour index out of range");
    const Vec3& p = cloud[i];
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
  if (!(voxel > 0.0)) throw std::invalid_argument("voxel_downsample: voxel must be positive");
  if (cloud.empty()) return cloud;

  Vec3 origin = cloud[0];
  for (const auto& p : cloud.points())
    for (int a = 0; a < 3; ++a) origin[a] = std::min(origin[a], p[a]);
  for (int a = 0; a < 3; ++a) origin[a] = std::floor(origin[a]);

  struct Cell {
    Vec3 sum{};
    double label_sum = 0.0;
    std::size_t count = 0;
  };
  // Ordered map keeps output order a function of voxel coordinates only.
  std::map<std::array<long long, 3>, Cell> cells;
  const bool labelled = cloud.has_labels();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud[i];
    std::array<long long, 3> key{};
    for (int a = 0; a < 3; ++a) key[a] = static_cast<long long>(std::floor((p[a] - origin[a]) / voxel));
    Cell& c = cells[key];
    c.sum = c.sum + p;
    if (labelled) c.label_sum += cloud.labels()[i];
    ++c.count;
  }

  std::vector<Vec3> pts;
  std::vector<double> labels;
  pts.reserve(cells.size());
  for (const auto& [key, c] : cells) {
    const double inv = 1.0 / static_cast<double>(c.count);
    Vec3 centroid = inv * c.sum;
    // Keep the centroid inside its voxel despite rounding in the running sum.
    for (int a = 0; a < 3; ++a) {
      const double lo = origin[a] + static_cast<double>(key[a]) * voxel;
      centroid[a] = std::clamp(centroid[a], lo, std::nextafter(lo + voxel, lo));
    }
    pts.push_back(centroid);
    if (labelled) labels.push_back(std::clamp(c.label_sum * inv, 0.0, 1.0));
  }
  if (labelled) return PointCloud(std::move(pts), std::move(labels));
  return PointCloud(std::move(pts));
}

std::pair<PointCloud, Normalization> normalize_unit_ball(const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("normalize_unit_ball: empty cloud");
  Vec3 sum{};
  for (const auto& p : cloud.points()) sum = sum + p;
  Normalization frame;
  frame.center = (1.0 / static_cast<double>(cloud.size())) * sum;
  double r = 0.0;
  for (const auto& p : cloud.points()) r = std::max(r, distance(p, frame.center));
  frame.scale = r < 1e-12 ? 1.0 : r;
  return {apply_normalization(cloud, frame), frame};
}

PointCloud apply_normalization(const PointCloud& cloud, const Normalization& frame) {
  std::vector<Vec3> pts;
  pts.reserve(cloud.size());
  for (const auto& p : cloud.points()) {
    Vec3 q = frame.apply(p);
    // Points at radius r map to exactly 1 up to rounding; clamp back into the ball.
    const double len = norm(q);
    if (len > 1.0) q = (1.0 / len) * q;
    pts.push_back(q);
  }
  if (cloud.has_labels()) return PointCloud(std::move(pts), cloud.labels());
  return PointCloud(std::move(pts));
}

double bounding_diagonal(std::span<const Vec3> points) {
  if (points.empty()) return 0.0;
  Vec3 lo = points[0], hi = points[0];
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  return norm(hi - lo);
}

}  // namespace pcc
