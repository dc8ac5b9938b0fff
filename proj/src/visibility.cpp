#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcc/geom.hpp"
#include "pcc/hull.hpp"

namespace pcc {

double default_flip_radius(std::span<const Vec3> points, const Vec3& position) {
  std::vector<Vec3> all(points.begin(), points.end());
  all.push_back(position);
  const double diameter = bounding_diagonal(all);
  return 100.0 * std::max(diameter, 1e-12);
}

std::vector<std::size_t> hidden_point_removal(std::span<const Vec3> points, const Viewpoint& view) {
  const std::size_t n = points.size();
  if (n == 0) return {};
  const Vec3& c = view.position;
  const double radius = view.flip_radius;

  // Spherical flip about the viewpoint, expressed relative to it; the viewpoint
  // itself is the origin and is appended last.
  std::vector<Vec3> flipped;
  flipped.reserve(n + 1);
  for (const auto& p : points) {
    const Vec3 d = p - c;
    const double len = norm(d);
    if (len == 0.0) throw std::invalid_argument("hidden_point_removal: point coincides with viewpoint");
    if (!(radius > len)) {
      throw std::invalid_argument("hidden_point_removal: flip radius must exceed every point distance");
    }
    flipped.push_back(((2.0 * radius - len) / len) * d);
  }
  flipped.push_back(Vec3{0.0, 0.0, 0.0});

  std::vector<std::size_t> visible;
  for (std::size_t i : convex_hull_vertices(flipped, 1e-10))
    if (i < n) visible.push_back(i);
  return visible;
}

std::vector<std::size_t> hidden_point_removal(const PointCloud& cloud, const Viewpoint& view) {
  return hidden_point_removal(std::span<const Vec3>(cloud.points()), view);
}

}  // namespace pcc
