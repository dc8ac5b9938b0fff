#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcc/check.hpp"
#include "pcc/geom.hpp"
#include "pcc/hull.hpp"
#include "support.hpp"

using namespace pcc;

namespace {

// A point is extreme iff no other point set contains it in its convex hull;
// for the test shapes below that reduces to "is a corner" by construction.
std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("hull of a cube with interior points keeps the corners") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 8; ++i) pts.push_back({double(i & 1), double((i >> 1) & 1), double((i >> 2) & 1)});
  Rng rng(11);
  for (int i = 0; i < 200; ++i) pts.push_back({rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99)});
  // Face-interior points are not extreme either.
  pts.push_back({0.5, 0.5, 0.0});
  pts.push_back({1.0, 0.3, 0.7});
  std::vector<std::size_t> corners(8);
  std::iota(corners.begin(), corners.end(), 0);
  CHECK(convex_hull_vertices(pts) == corners);
}

TEST_CASE("hull degenerate inputs") {
  CHECK(convex_hull_vertices(std::vector<Vec3>{{1, 2, 3}}) == std::vector<std::size_t>{0});
  CHECK(convex_hull_vertices(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {0.5, 0, 0}}) ==
        std::vector<std::size_t>{0, 1});
  CHECK(convex_hull_vertices(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0.2, 0.2, 0}, {1, 1, 0}}) ==
        std::vector<std::size_t>{0, 1, 2, 4});
  CHECK(convex_hull_vertices(std::vector<Vec3>{}).empty());
}

TEST_CASE("hull of points on a sphere keeps all of them") {
  Rng rng(12);
  const auto pts = pcc::test::unit_sphere(rng, 300);
  CHECK(convex_hull_vertices(pts).size() == 300);
}

TEST_CASE("hull vertex set is permutation invariant") {
  Rng rng(13);
  const auto pts = pcc::test::random_cloud(rng, 400);
  const auto base = convex_hull_vertices(pts);
  for (int t = 0; t < 5; ++t) {
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    std::vector<Vec3> shuffled(pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = pts[perm[i]];
    std::vector<std::size_t> back;
    for (std::size_t j : convex_hull_vertices(shuffled)) back.push_back(perm[j]);
    CHECK(sorted(back) == base);
  }
}

TEST_CASE("hull vertices match a brute-force support test") {
  // Every reported vertex must be the unique maximizer of some direction
  // among a dense sample; every unreported point must never be one.
  Rng rng(14);
  const auto pts = pcc::test::random_cloud(rng, 60);
  const auto hull = convex_hull_vertices(pts);
  std::vector<bool> seen(pts.size(), false);
  for (int d = 0; d < 20000; ++d) {
    Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (dot(pts[i], dir) > dot(pts[best], dir)) best = i;
    seen[best] = true;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const bool in_hull = std::binary_search(hull.begin(), hull.end(), i);
    if (seen[i]) CHECK(in_hull);
  }
}

TEST_CASE("hpr on a sphere sees roughly the near cap") {
  Rng rng(15);
  const auto pts = pcc::test::unit_sphere(rng, 500);
  const auto vis = hidden_point_removal(pts, Viewpoint{{0, 0, 3}, 10.0});
  const double frac = double(vis.size()) / 500.0;
  CHECK(frac >= 0.35);
  CHECK(frac <= 0.65);
  // Visible points should mostly face the viewer.
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const bool v = std::binary_search(vis.begin(), vis.end(), i);
    agree += v == check::sphere_point_visible(pts[i], {0, 0, 0}, 1.0, {0, 0, 3});
  }
  CHECK(agree >= 450);
}

TEST_CASE("hpr single point is visible") {
  CHECK(hidden_point_removal(std::vector<Vec3>{{1, 1, 1}}, Viewpoint{{0, 0, 0}, 100.0}) ==
        std::vector<std::size_t>{0});
}

TEST_CASE("hpr occludes a point exactly behind another") {
  const std::vector<Vec3> pts{{0, 0, 1}, {0, 0, 2}};
  const auto vis = hidden_point_removal(pts, Viewpoint{{0, 0, 0}, 100.0});
  CHECK(vis == std::vector<std::size_t>{0});
  CHECK_FALSE(check::ray_cast_visible(pts, 1, {0, 0, 0}, 1e-3));
}

TEST_CASE("hpr with three points keeps a laterally offset far point") {
  // Two flipped points and the viewpoint form a triangle, so under the hull
  // definition every point is extreme once the far point is off the ray.
  const std::vector<Vec3> pts{{0, 0, 1}, {1e-3, 0, 2}};
  CHECK(hidden_point_removal(pts, Viewpoint{{0, 0, 0}, 100.0}).size() == 2);
}

TEST_CASE("hpr rejects a point on the viewpoint") {
  CHECK_THROWS_AS(hidden_point_removal(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}}, Viewpoint{{0, 0, 0}, 10.0}),
                  std::invalid_argument);
}

TEST_CASE("hpr visible set is permutation invariant") {
  Rng rng(16);
  auto pts = pcc::test::unit_sphere(rng, 400);
  for (auto& p : pts) p = (0.6 + 0.4 * rng.uniform()) * p;
  const Viewpoint view{{2.5, -1, 0.5}, 100.0 * (2.0 + 3.0)};
  const auto base = hidden_point_removal(pts, view);
  for (int t = 0; t < 5; ++t) {
    std::vector<std::size_t> perm(pts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    std::vector<Vec3> shuffled(pts.size());
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled[i] = pts[perm[i]];
    std::vector<std::size_t> back;
    for (std::size_t j : hidden_point_removal(shuffled, view)) back.push_back(perm[j]);
    CHECK(sorted(back) == base);
  }
}
