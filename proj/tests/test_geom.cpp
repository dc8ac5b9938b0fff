#include <doctest.h>

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <numeric>
#include <set>

#include "pcc/check.hpp"
#include "pcc/geom.hpp"
#include "support.hpp"

using namespace pcc;
using pcc::test::random_cloud;

TEST_CASE("fps picks the far end first") {
  const std::vector<Vec3> pts{{0, 0, 0}, {0.1, 0, 0}, {0.9, 0, 0}, {1, 0, 0}};
  CHECK(farthest_point_sample(pts, 2) == std::vector<std::size_t>{0, 3});
}

TEST_CASE("fps with m = n is a permutation, m = 1 is the seed") {
  Rng rng(1);
  const auto pts = random_cloud(rng, 37);
  auto all = farthest_point_sample(pts, pts.size());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> iota(pts.size());
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(all == iota);
  for (std::size_t j : {0u, 5u, 36u}) CHECK(farthest_point_sample(pts, 1, j) == std::vector<std::size_t>{j});
}

TEST_CASE("fps rejects bad arguments") {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_AS(farthest_point_sample(pts, 3), std::invalid_argument);
  CHECK_THROWS_AS(farthest_point_sample(pts, 0), std::invalid_argument);
  CHECK_THROWS_AS(farthest_point_sample(pts, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(farthest_point_sample(std::vector<Vec3>{}, 1), std::invalid_argument);
}

TEST_CASE("fps greedy property holds for every prefix") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.index(64);
    // Snap to a coarse grid so exact ties actually occur.
    auto pts = random_cloud(rng, n);
    for (auto& p : pts)
      for (double& c : p) c = std::round(c * 4.0) / 4.0;
    const auto order = farthest_point_sample(pts, n, rng.index(n));
    for (std::size_t t = 1; t < n; ++t) {
      double best = -1.0;
      std::size_t best_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(order.begin(), order.begin() + t, i) != order.begin() + t) continue;
        double d = INFINITY;
        for (std::size_t s = 0; s < t; ++s) d = std::min(d, squared_distance(pts[i], pts[order[s]]));
        if (d > best) {
          best = d;
          best_i = i;
        }
      }
      REQUIRE(order[t] == best_i);
    }
  }
}

TEST_CASE("fps matches the oracle on tied grids") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto pts = random_cloud(rng, 100);
    for (auto& p : pts)
      for (double& c : p) c = std::round(c * 2.0);
    const std::size_t m = 1 + rng.index(40);
    CHECK(farthest_point_sample(pts, m) == check::fps_oracle(pts, m));
  }
}

TEST_CASE("knn basics") {
  Rng rng(4);
  const auto pts = random_cloud(rng, 20);
  const auto one = knn(pts, 1);
  for (std::size_t j = 0; j < pts.size(); ++j) CHECK(one.row(j)[0] == j);

  const std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  const auto two = knn(line, 2);
  CHECK(std::vector<std::size_t>(two.row(1).begin(), two.row(1).end()) == std::vector<std::size_t>{1, 0});
  CHECK_THROWS_AS(knn(line, 4), std::invalid_argument);
  CHECK_THROWS_AS(knn(line, 0), std::invalid_argument);
}

TEST_CASE("knn equals the brute-force oracle, including ties and duplicates") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 1 + rng.index(300);
    auto pts = random_cloud(rng, n);
    if (trial % 2)
      for (auto& p : pts)
        for (double& c : p) c = std::round(c * 3.0);
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(n, 24));
    const auto got = knn(pts, k);
    REQUIRE(got.indices == check::knn_oracle(pts, k).indices);
    for (std::size_t j = 0; j < n; ++j) CHECK(got.row(j)[0] == j);
  }
}

TEST_CASE("group_points lays out neighbours row by row") {
  const PointCloud c(std::vector<Vec3>{{1, 2, 3}, {4, 5, 6}});
  const auto g1 = group_points(c, knn(c, 1));
  CHECK(g1 == std::vector<double>{1, 2, 3, 4, 5, 6});
  const auto g2 = group_points(c, knn(c, 2));
  CHECK(g2 == std::vector<double>{1, 2, 3, 4, 5, 6, 4, 5, 6, 1, 2, 3});
  Rng rng(6);
  const PointCloud r(random_cloud(rng, 17));
  CHECK(group_points(r, knn(r, 5)).size() == 17 * 15);
}

TEST_CASE("voxel downsampling") {
  const PointCloud two(std::vector<Vec3>{{0.1, 0, 0}, {0.2, 0, 0}});
  const auto v = voxel_downsample(two, 0.5);
  REQUIRE(v.size() == 1);
  CHECK(v[0][0] == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(v[0][1] == 0.0);

  const PointCloud one(std::vector<Vec3>{{0.3, -2, 7}});
  CHECK(voxel_downsample(one, 0.1).points() == one.points());
  CHECK(voxel_downsample(PointCloud(), 0.1).empty());
  CHECK_THROWS_AS(voxel_downsample(one, 0.0), std::invalid_argument);

  const PointCloud spread(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {3, 3, 3}});
  CHECK(voxel_downsample(spread, 0.5).size() == 4);
}

TEST_CASE("voxel downsampling keeps each centroid inside its voxel and averages labels") {
  Rng rng(7);
  std::vector<Vec3> pts = random_cloud(rng, 2000, 2.0);
  std::vector<double> labels(pts.size());
  for (double& l : labels) l = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const PointCloud cloud(pts, labels);
  const double voxel = 0.37;
  const auto out = voxel_downsample(cloud, voxel);
  CHECK(out.size() <= cloud.size());
  Vec3 lo = pts[0];
  for (const auto& p : pts)
    for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], p[a]);
  for (int a = 0; a < 3; ++a) lo[a] = std::floor(lo[a]);
  // Recompute every voxel's members and compare centroid and label mean.
  std::map<std::array<long, 3>, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::array<long, 3> key;
    for (int a = 0; a < 3; ++a) key[a] = static_cast<long>(std::floor((pts[i][a] - lo[a]) / voxel));
    members[key].push_back(i);
  }
  REQUIRE(out.size() == members.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    std::array<long, 3> key;
    for (int a = 0; a < 3; ++a) key[a] = static_cast<long>(std::floor((out[j][a] - lo[a]) / voxel));
    REQUIRE(members.count(key) == 1);
    double label = 0.0;
    for (std::size_t i : members[key]) label += labels[i];
    CHECK(out.labels()[j] == doctest::Approx(label / static_cast<double>(members[key].size())));
  }
}

TEST_CASE("unit-ball normalization") {
  const PointCloud a(std::vector<Vec3>{{1, 0, 0}, {3, 0, 0}});
  const auto [na, fa] = normalize_unit_ball(a);
  CHECK(na[0] == Vec3{-1, 0, 0});
  CHECK(na[1] == Vec3{1, 0, 0});
  CHECK(fa.center == Vec3{2, 0, 0});
  CHECK(fa.scale == 1.0);

  const PointCloud single(std::vector<Vec3>{{4, 5, 6}});
  const auto [ns, fs] = normalize_unit_ball(single);
  CHECK(ns[0] == Vec3{0, 0, 0});
  CHECK(fs.center == Vec3{4, 5, 6});
  CHECK(fs.scale == 1.0);
  CHECK_THROWS_AS(normalize_unit_ball(PointCloud()), std::invalid_argument);

  Rng rng(8);
  const PointCloud r(random_cloud(rng, 300, 7.0));
  const auto [nr, fr] = normalize_unit_ball(r);
  double maxr = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    maxr = std::max(maxr, norm(nr[i]));
    const Vec3 back = fr.invert(nr[i]);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(back[k] - r[i][k]) <= 1e-12 * std::max(1.0, std::abs(r[i][k])));
  }
  CHECK(maxr <= 1.0);
  CHECK(maxr == doctest::Approx(1.0));
}

TEST_CASE("point clouds validate their contents") {
  CHECK_THROWS_AS(PointCloud(std::vector<Vec3>{{0, NAN, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(PointCloud(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(PointCloud(std::vector<Vec3>{{0, 0, 0}}, std::vector<double>{1.5}), std::invalid_argument);
}
