#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pcc/check.hpp"
#include "pcc/metrics.hpp"
#include "support.hpp"

using namespace pcc;
using pcc::test::random_cloud;

namespace {

std::vector<Vec3> shuffled(std::vector<Vec3> v, Rng& rng) {
  for (std::size_t i = v.size() - 1; i > 0; --i) std::swap(v[i], v[rng.index(i + 1)]);
  return v;
}

// Direct transcription of the density-aware distance, one direction at a time.
double dcd_oracle_side(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double alpha) {
  std::vector<std::size_t> nn(a.size());
  std::vector<double> d2(a.size());
  std::vector<std::size_t> hits(b.size(), 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = INFINITY;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = squared_distance(a[i], b[j]);
      if (d < best) {
        best = d;
        nn[i] = j;
      }
    }
    d2[i] = best;
    ++hits[nn[i]];
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += 1.0 - std::exp(-alpha * d2[i]) / double(hits[nn[i]]);
  return s / double(a.size());
}

}  // namespace

TEST_CASE("chamfer examples") {
  const std::vector<Vec3> o{{0, 0, 0}}, x{{1, 0, 0}}, two{{0, 0, 0}, {2, 0, 0}};
  CHECK(chamfer_distance(o, o) == 0.0);
  CHECK(chamfer_distance(o, x) == 2.0);
  CHECK(chamfer_distance(two, x) == 2.0);
  CHECK(chamfer_distance(o, x, true) == 2.0);
  CHECK_THROWS_AS(chamfer_distance(std::vector<Vec3>{}, x), std::invalid_argument);
}

TEST_CASE("chamfer is symmetric, zero on itself, and matches the oracle") {
  Rng rng(21);
  for (int t = 0; t < 30; ++t) {
    const auto a = random_cloud(rng, 1 + rng.index(512));
    const auto b = random_cloud(rng, 1 + rng.index(512));
    CHECK(chamfer_distance(a, b) == chamfer_distance(b, a));
    CHECK(chamfer_distance(a, a) == 0.0);
    CHECK(std::abs(chamfer_distance(a, b) - check::chamfer_oracle(a, b)) <= 1e-12);
    CHECK(std::abs(chamfer_distance(a, b, true) - check::chamfer_oracle(a, b, true)) <= 1e-12);
  }
}

TEST_CASE("dcd examples and bounds") {
  const std::vector<Vec3> o{{0, 0, 0}}, x{{1, 0, 0}};
  CHECK(density_aware_cd(o, x, 1.0) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  Rng rng(22);
  const auto a = random_cloud(rng, 50);
  CHECK(density_aware_cd(a, a) == 0.0);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_cloud(rng, 1 + rng.index(200), 0.05);
    const auto q = random_cloud(rng, 1 + rng.index(200), 0.05);
    const double alpha = t % 2 ? 1000.0 : 10.0;
    const double d = density_aware_cd(p, q, alpha);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    const double oracle = 0.5 * (dcd_oracle_side(p, q, alpha) + dcd_oracle_side(q, p, alpha));
    CHECK(d == doctest::Approx(oracle).epsilon(1e-12));
  }
  // Duplicated targets make the matching non-bijective, so the value is positive.
  CHECK(density_aware_cd(std::vector<Vec3>{{0, 0, 0}, {0, 0, 0}}, o) > 0.0);
  CHECK_THROWS_AS(density_aware_cd(o, x, 0.0), std::invalid_argument);
}

TEST_CASE("f-score examples") {
  const double tau = 1e-3;
  const std::vector<Vec3> o{{0, 0, 0}};
  CHECK(f_score(o, o, tau) == 1.0);
  CHECK(f_score(o, std::vector<Vec3>{{0, 0, tau / 2}}, tau) == 1.0);
  CHECK(f_score(o, std::vector<Vec3>{{0, 0, 2 * tau}}, tau) == 0.0);
  CHECK_THROWS_AS(f_score(o, o, 0.0), std::invalid_argument);
}

TEST_CASE("f-score is monotone in tau") {
  Rng rng(23);
  const auto a = random_cloud(rng, 200, 0.2);
  const auto b = random_cloud(rng, 150, 0.2);
  double prev = 0.0;
  for (double tau = 1e-4; tau < 1.0; tau *= 1.5) {
    const double f = f_score(a, b, tau);
    CHECK(f >= prev);
    prev = f;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("segmentation accuracy examples") {
  const std::vector<double> gt{1, 0, 0, 0};
  CHECK(segmentation_accuracy(gt, gt) == 1.0);
  CHECK(segmentation_accuracy(std::vector<double>{0.9, 0.2, 0.7, 0.1}, gt) == 0.75);
  const double e = 1e-9;
  CHECK(segmentation_accuracy(std::vector<double>(4, 0.5 - e), std::vector<double>(4, 1.0)) == 0.0);
  CHECK_THROWS_AS(segmentation_accuracy(std::vector<double>{1}, gt), std::invalid_argument);
}

TEST_CASE("metrics are permutation invariant") {
  Rng rng(24);
  const auto a = random_cloud(rng, 120, 0.05);
  const auto b = random_cloud(rng, 90, 0.05);
  const auto pa = shuffled(a, rng), pb = shuffled(b, rng);
  CHECK(chamfer_distance(pa, pb) == doctest::Approx(chamfer_distance(a, b)).epsilon(1e-13));
  CHECK(density_aware_cd(pa, pb) == doctest::Approx(density_aware_cd(a, b)).epsilon(1e-13));
  CHECK(f_score(pa, pb, 0.01) == f_score(a, b, 0.01));
}

TEST_CASE("report rows and serialization") {
  MetricsReport r;
  const PointCloud a(std::vector<Vec3>{{0, 0, 0}}), b(std::vector<Vec3>{{1e-4, 0, 0}});
  const std::vector<double> lp{0.9, 0.1}, lg{1, 0};
  for (int i = 0; i < 2; ++i) {
    MetricRow row;
    row.id = "s" + std::to_string(i);
    row.category = i ? "lamp" : "chair";
    row.block = 1;
    row.values = compute_metrics(&a, &b, lp, lg, r.config);
    r.samples.push_back(row);
  }
  r.aggregate();
  const auto& m = r.overall(1);
  REQUIRE(m.values.cd);
  CHECK(*m.values.cd == doctest::Approx(2.0));  // 2e-4 scaled by 1e4
  CHECK(*m.values.seg_macc == 1.0);
  CHECK(*m.values.fscore_large == 1.0);
  CHECK(r.aggregates.size() == 3);
  const auto csv = r.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') >= 5);
  CHECK(r.to_markdown().find("| ") != std::string::npos);

  // No completion output leaves the completion columns empty.
  const auto seg_only = compute_metrics(nullptr, &b, lp, lg, r.config);
  CHECK_FALSE(seg_only.cd);
  CHECK(seg_only.seg_macc);
}
