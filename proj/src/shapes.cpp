#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pcc/datasynth.hpp"

namespace pcc {

std::string category_name(Category c) {
  switch (c) {
    case Category::chair:
      return "chair";
    case Category::table:
      return "table";
    case Category::lamp:
      return "lamp";
    case Category::cabinet:
      return "cabinet";
  }
  return "unknown";
}

Category parse_category(const std::string& name) {
  for (Category c : kAllCategories)
    if (category_name(c) == name) return c;
  throw std::invalid_argument("unknown category '" + name + "' (expected chair, table, lamp or cabinet)");
}

namespace {

void add_quad(std::vector<Triangle>& mesh, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  mesh.push_back({a, b, c});
  mesh.push_back({a, c, d});
}

// Axis-aligned box from its minimum corner and extents.
void add_box(std::vector<Triangle>& mesh, const Vec3& lo, const Vec3& size) {
  const Vec3 hi = lo + size;
  const Vec3 p000 = lo, p100{hi[0], lo[1], lo[2]}, p110{hi[0], hi[1], lo[2]}, p010{lo[0], hi[1], lo[2]};
  const Vec3 p001{lo[0], lo[1], hi[2]}, p101{hi[0], lo[1], hi[2]}, p111 = hi, p011{lo[0], hi[1], hi[2]};
  add_quad(mesh, p000, p010, p110, p100);  // bottom
  add_quad(mesh, p001, p101, p111, p011);  // top
  add_quad(mesh, p000, p100, p101, p001);  // front
  add_quad(mesh, p010, p011, p111, p110);  // back
  add_quad(mesh, p000, p001, p011, p010);  // left
  add_quad(mesh, p100, p110, p111, p101);  // right
}

// Truncated cone around the z axis through `base`; caps only when requested.
void add_frustum(std::vector<Triangle>& mesh, const Vec3& base, double r_bottom, double r_top, double height,
                 bool caps, int segments = 24) {
  const Vec3 top = base + Vec3{0.0, 0.0, height};
  auto ring = [&](const Vec3& c, double r, int i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / segments;
    return c + Vec3{r * std::cos(t), r * std::sin(t), 0.0};
  };
  for (int i = 0; i < segments; ++i) {
    const Vec3 b0 = ring(base, r_bottom, i), b1 = ring(base, r_bottom, i + 1);
    const Vec3 t0 = ring(top, r_top, i), t1 = ring(top, r_top, i + 1);
    add_quad(mesh, b0, b1, t1, t0);
    if (caps) {
      mesh.push_back({base, b1, b0});
      mesh.push_back({top, t0, t1});
    }
  }
}

void chair(ShapeSpec& s, Rng& rng) {
  auto& d = s.dims;
  d["seat_width"] = rng.uniform(0.40, 0.60);
  d["seat_depth"] = rng.uniform(0.40, 0.60);
  d["seat_height"] = rng.uniform(0.40, 0.50);
  d["seat_thickness"] = rng.uniform(0.04, 0.07);
  d["leg_thickness"] = rng.uniform(0.03, 0.06);
  d["back_height"] = rng.uniform(0.40, 0.60);
  d["back_thickness"] = rng.uniform(0.03, 0.06);
  const double w = d["seat_width"], dp = d["seat_depth"], h = d["seat_height"], st = d["seat_thickness"];
  const double lt = d["leg_thickness"], bh = d["back_height"], bt = d["back_thickness"];
  const double leg_h = h - st;
  for (double x : {0.0, w - lt})
    for (double y : {0.0, dp - lt}) add_box(s.mesh, {x, y, 0.0}, {lt, lt, leg_h});
  add_box(s.mesh, {0.0, 0.0, leg_h}, {w, dp, st});
  add_box(s.mesh, {0.0, dp - bt, h}, {w, bt, bh});
}

void table(ShapeSpec& s, Rng& rng) {
  auto& d = s.dims;
  d["top_width"] = rng.uniform(0.8, 1.4);
  d["top_depth"] = rng.uniform(0.5, 0.9);
  d["height"] = rng.uniform(0.6, 0.8);
  d["top_thickness"] = rng.uniform(0.03, 0.06);
  d["leg_thickness"] = rng.uniform(0.04, 0.08);
  const double w = d["top_width"], dp = d["top_depth"], h = d["height"], tt = d["top_thickness"];
  const double lt = d["leg_thickness"];
  const double inset = 0.05;
  for (double x : {inset, w - inset - lt})
    for (double y : {inset, dp - inset - lt}) add_box(s.mesh, {x, y, 0.0}, {lt, lt, h - tt});
  add_box(s.mesh, {0.0, 0.0, h - tt}, {w, dp, tt});
}

void lamp(ShapeSpec& s, Rng& rng) {
  auto& d = s.dims;
  d["base_radius"] = rng.uniform(0.12, 0.20);
  d["base_height"] = rng.uniform(0.03, 0.05);
  d["pole_radius"] = rng.uniform(0.015, 0.03);
  d["pole_height"] = rng.uniform(0.5, 1.0);
  d["shade_bottom_radius"] = rng.uniform(0.15, 0.30);
  d["shade_top_radius"] = rng.uniform(0.08, 0.15);
  d["shade_height"] = rng.uniform(0.15, 0.30);
  const double bh = d["base_height"], ph = d["pole_height"], sh = d["shade_height"];
  add_frustum(s.mesh, {0.0, 0.0, 0.0}, d["base_radius"], d["base_radius"], bh, true);
  add_frustum(s.mesh, {0.0, 0.0, bh}, d["pole_radius"], d["pole_radius"], ph, true, 12);
  add_frustum(s.mesh, {0.0, 0.0, bh + ph - 0.5 * sh}, d["shade_bottom_radius"], d["shade_top_radius"], sh, false);
}

void cabinet(ShapeSpec& s, Rng& rng) {
  auto& d = s.dims;
  d["width"] = rng.uniform(0.5, 1.0);
  d["depth"] = rng.uniform(0.35, 0.6);
  d["height"] = rng.uniform(0.6, 1.2);
  d["panel"] = rng.uniform(0.02, 0.04);
  const double w = d["width"], dp = d["depth"], h = d["height"], t = d["panel"];
  // Open front with one shelf.
  add_box(s.mesh, {0.0, 0.0, 0.0}, {t, dp, h});
  add_box(s.mesh, {w - t, 0.0, 0.0}, {t, dp, h});
  add_box(s.mesh, {t, 0.0, 0.0}, {w - 2 * t, dp, t});
  add_box(s.mesh, {t, 0.0, h - t}, {w - 2 * t, dp, t});
  add_box(s.mesh, {t, dp - t, t}, {w - 2 * t, t, h - 2 * t});
  add_box(s.mesh, {t, 0.0, 0.5 * (h - t)}, {w - 2 * t, dp - t, t});
}

}  // namespace

ShapeSpec random_shape(Category category, Rng& rng) {
  ShapeSpec s;
  s.category = category;
  switch (category) {
    case Category::chair:
      chair(s, rng);
      break;
    case Category::table:
      table(s, rng);
      break;
    case Category::lamp:
      lamp(s, rng);
      break;
    case Category::cabinet:
      cabinet(s, rng);
      break;
  }
  return s;
}

PointCloud sample_shape(const ShapeSpec& spec, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_shape: n must be positive");
  if (spec.mesh.empty()) throw std::invalid_argument("sample_shape: empty mesh");
  std::vector<double> cumulative;
  cumulative.reserve(spec.mesh.size());
  double total = 0.0;
  for (const auto& t : spec.mesh) {
    const double a = t.area();
    if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("sample_shape: degenerate triangle in mesh");
    total += a;
    cumulative.push_back(total);
  }
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pick = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    const Triangle& t = spec.mesh[std::min<std::size_t>(it - cumulative.begin(), spec.mesh.size() - 1)];
    const double r1 = std::sqrt(rng.uniform()), r2 = rng.uniform();
    pts.push_back((1.0 - r1) * t.a + (r1 * (1.0 - r2)) * t.b + (r1 * r2) * t.c);
  }
  return PointCloud(std::move(pts));
}

}  // namespace pcc
