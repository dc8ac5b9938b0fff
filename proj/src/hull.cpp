#include "pcc/hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace pcc {
namespace {

struct Face {
  std::array<std::size_t, 3> v{};
  std::array<std::size_t, 3> nbr{};  // nbr[e] shares edge v[e] -> v[(e+1)%3]
  Vec3 normal{};
  double offset = 0.0;
  bool alive = true;
  std::vector<std::size_t> outside;
  std::size_t visit = 0;
};

class QuickHull {
 public:
  QuickHull(std::span<const Vec3> pts, double eps) : pts_(pts), eps_(eps) {}

  std::vector<std::size_t> run(const std::array<std::size_t, 4>& simplex) {
    build_simplex(simplex);
    std::vector<std::size_t> pending;
    for (std::size_t f = 0; f < faces_.size(); ++f) pending.push_back(f);

    while (!pending.empty()) {
      const std::size_t fi = pending.back();
      pending.pop_back();
      if (!faces_[fi].alive || faces_[fi].outside.empty()) continue;
      expand(fi, pending);
    }

    std::vector<char> on(pts_.size(), 0);
    for (const auto& f : faces_)
      if (f.alive)
        for (std::size_t v : f.v) on[v] = 1;
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < on.size(); ++i)
      if (on[i]) out.push_back(i);
    return out;
  }

 private:
  double dist(const Face& f, std::size_t p) const { return dot(f.normal, pts_[p]) - f.offset; }

  std::size_t make_face(std::size_t a, std::size_t b, std::size_t c) {
    Face f;
    f.v = {a, b, c};
    Vec3 n = cross(pts_[b] - pts_[a], pts_[c] - pts_[a]);
    const double len = norm(n);
    f.normal = len > 0.0 ? (1.0 / len) * n : n;
    f.offset = dot(f.normal, pts_[a]);
    faces_.push_back(std::move(f));
    return faces_.size() - 1;
  }

  void build_simplex(const std::array<std::size_t, 4>& s) {
    const Vec3 centroid = 0.25 * (pts_[s[0]] + pts_[s[1]] + pts_[s[2]] + pts_[s[3]]);
    const std::array<std::array<std::size_t, 3>, 4> tris{{{s[0], s[1], s[2]},
                                                          {s[0], s[3], s[1]},
                                                          {s[1], s[3], s[2]},
                                                          {s[2], s[3], s[0]}}};
    for (auto t : tris) {
      std::size_t f = make_face(t[0], t[1], t[2]);
      if (dot(faces_[f].normal, centroid) - faces_[f].offset > 0.0) {
        faces_.pop_back();
        make_face(t[0], t[2], t[1]);
      }
    }
    link_all();

    std::vector<char> used(pts_.size(), 0);
    for (std::size_t v : s) used[v] = 1;
    for (std::size_t p = 0; p < pts_.size(); ++p) {
      if (used[p]) continue;
      double best_d = eps_;
      std::size_t target = faces_.size();
      for (std::size_t f = 0; f < faces_.size(); ++f) {
        const double d = dist(faces_[f], p);
        if (d > best_d) {
          best_d = d;
          target = f;
        }
      }
      if (target < faces_.size()) faces_[target].outside.push_back(p);
    }
  }

  // Neighbour links for the initial tetrahedron by brute-force edge matching.
  void link_all() {
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = faces_[f].v[e], b = faces_[f].v[(e + 1) % 3];
        for (std::size_t g = 0; g < faces_.size(); ++g) {
          if (g == f) continue;
          for (int h = 0; h < 3; ++h) {
            if (faces_[g].v[h] == b && faces_[g].v[(h + 1) % 3] == a) faces_[f].nbr[e] = g;
          }
        }
      }
    }
  }

  int edge_of(const Face& f, std::size_t a, std::size_t b) const {
    for (int e = 0; e < 3; ++e)
      if (f.v[e] == a && f.v[(e + 1) % 3] == b) return e;
    throw std::logic_error("convex hull: broken adjacency");
  }

  void expand(std::size_t fi, std::vector<std::size_t>& pending) {
    // Farthest outside point of this face; lowest index on ties.
    std::size_t apex = faces_[fi].outside.front();
    double best = dist(faces_[fi], apex);
    for (std::size_t p : faces_[fi].outside) {
      const double d = dist(faces_[fi], p);
      if (d > best || (d == best && p < apex)) {
        best = d;
        apex = p;
      }
    }

    // Visible region by flood fill.
    ++stamp_;
    std::vector<std::size_t> visible;
    struct HorizonEdge {
      std::size_t a, b, outer;
    };
    std::vector<HorizonEdge> horizon;
    visit(fi, apex, visible, horizon);

    std::vector<std::size_t> orphans;
    for (std::size_t f : visible) {
      faces_[f].alive = false;
      for (std::size_t p : faces_[f].outside)
        if (p != apex) orphans.push_back(p);
      faces_[f].outside.clear();
      faces_[f].outside.shrink_to_fit();
    }

    // New fan around the apex.
    const std::size_t first = faces_.size();
    for (const auto& h : horizon) {
      const std::size_t nf = make_face(h.a, h.b, apex);
      faces_[nf].nbr[0] = h.outer;
      Face& outer = faces_[h.outer];
      outer.nbr[edge_of(outer, h.b, h.a)] = nf;
    }
    const std::size_t count = horizon.size();
    std::unordered_map<std::size_t, std::size_t> starts, ends;
    for (std::size_t i = 0; i < count; ++i) {
      starts[horizon[i].a] = first + i;
      ends[horizon[i].b] = first + i;
    }
    for (std::size_t i = 0; i < count; ++i) {
      Face& f = faces_[first + i];
      f.nbr[1] = starts.at(horizon[i].b);  // edge b -> apex
      f.nbr[2] = ends.at(horizon[i].a);    // edge apex -> a
    }

    std::sort(orphans.begin(), orphans.end());
    for (std::size_t p : orphans) {
      double best_d = eps_;
      std::size_t target = 0;
      bool found = false;
      for (std::size_t i = 0; i < count; ++i) {
        const double d = dist(faces_[first + i], p);
        if (d > best_d) {
          best_d = d;
          target = first + i;
          found = true;
        }
      }
      if (found) faces_[target].outside.push_back(p);
    }
    for (std::size_t i = 0; i < count; ++i) pending.push_back(first + i);
  }

  template <class Horizon>
  void visit(std::size_t start, std::size_t apex, std::vector<std::size_t>& visible,
             std::vector<Horizon>& horizon) {
    struct Frame {
      std::size_t face;
      int edge;
      int start_edge;
    };
    faces_[start].visit = stamp_;
    visible.push_back(start);
    std::vector<Frame> stack{{start, 0, 0}};
    while (!stack.empty()) {
      Frame& fr = stack.back();
      if (fr.edge == 3) {
        stack.pop_back();
        continue;
      }
      const int e = (fr.start_edge + fr.edge) % 3;
      ++fr.edge;
      const Face& f = faces_[fr.face];
      const std::size_t g = f.nbr[e];
      Face& nb = faces_[g];
      if (nb.visit == stamp_) continue;
      if (dist(nb, apex) > eps_) {
        nb.visit = stamp_;
        visible.push_back(g);
        const int shared = edge_of(nb, f.v[(e + 1) % 3], f.v[e]);
        stack.push_back({g, 1, shared});
      } else {
        horizon.push_back({f.v[e], f.v[(e + 1) % 3], g});
      }
    }
  }

  std::span<const Vec3> pts_;
  double eps_;
  std::vector<Face> faces_;
  std::size_t stamp_ = 0;
};

// Hull of points lying in a plane through `origin` spanned by u, v.
std::vector<std::size_t> planar_hull(std::span<const Vec3> pts, const Vec3& origin, const Vec3& u,
                                     const Vec3& v, double eps) {
  struct P2 {
    double x, y;
    std::size_t i;
  };
  std::vector<P2> q;
  q.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3 d = pts[i] - origin;
    q.push_back({dot(d, u), dot(d, v), i});
  }
  std::sort(q.begin(), q.end(), [](const P2& a, const P2& b) {
    return a.x != b.x ? a.x < b.x : (a.y != b.y ? a.y < b.y : a.i < b.i);
  });
  // Drop exact duplicates, keeping the lowest index.
  std::vector<P2> uq;
  for (const auto& p : q)
    if (uq.empty() || uq.back().x != p.x || uq.back().y != p.y) uq.push_back(p);
  if (uq.size() < 3) {
    std::vector<std::size_t> out;
    for (const auto& p : uq) out.push_back(p.i);
    std::sort(out.begin(), out.end());
    return out;
  }
  auto turn = [](const P2& o, const P2& a, const P2& b) {
    const double cr = (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    const double len = std::hypot(b.x - o.x, b.y - o.y);
    return len > 0.0 ? cr / len : 0.0;  // signed distance of a from line o-b scaled
  };
  std::vector<P2> hull(2 * uq.size());
  std::size_t k = 0;
  for (const auto& p : uq) {
    while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= eps) --k;
    hull[k++] = p;
  }
  for (std::size_t i = uq.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && turn(hull[k - 2], hull[k - 1], uq[i]) <= eps) --k;
    hull[k++] = uq[i];
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i + 1 < k; ++i) out.push_back(hull[i].i);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::vector<std::size_t> convex_hull_vertices(std::span<const Vec3> pts, double tolerance) {
  const std::size_t n = pts.size();
  if (n == 0) return {};
  double magnitude = 0.0;
  for (const auto& p : pts)
    for (double c : p) magnitude = std::max(magnitude, std::abs(c));
  const double eps = tolerance * std::max(magnitude, 1.0);

  // Simplex seeds: the pair of axis extremes farthest apart, then the farthest
  // point from their line, then from their plane.
  std::array<std::size_t, 6> ext{};
  for (int a = 0; a < 3; ++a) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pts[i][a] < pts[ext[2 * a]][a]) ext[2 * a] = i;
      if (pts[i][a] > pts[ext[2 * a + 1]][a]) ext[2 * a + 1] = i;
    }
  }
  std::size_t i0 = ext[0], i1 = ext[1];
  double best = -1.0;
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = a + 1; b < 6; ++b) {
      const double d = squared_distance(pts[ext[a]], pts[ext[b]]);
      if (d > best) {
        best = d;
        i0 = ext[a];
        i1 = ext[b];
      }
    }
  if (std::sqrt(best) <= eps) return {0};  // all points coincide

  const Vec3 axis = (1.0 / distance(pts[i0], pts[i1])) * (pts[i1] - pts[i0]);
  std::size_t i2 = i0;
  best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = norm(cross(pts[i] - pts[i0], axis));
    if (d > best) {
      best = d;
      i2 = i;
    }
  }
  if (best <= eps) {
    // Collinear: the two ends along the axis.
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = dot(pts[i] - pts[i0], axis);
      if (t < dot(pts[lo] - pts[i0], axis)) lo = i;
      if (t > dot(pts[hi] - pts[i0], axis)) hi = i;
    }
    std::vector<std::size_t> out{std::min(lo, hi), std::max(lo, hi)};
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  Vec3 normal = cross(pts[i1] - pts[i0], pts[i2] - pts[i0]);
  normal = (1.0 / norm(normal)) * normal;
  std::size_t i3 = i0;
  best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::abs(dot(pts[i] - pts[i0], normal));
    if (d > best) {
      best = d;
      i3 = i;
    }
  }
  if (best <= eps) {
    const Vec3 v = cross(normal, axis);
    return planar_hull(pts, pts[i0], axis, v, eps);
  }

  QuickHull qh(pts, eps);
  return qh.run({i0, i1, i2, i3});
}

}  // namespace pcc
