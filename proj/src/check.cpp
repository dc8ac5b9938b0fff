#include "pcc/check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pcc::check {

std::vector<std::size_t> fps_oracle(std::span<const Vec3> points, std::size_t m, std::size_t seed_index) {
  if (points.empty() || m < 1 || m > points.size() || seed_index >= points.size())
    throw std::invalid_argument("fps_oracle: bad arguments");
  std::vector<std::size_t> chosen{seed_index};
  std::vector<char> taken(points.size(), 0);
  taken[seed_index] = 1;
  while (chosen.size() < m) {
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (taken[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) d = std::min(d, squared_distance(points[i], points[c]));
      if (d > best_d) {  // strict: the lowest index keeps a tie
        best_d = d;
        best = i;
      }
    }
    chosen.push_back(best);
    taken[best] = 1;
  }
  return chosen;
}

NeighborIndex knn_oracle(std::span<const Vec3> points, std::size_t k) {
  if (k < 1 || k > points.size()) throw std::invalid_argument("knn_oracle: bad k");
  NeighborIndex out;
  out.k = k;
  for (std::size_t j = 0; j < points.size(); ++j) {
    std::vector<std::pair<double, std::size_t>> row;
    for (std::size_t i = 0; i < points.size(); ++i) row.emplace_back(squared_distance(points[j], points[i]), i);
    std::sort(row.begin(), row.end());
    // Self first, even when duplicates sit at distance zero too.
    auto self = std::find_if(row.begin(), row.end(), [j](const auto& e) { return e.second == j; });
    std::rotate(row.begin(), self, self + 1);
    for (std::size_t t = 0; t < k; ++t) out.indices.push_back(row[t].second);
  }
  return out;
}

double chamfer_oracle(std::span<const Vec3> a, std::span<const Vec3> b, bool squared) {
  if (a.empty() || b.empty()) throw std::invalid_argument("chamfer_oracle: empty cloud");
  std::vector<std::vector<double>> d(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double s = squared_distance(a[i], b[j]);
      d[i][j] = squared ? s : std::sqrt(s);
    }
  double ab = 0.0, ba = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ab += *std::min_element(d[i].begin(), d[i].end());
  for (std::size_t j = 0; j < b.size(); ++j) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) m = std::min(m, d[i][j]);
    ba += m;
  }
  return ab / static_cast<double>(a.size()) + ba / static_cast<double>(b.size());
}

bool ray_cast_visible(std::span<const Vec3> points, std::size_t i, const Vec3& view, double radius) {
  const Vec3 dir = points[i] - view;
  const double len2 = dot(dir, dir);
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j == i) continue;
    const Vec3 w = points[j] - view;
    const double t = dot(w, dir) / len2;
    if (t <= 0.0 || t >= 1.0) continue;
    if (squared_distance(view + t * dir, points[j]) <= radius * radius) return false;
  }
  return true;
}

bool sphere_point_visible(const Vec3& p, const Vec3& center, double r, const Vec3& view) {
  (void)r;
  return dot(p - center, view - p) > 0.0;
}

GradCheckResult check_gradients(const std::function<ad::Tensor()>& loss, std::vector<ad::Tensor> leaves,
                                std::vector<std::string> names, const GradCheckOptions& options) {
  for (auto& t : leaves) {
    if (!t.is_leaf() || !t.requires_grad()) throw std::invalid_argument("check_gradients: leaves must require grad");
    t.zero_grad();
  }
  const ad::Tensor base = loss();
  ad::Tape tape(base);
  const std::uint64_t sig = tape.selection_signature();
  tape.backward();
  std::vector<std::vector<double>> analytic;
  for (const auto& t : leaves) {
    // Leaves the loss never reaches have a zero gradient.
    if (t.has_grad()) {
      const auto g = t.grad();
      analytic.emplace_back(g.begin(), g.end());
    } else {
      analytic.emplace_back(t.numel(), 0.0);
    }
  }

  GradCheckResult r;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto data = leaves[li].mutable_data();
    const std::size_t n = data.size();
    const std::size_t stride =
        options.max_coords_per_leaf && n > options.max_coords_per_leaf ? n / options.max_coords_per_leaf : 1;
    for (std::size_t k = 0; k < n; k += stride) {
      const double x0 = data[k];
      data[k] = x0 + options.h;
      const ad::Tensor up = loss();
      const std::uint64_t sig_up = ad::Tape(up).selection_signature();
      data[k] = x0 - options.h;
      const ad::Tensor down = loss();
      const std::uint64_t sig_down = ad::Tape(down).selection_signature();
      data[k] = x0;
      if (sig_up != sig || sig_down != sig) {
        ++r.skipped;
        continue;
      }
      const double numeric = (up.item() - down.item()) / (2.0 * options.h);
      const double a = analytic[li][k];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), options.denom_floor});
      ++r.checked;
      if (err > r.max_rel_error || !std::isfinite(err)) {
        r.max_rel_error = std::isfinite(err) ? err : std::numeric_limits<double>::infinity();
        r.worst = (li < names.size() ? names[li] : "leaf" + std::to_string(li)) + "[" + std::to_string(k) + "]";
      }
    }
  }
  return r;
}

}  // namespace pcc::check
