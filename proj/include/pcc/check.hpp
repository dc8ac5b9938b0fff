#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcc/autodiff.hpp"
#include "pcc/geom.hpp"

// Slow, obviously-correct reference implementations used to cross-check the
// fast kernels, plus a finite-difference gradient checker.
namespace pcc::check {

/// FPS recomputing every candidate's distance to the whole selected set.
std::vector<std::size_t> fps_oracle(std::span<const Vec3> points, std::size_t m, std::size_t seed_index = 0);
/// KNN by sorting every row completely on (distance, index).
NeighborIndex knn_oracle(std::span<const Vec3> points, std::size_t k);
/// Chamfer distance from all N*M pairwise distances.
double chamfer_oracle(std::span<const Vec3> a, std::span<const Vec3> b, bool squared = false);

/// True when the segment from `view` to `p` passes no closer than `radius`
/// to any other point that lies strictly between them.
bool ray_cast_visible(std::span<const Vec3> points, std::size_t i, const Vec3& view, double radius);
/// True when `p` on the sphere (center, r) faces `view`: the ray to it does
/// not enter the sphere before reaching it.
bool sphere_point_visible(const Vec3& p, const Vec3& center, double r, const Vec3& view);

struct GradCheckResult {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose perturbation flips a discrete choice
  double max_rel_error = 0.0;
  std::string worst;  // "leaf[index]" of the largest error
  bool ok(double tol) const { return checked > 0 && max_rel_error <= tol; }
};

struct GradCheckOptions {
  double h = 1e-6;
  double denom_floor = 1e-5;  // relative error is |a-n| / max(|a|, |n|, floor)
  std::size_t max_coords_per_leaf = 0;  // 0 = all; otherwise an even stride through the leaf
};

/// Compares reverse-mode gradients of `loss()` against central differences
/// for every coordinate of every leaf. `loss` must rebuild the graph from the
/// leaves' current values each call. Coordinates where either perturbation
/// changes the tape's selection signature are skipped.
GradCheckResult check_gradients(const std::function<ad::Tensor()>& loss, std::vector<ad::Tensor> leaves,
                                std::vector<std::string> names = {}, const GradCheckOptions& options = {});

}  // namespace pcc::check
