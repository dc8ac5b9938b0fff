#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pcc/geom.hpp"

namespace pcc {

/// Indices (ascending) of the extreme points of the convex hull.
///
/// Full-dimensional inputs go through an incremental quickhull with conflict
/// lists. Planar, collinear and coincident inputs fall back to the hull in
/// their affine span. `tolerance` is relative to the coordinate magnitude of
/// the input; a point within it of a face plane is not extreme.
std::vector<std::size_t> convex_hull_vertices(std::span<const Vec3> points,
                                              double tolerance = 1e-10);

}  // namespace pcc
