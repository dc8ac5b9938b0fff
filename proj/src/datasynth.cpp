#include "pcc/datasynth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace pcc {

bool Box::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a)
    if (p[a] < lo[a] || p[a] > hi[a]) return false;
  return true;
}

namespace {

// Hash grid answering "is any stored point within r of q".
class ProximityGrid {
 public:
  ProximityGrid(const std::vector<Vec3>& pts, double r) : pts_(pts), r_(r) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell(pts[i]))].push_back(i);
  }

  bool near(const Vec3& q) const {
    const auto c = cell(q);
    const double r2 = r_ * r_;
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second)
            if (squared_distance(pts_[i], q) < r2) return true;
        }
    return false;
  }

 private:
  std::array<long, 3> cell(const Vec3& p) const {
    return {static_cast<long>(std::floor(p[0] / r_)), static_cast<long>(std::floor(p[1] / r_)),
            static_cast<long>(std::floor(p[2] / r_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    const auto u = [](long v) { return static_cast<std::uint64_t>(v + (1l << 20)) & 0x1fffffu; };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }

  const std::vector<Vec3>& pts_;
  double r_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

Vec3 random_unit(Rng& rng) {
  const double z = rng.uniform(-1.0, 1.0);
  const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {s * std::cos(t), s * std::sin(t), z};
}

Vec3 uniform_in(const Box& b, Rng& rng) {
  return {rng.uniform(b.lo[0], b.hi[0]), rng.uniform(b.lo[1], b.hi[1]), rng.uniform(b.lo[2], b.hi[2])};
}

// A clutter source draws one candidate point per call.
struct Patch {
  enum Kind { plane, blob } kind = plane;
  Vec3 origin{}, u{}, v{};  // plane: origin + s*u + t*v, s,t in [0,1]
  double sigma = 0.0;       // blob: isotropic normal about origin
  double jitter = 0.0;      // out-of-plane noise

  Vec3 draw(Rng& rng) const {
    if (kind == blob) return origin + Vec3{sigma * rng.normal(), sigma * rng.normal(), sigma * rng.normal()};
    const Vec3 n = cross(u, v);
    const double len = norm(n);
    Vec3 p = origin + rng.uniform() * u + rng.uniform() * v;
    if (jitter > 0.0 && len > 0.0) p = p + (jitter * rng.normal() / len) * n;
    return p;
  }
};

}  // namespace

Scene build_scene(const ShapeSpec& spec, const SynthConfig& config, Rng& rng) {
  if (config.points < 1 || config.dense_factor < 1) throw std::invalid_argument("build_scene: point counts must be positive");
  if (!(config.clutter_min > 0.0 && config.clutter_min <= config.clutter_max && config.clutter_max < 1.0))
    throw std::invalid_argument("build_scene: clutter range must satisfy 0 < min <= max < 1");

  Scene scene;
  scene.object = sample_shape(spec, config.dense_factor * config.points, rng);
  const auto& obj = scene.object.points();

  Vec3 lo = obj[0], hi = obj[0];
  for (const auto& p : obj)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  const Vec3 size = hi - lo, mid = 0.5 * (lo + hi);
  scene.crop = {mid - 0.55 * size, mid + 0.55 * size};
  const Box& crop = scene.crop;
  const double diag = norm(size);
  const double height = size[2];

  const double f = rng.uniform(config.clutter_min, config.clutter_max);
  const auto target = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(f / (1.0 - f) * static_cast<double>(obj.size()))));

  // Sources: a floor slab just under the object, up to two vertical patches
  // (walls or neighbouring furniture) and a few noise blobs.
  std::vector<Patch> sources;
  std::vector<double> weights;
  const double floor_z = lo[2] - 0.04 * height;
  sources.push_back({Patch::plane, {crop.lo[0], crop.lo[1], floor_z}, {crop.hi[0] - crop.lo[0], 0, 0},
                     {0, crop.hi[1] - crop.lo[1], 0}, 0.0, 0.002 * diag});
  weights.push_back(0.5);
  const auto walls = rng.index(3);
  for (std::uint64_t w = 0; w < walls; ++w) {
    const int axis = static_cast<int>(rng.index(2));  // wall normal along x or y
    const bool high_side = rng.uniform() < 0.5;
    const double at = high_side ? rng.uniform(hi[axis], crop.hi[axis]) : rng.uniform(crop.lo[axis], lo[axis]);
    const int other = 1 - axis;
    const double span_lo = rng.uniform(crop.lo[other], mid[other]);
    const double span_hi = rng.uniform(mid[other], crop.hi[other]);
    const double top = rng.uniform(mid[2], crop.hi[2]);
    Vec3 origin{}, u{}, v{};
    origin[axis] = at;
    origin[other] = span_lo;
    origin[2] = crop.lo[2];
    u[other] = span_hi - span_lo;
    v[2] = top - crop.lo[2];
    sources.push_back({Patch::plane, origin, u, v, 0.0, 0.002 * diag});
    weights.push_back(0.25 / static_cast<double>(walls));
  }
  const auto blobs = 1 + rng.index(3);
  for (std::uint64_t b = 0; b < blobs; ++b) {
    Patch p;
    p.kind = Patch::blob;
    p.origin = uniform_in(crop, rng);
    p.sigma = rng.uniform(0.02, 0.08) * diag;
    sources.push_back(p);
    weights.push_back(0.25 / static_cast<double>(blobs));
  }
  double wsum = 0.0;
  for (double w : weights) wsum += w;

  const ProximityGrid grid(obj, config.separation * diag);
  auto accept = [&](const Vec3& p) { return crop.contains(p) && !grid.near(p); };

  std::vector<Vec3> clutter;
  clutter.reserve(target);
  const std::size_t budget = 200 * target + 1000;
  for (std::size_t tries = 0; tries < budget && clutter.size() < target; ++tries) {
    double pick = rng.uniform() * wsum;
    std::size_t s = 0;
    while (s + 1 < sources.size() && pick >= weights[s]) pick -= weights[s++];
    const Vec3 p = sources[s].draw(rng);
    if (accept(p)) clutter.push_back(p);
  }
  // Whatever the patches could not supply comes from uniform free space in the box.
  for (std::size_t tries = 0; tries < budget && clutter.size() < target; ++tries) {
    const Vec3 p = uniform_in(crop, rng);
    if (accept(p)) clutter.push_back(p);
  }
  if (clutter.size() < target) throw std::runtime_error("build_scene: crop box has no room for clutter");
  scene.clutter = PointCloud(std::move(clutter));
  return scene;
}

PartialScan make_partial(const Scene& scene, const SynthConfig& config, Rng& rng) {
  if (scene.object.empty() && scene.clutter.empty()) throw std::invalid_argument("make_partial: empty scene");
  std::vector<Vec3> pts = scene.object.points();
  pts.insert(pts.end(), scene.clutter.points().begin(), scene.clutter.points().end());
  const std::size_t n_obj = scene.object.size();
  const double diam = bounding_diagonal(pts);
  const Vec3 center = scene.crop.center();

  for (int attempt = 0; attempt < 10; ++attempt) {
    PartialScan scan;
    std::vector<char> seen(pts.size(), 0);
    for (auto& view : scan.views) {
      view = center + config.view_radius * random_unit(rng);
      // Every point lies within diam + |view - center| of the view.
      const double reach = diam + distance(view, center);
      for (std::size_t i : hidden_point_removal(pts, {view, config.flip_radius_factor * reach})) seen[i] = 1;
    }
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (seen[i]) scan.cloud.push_back(pts[i], i < n_obj ? 1.0 : 0.0);
    if (!scan.cloud.empty()) return scan;
  }
  throw std::runtime_error("make_partial: no point visible after 10 view pairs");
}

PointCloud resample_to(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (cloud.empty()) throw std::invalid_argument("resample_to: empty cloud");
  if (n < 1) throw std::invalid_argument("resample_to: n must be positive");
  std::vector<std::size_t> idx;
  if (cloud.size() >= n) {
    idx = farthest_point_sample(cloud, n, 0);
  } else {
    idx.resize(cloud.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    while (idx.size() < n) idx.push_back(static_cast<std::size_t>(rng.index(cloud.size())));
  }
  return cloud.select(idx);
}

SceneSample finalize_sample(const PointCloud& partial, const PointCloud& complete, std::size_t n,
                            const SynthConfig& config, Rng& rng) {
  if (partial.empty()) throw std::invalid_argument("finalize_sample: empty partial cloud");
  if (complete.empty()) throw std::invalid_argument("finalize_sample: empty complete cloud");
  const double voxel = std::max(config.voxel_fraction * bounding_diagonal(partial.points()), 1e-12);
  PointCloud vox = voxel_downsample(partial, voxel);
  if (vox.empty()) throw std::runtime_error("finalize_sample: nothing left after voxelization");
  if (vox.has_labels()) {
    // Voxels straddling object and clutter are rare; majority wins.
    std::vector<double> labels = vox.labels();
    for (double& l : labels) l = l >= 0.5 ? 1.0 : 0.0;
    vox = PointCloud(vox.points(), std::move(labels));
  }
  const PointCloud input = resample_to(vox, n, rng);
  const PointCloud gt = resample_to(complete, n, rng);

  // One frame for both clouds, centred on the scan; the radius also covers
  // the complete cloud so the target stays inside the unit ball.
  Normalization frame = normalize_unit_ball(input).second;
  double r = frame.scale;
  for (const auto& p : gt.points()) r = std::max(r, distance(p, frame.center));
  frame.scale = r < 1e-12 ? 1.0 : r;

  SceneSample s;
  s.input = apply_normalization(input, frame);
  s.gt_complete = apply_normalization(PointCloud(gt.points()), frame);
  s.frame = frame;
  return s;
}

SceneSample generate_sample(const std::string& id, Category category, std::uint64_t seed,
                            const SynthConfig& config) {
  Rng rng(seed);
  constexpr double kMaxOutlierShare = 0.6;
  for (int attempt = 0; attempt < 50; ++attempt) {
    const ShapeSpec spec = random_shape(category, rng);
    Scene scene;
    try {
      scene = build_scene(spec, config, rng);
    } catch (const std::runtime_error&) {
      continue;
    }
    PartialScan scan = make_partial(scene, config, rng);
    SceneSample s = finalize_sample(scan.cloud, scene.object, config.points, config, rng);
    std::size_t outliers = 0;
    for (double l : s.input.labels()) outliers += l < 0.5;
    const double share = static_cast<double>(outliers) / static_cast<double>(s.input.size());
    if (outliers == 0 || share > kMaxOutlierShare) continue;
    s.id = id;
    s.category = category;
    s.seed = seed;
    s.views = scan.views;
    return s;
  }
  throw std::runtime_error("generate_sample: no acceptable scene for '" + id + "' after 50 attempts");
}

}  // namespace pcc
