#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcc/geom.hpp"
#include "pcc/rng.hpp"

namespace pcc {

enum class Category { chair, table, lamp, cabinet };

inline constexpr std::array<Category, 4> kAllCategories{Category::chair, Category::table, Category::lamp,
                                                        Category::cabinet};

std::string category_name(Category c);
Category parse_category(const std::string& name);

struct Triangle {
  Vec3 a, b, c;
  double area() const { return 0.5 * norm(cross(b - a, c - a)); }
};

/// Parametric stand-in for a CAD model: named dimensions plus the mesh they produce.
struct ShapeSpec {
  Category category = Category::chair;
  std::map<std::string, double> dims;
  std::vector<Triangle> mesh;
};

/// Random dimensions from the category's ranges, realized as a triangle mesh
/// standing on z = 0.
ShapeSpec random_shape(Category category, Rng& rng);

/// Area-weighted uniform surface sampling.
PointCloud sample_shape(const ShapeSpec& spec, std::size_t n, Rng& rng);

struct SynthConfig {
  std::size_t points = 2048;        // N per sample
  std::size_t dense_factor = 4;     // object surface samples = dense_factor * N
  double clutter_min = 0.1;         // clutter share of all scene points
  double clutter_max = 0.5;
  double separation = 0.1;          // clutter keeps this fraction of the object diagonal away
  double view_radius = 3.0;
  double flip_radius_factor = 100.0;  // HPR radius as a multiple of the scene diameter
  double voxel_fraction = 0.02;     // voxel edge as a fraction of the scene diameter
  std::vector<Category> categories{kAllCategories.begin(), kAllCategories.end()};
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
};

struct Box {
  Vec3 lo, hi;
  bool contains(const Vec3& p) const;
  Vec3 center() const { return 0.5 * (lo + hi); }
};

struct Scene {
  PointCloud object;   // dense surface sample, also the source of the complete cloud
  PointCloud clutter;  // surroundings inside the crop box
  Box crop;
};

/// Object sample plus clutter (floor patch, 0-2 wall or neighbour fragments,
/// noise blobs) clipped to the object box enlarged 1.1x about its centre.
Scene build_scene(const ShapeSpec& spec, const SynthConfig& config, Rng& rng);

struct PartialScan {
  PointCloud cloud;  // labels: 1 object, 0 clutter
  std::array<Vec3, 2> views;
};

/// Keeps the scene points visible from at least one of two random views on a
/// sphere of radius `view_radius` about the crop-box centre.
PartialScan make_partial(const Scene& scene, const SynthConfig& config, Rng& rng);

struct SceneSample {
  std::string id;
  Category category = Category::chair;
  PointCloud input;        // N points, binary labels
  PointCloud gt_complete;  // N points
  std::uint64_t seed = 0;
  std::array<Vec3, 2> views{};
  Normalization frame;
};

/// Voxelizes and resamples the scan to exactly n points, then normalizes scan
/// and complete cloud with one shared frame centred on the scan.
SceneSample finalize_sample(const PointCloud& partial, const PointCloud& complete, std::size_t n,
                            const SynthConfig& config, Rng& rng);

/// Exactly n points: farthest-point trim (seed 0) or uniform random duplication.
PointCloud resample_to(const PointCloud& cloud, std::size_t n, Rng& rng);

/// Full pipeline for one record, deterministic in `seed`.
SceneSample generate_sample(const std::string& id, Category category, std::uint64_t seed,
                            const SynthConfig& config);

struct ManifestEntry {
  std::string id;
  std::string category;
  std::string split;  // train | val | test
  std::string path;   // relative to the manifest's directory
  std::uint64_t seed = 0;
  Vec3 center{};
  double scale = 1.0;
};

struct Manifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> split(const std::string& name) const;
  std::size_t count(const std::string& split) const;
};

/// Split sizes for `count` samples under `ratios` (train, val, test).
std::array<std::size_t, 3> split_sizes(std::size_t count, const std::array<double, 3>& ratios);

/// Writes samples/<id>.pcsm per record and manifest.jsonl under `out_dir`.
Manifest generate_dataset(std::size_t count, std::uint64_t seed, const std::filesystem::path& out_dir,
                          const SynthConfig& config);

Manifest load_manifest(const std::filesystem::path& dir_or_file);
std::string manifest_line(const ManifestEntry& e);

// PCSM sample file: "PCSM", u32 version, u32 n, n x (x, y, z, label) f32 for
// the input, then n x (x, y, z) f32 for the complete cloud; little-endian.
inline constexpr std::uint32_t kSampleVersion = 1;

std::vector<std::uint8_t> encode_sample(const PointCloud& input, const PointCloud& gt_complete);
std::pair<PointCloud, PointCloud> decode_sample(std::span<const std::uint8_t> bytes);
void write_sample(const std::filesystem::path& path, const SceneSample& sample);

struct LoadedSample {
  ManifestEntry entry;
  PointCloud input;
  PointCloud gt_complete;
};
LoadedSample load_sample(const Manifest& manifest, const ManifestEntry& entry);

}  // namespace pcc
