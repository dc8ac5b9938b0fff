#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pcc/geom.hpp"
#include "pcc/rng.hpp"

namespace pcc::test {

inline std::vector<Vec3> random_cloud(Rng& rng, std::size_t n, double extent = 1.0) {
  std::vector<Vec3> p(n);
  for (auto& v : p) v = {rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent)};
  return p;
}

inline std::vector<Vec3> unit_sphere(Rng& rng, std::size_t n) {
  std::vector<Vec3> pts;
  while (pts.size() < n) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double len = norm(v);
    if (len > 1e-9) pts.push_back((1.0 / len) * v);
  }
  return pts;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("pcc_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace pcc::test

#include "pcc/csnet.hpp"

namespace pcc::test {

/// Network small enough for exhaustive finite differences: N=32, M=2, widths <= 16.
inline CsNetConfig mini_config() {
  CsNetConfig cfg;
  cfg.n_points = 32;
  cfg.m_blocks = 2;
  cfg.width_multiplier = 1.0 / 32;
  cfg.k_neighbors = 4;
  cfg.decoder_levels = 3;
  cfg.decoder_branching = 4;
  cfg.f_prime_width = 8;
  cfg.f_double_prime_width = 8;
  return cfg;
}

/// Initialized parameters with every tensor (zero-initialized ones included)
/// nudged off its starting value so no gradient path is trivially dead.
inline CsNetParams perturbed_params(const CsNetConfig& cfg, std::uint64_t seed, double scale = 0.1) {
  CsNetParams params = CsNetParams::initialize(cfg, seed);
  Rng rng(seed ^ 0xabcdef);
  for (const auto& [name, t] : params.tensors()) {
    ad::Tensor copy = t;
    for (double& x : copy.mutable_data()) x += scale * rng.normal();
  }
  return params;
}

inline PointCloud labeled_cloud(Rng& rng, std::size_t n) {
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 3 ? 1.0 : 0.0;
  return PointCloud(random_cloud(rng, n), labels);
}

}  // namespace pcc::test
