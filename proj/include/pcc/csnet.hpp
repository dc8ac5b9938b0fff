#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcc/autodiff.hpp"
#include "pcc/geom.hpp"

namespace pcc {

/// Architecture and ablation switches for the cascaded network.
///
/// Base channel widths are {64, 128, 256} for shared-MLP stages and 512 for
/// the global feature; every width is multiplied by `width_multiplier`
/// (rounded, at least 1).
struct CsNetConfig {
  std::size_t m_blocks = 3;
  std::size_t n_points = 2048;
  std::size_t k_neighbors = 8;
  std::size_t decoder_levels = 4;
  std::size_t decoder_branching = 8;
  double width_multiplier = 1.0;
  std::size_t f_prime_width = 128;
  std::size_t f_double_prime_width = 128;
  double alpha1 = 0.01;
  double alpha2 = 1.0;

  bool enable_segmentation = true;
  bool enable_completion = true;
  bool enable_feature_sharing = true;
  bool enable_label_mult_fps = true;
  bool enable_knn_refine = true;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;
  std::size_t width(std::size_t base) const;

  static CsNetConfig full();
  /// N=256, width multiplier 0.25, M=3; small enough for a laptop core.
  static CsNetConfig desk();

  bool operator==(const CsNetConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  ad::Shape shape;
  bool zero_init = false;  // biases and the final layer of each shift MLP
};

/// All learnable tensors, keyed by hierarchical layer path.
class CsNetParams {
 public:
  CsNetParams() = default;

  /// Every tensor the architecture declares for `config`, in name order.
  static std::vector<ParamSpec> declare(const CsNetConfig& config);
  /// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases and zero final shift layers.
  static CsNetParams initialize(const CsNetConfig& config, std::uint64_t seed);

  const ad::Tensor& at(const std::string& name) const;
  ad::Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  void set(const std::string& name, ad::Tensor t);

  const std::map<std::string, ad::Tensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  /// Independent copy; gradients are not shared with the source.
  CsNetParams clone() const;
  void zero_grad();

  /// Throws std::invalid_argument when names or shapes differ from `config`.
  void check_compatible(const CsNetConfig& config) const;

 private:
  std::map<std::string, ad::Tensor> tensors_;
};

/// Total number of scalars across all tensors.
std::size_t param_count(const CsNetParams& params);

/// Outcome of one cascade block. `pc_pred` is undefined when completion is
/// disabled and `ps_pred` when segmentation is disabled.
struct BlockOutput {
  ad::Tensor pc_pred;    // N x 3
  ad::Tensor ps_pred;    // N x 1, in (0,1)
  ad::Tensor f_c;        // 1 x G global feature
  ad::Tensor p_sampled;  // N x 3, blocks >= 2 only
};

struct ForwardResult {
  ad::Tensor f_s;
  std::vector<BlockOutput> blocks;
};

struct LossBreakdown {
  ad::Tensor total;
  std::vector<double> seg;  // per block, unweighted; empty without segmentation
  std::vector<double> cd;   // per block, unweighted; empty without completion
};

/// The cascaded completion-and-segmentation network. Holds a configuration
/// and a parameter set; every method is a pure function of those and its
/// arguments.
class CsNet {
 public:
  CsNet(CsNetConfig config, CsNetParams params);

  const CsNetConfig& config() const { return config_; }
  const CsNetParams& params() const { return params_; }
  CsNetParams& params() { return params_; }

  ForwardResult forward(const PointCloud& input) const;

  // Stages of the forward pass, exposed for testing and probing.
  ad::Tensor extract_seg_features(const ad::Tensor& input) const;
  ad::Tensor seg_forward(std::size_t block, const ad::Tensor& f_s, const ad::Tensor& input,
                         const ad::Tensor* prev_f_c, const ad::Tensor* prev_ps) const;
  ad::Tensor global_feature(const std::string& scope, const ad::Tensor& input, const ad::Tensor* ps) const;
  ad::Tensor coarse_decode(const ad::Tensor& global) const;
  ad::Tensor purify_and_fuse(const ad::Tensor& input, const ad::Tensor* ps_prev, const ad::Tensor& pc_prev) const;
  std::pair<ad::Tensor, ad::Tensor> refinement_features(std::size_t block, const ad::Tensor& p_sampled,
                                                       const ad::Tensor& f_c) const;
  ad::Tensor knn_refine(std::size_t block, const ad::Tensor& p_sampled, const ad::Tensor& f_prime,
                        const ad::Tensor& f_double_prime) const;

  LossBreakdown total_loss(const ForwardResult& out, std::span<const Vec3> gt_complete,
                           std::span<const double> gt_labels) const;

  /// Input tensor for a cloud of exactly n_points points.
  ad::Tensor input_tensor(const PointCloud& input) const;

 private:
  ad::Tensor mlp(const std::string& scope, const ad::Tensor& x, std::size_t layers, bool relu_last) const;

  CsNetConfig config_;
  CsNetParams params_;
};

/// Label multiplication of the input by per-point fidelities, fused with the
/// previous completion and farthest-point sampled back to N points (seed 0).
/// Gradients flow to the selected rows; the selection itself is index plumbing.
ad::Tensor label_mult_fps(const ad::Tensor& input, const ad::Tensor* labels, const ad::Tensor& previous);

// Checkpoint file: "CSNT", u32 version, u64 header length, JSON header
// {name: {shape, dtype: "f64", offset}}, then little-endian f64 payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const CsNetParams& params);
CsNetParams decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const CsNetParams& params, const std::filesystem::path& path);
CsNetParams load_checkpoint(const std::filesystem::path& path);

}  // namespace pcc
