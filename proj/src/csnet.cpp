#include "pcc/csnet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pcc/rng.hpp"

namespace pcc {

using ad::Tensor;

// ---------------------------------------------------------------- config

void CsNetConfig::validate() const {
  auto bad = [](const std::string& msg) { throw std::invalid_argument("model config: " + msg); };
  if (m_blocks < 1) bad("m_blocks must be at least 1");
  if (n_points < 4) bad("n_points must be at least 4");
  if (k_neighbors < 1 || k_neighbors > n_points) bad("k_neighbors must lie in [1, n_points]");
  if (!(width_multiplier > 0.0)) bad("width_multiplier must be positive");
  if (alpha1 < 0.0 || alpha2 < 0.0) bad("loss weights must be non-negative");
  if (!enable_segmentation && !enable_completion) bad("at least one of segmentation/completion must be on");
  if (enable_completion) {
    if (decoder_levels < 1 || decoder_branching < 1) bad("decoder levels and branching must be positive");
    double leaves = 1.0;
    for (std::size_t l = 0; l < decoder_levels; ++l) leaves *= static_cast<double>(decoder_branching);
    if (leaves < static_cast<double>(n_points)) {
      bad("decoder_branching^decoder_levels must be at least n_points");
    }
    if (leaves > 1e7) bad("decoder tree is too large");
  }
  if (f_prime_width < 1 || f_double_prime_width < 1) bad("feature widths must be positive");
}

std::size_t CsNetConfig::width(std::size_t base) const {
  const double w = std::round(static_cast<double>(base) * width_multiplier);
  return w < 1.0 ? 1 : static_cast<std::size_t>(w);
}

CsNetConfig CsNetConfig::full() { return CsNetConfig{}; }

CsNetConfig CsNetConfig::desk() {
  CsNetConfig c;
  c.n_points = 256;
  c.width_multiplier = 0.25;
  c.decoder_levels = 4;
  c.decoder_branching = 4;
  return c;
}

// ---------------------------------------------------------------- architecture

namespace {

struct MlpSpec {
  std::string scope;
  std::vector<std::size_t> dims;  // input width, then each layer's output width
  bool zero_last = false;
};

std::string block_scope(std::size_t block) { return "block" + std::to_string(block); }

bool seg_takes_global(const CsNetConfig& c, std::size_t block) {
  return block > 1 && c.enable_feature_sharing && c.enable_completion;
}
bool global_takes_labels(const CsNetConfig& c, std::size_t block) {
  return block > 1 && c.enable_feature_sharing && c.enable_segmentation;
}

std::vector<MlpSpec> architecture(const CsNetConfig& c) {
  const std::size_t c64 = c.width(64), c128 = c.width(128), c256 = c.width(256), g = c.width(512);
  const std::size_t f1 = c.width(c.f_prime_width), f2 = c.width(c.f_double_prime_width);
  const std::size_t b = c.decoder_branching;
  std::vector<MlpSpec> specs;
  if (c.enable_segmentation) {
    specs.push_back({"extractor/point", {9, c64, c128}});
    specs.push_back({"extractor/context", {2 * c128, c256}});
  }
  for (std::size_t i = 1; i <= c.m_blocks; ++i) {
    const std::string s = block_scope(i);
    if (c.enable_segmentation) {
      const std::size_t in = c256 + 3 + (seg_takes_global(c, i) ? g : 0) + (i > 1 ? 1 : 0);
      specs.push_back({s + "/seg", {in, c128, c64, 1}});
    }
    if (!c.enable_completion) continue;
    specs.push_back({s + "/global/f1", {3 + (global_takes_labels(c, i) ? 1u : 0u), c64, c128}});
    specs.push_back({s + "/global/f3", {2 * c128, c256, g}});
    if (i == 1) {
      specs.push_back({s + "/decoder/root", {g, b * c64}});
      for (std::size_t l = 2; l <= c.decoder_levels; ++l) {
        specs.push_back({s + "/decoder/level" + std::to_string(l), {c64 + g, b * c64}});
      }
      specs.push_back({s + "/decoder/leaf", {c64, 3}});
      continue;
    }
    specs.push_back({s + "/feature/f1", {3 + g, c256, f1}});
    specs.push_back({s + "/feature/f2", {2 * f1 + 3, c256, f2}});
    specs.push_back({s + "/refine/shift1", {f1 + f2 + 3, c128, c64, 3}, true});
    if (c.enable_knn_refine) {
      specs.push_back({s + "/refine/shift2", {3 + 3 * c.k_neighbors + f1 + f2, c128, c64, 3}, true});
    }
  }
  return specs;
}

std::string layer_name(const std::string& scope, std::size_t layer, const char* kind) {
  return scope + "/" + std::to_string(layer) + "/" + kind;
}

}  // namespace

// ---------------------------------------------------------------- params

std::vector<ParamSpec> CsNetParams::declare(const CsNetConfig& config) {
  config.validate();
  std::vector<ParamSpec> out;
  for (const auto& m : architecture(config)) {
    const std::size_t layers = m.dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const bool last = l + 1 == layers;
      out.push_back({layer_name(m.scope, l, "weight"), {m.dims[l], m.dims[l + 1]}, last && m.zero_last});
      out.push_back({layer_name(m.scope, l, "bias"), {1, m.dims[l + 1]}, true});
    }
  }
  std::sort(out.begin(), out.end(), [](const ParamSpec& a, const ParamSpec& b) { return a.name < b.name; });
  return out;
}

CsNetParams CsNetParams::initialize(const CsNetConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  CsNetParams p;
  for (const auto& spec : declare(config)) {
    std::vector<double> data(ad::numel(spec.shape), 0.0);
    if (!spec.zero_init) {
      const double fan_in = static_cast<double>(spec.shape[0]);
      const double fan_out = static_cast<double>(spec.shape[1]);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& x : data) x = rng.uniform(-limit, limit);
    }
    p.tensors_.emplace(spec.name, Tensor::parameter(spec.shape, std::move(data)));
  }
  return p;
}

const Tensor& CsNetParams::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

Tensor& CsNetParams::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return it->second;
}

void CsNetParams::set(const std::string& name, Tensor t) { tensors_[name] = std::move(t); }

CsNetParams CsNetParams::clone() const {
  CsNetParams p;
  for (const auto& [name, t] : tensors_) p.tensors_.emplace(name, t.clone());
  return p;
}

void CsNetParams::zero_grad() {
  for (auto& [name, t] : tensors_) t.zero_grad();
}

void CsNetParams::check_compatible(const CsNetConfig& config) const {
  const auto specs = declare(config);
  for (const auto& s : specs) {
    auto it = tensors_.find(s.name);
    if (it == tensors_.end()) {
      throw std::invalid_argument("parameters lack '" + s.name + "' required by the model config");
    }
    if (it->second.shape() != s.shape) {
      throw std::invalid_argument("parameter '" + s.name + "' has shape " + ad::shape_str(it->second.shape()) +
                                  " but the model config expects " + ad::shape_str(s.shape));
    }
  }
  if (specs.size() != tensors_.size()) {
    for (const auto& [name, t] : tensors_) {
      const bool declared =
          std::any_of(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == name; });
      if (!declared) throw std::invalid_argument("parameter '" + name + "' is not part of the model config");
    }
  }
}

std::size_t param_count(const CsNetParams& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params.tensors()) n += t.numel();
  return n;
}

// ---------------------------------------------------------------- network

CsNet::CsNet(CsNetConfig config, CsNetParams params) : config_(config), params_(std::move(params)) {
  config_.validate();
  params_.check_compatible(config_);
}

Tensor CsNet::mlp(const std::string& scope, const Tensor& x, std::size_t layers, bool relu_last) const {
  Tensor h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::add(ad::matmul(h, params_.at(layer_name(scope, l, "weight"))),
                params_.at(layer_name(scope, l, "bias")));
    if (l + 1 < layers || relu_last) h = ad::relu(ad::layer_norm(h));
  }
  return h;
}

Tensor CsNet::input_tensor(const PointCloud& input) const {
  if (input.size() != config_.n_points) {
    throw std::invalid_argument("network expects " + std::to_string(config_.n_points) + " input points, got " +
                                std::to_string(input.size()));
  }
  return ad::from_points(input.points());
}

Tensor CsNet::extract_seg_features(const Tensor& input) const {
  if (input.rank() != 2 || input.dim(0) != config_.n_points || input.dim(1) != 3) {
    throw std::invalid_argument("extract_seg_features: expected input of shape [" +
                                std::to_string(config_.n_points) + ",3], got " + ad::shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0);
  // Offsets from the cloud's bounding box: clutter (floor, walls) sits at its faces.
  const Tensor hi = ad::broadcast_repeat(ad::reduce_max(input, 0), 0, n);
  const Tensor lo = ad::scalar_mul(ad::broadcast_repeat(ad::reduce_max(ad::scalar_mul(input, -1.0), 0), 0, n), -1.0);
  Tensor local = mlp("extractor/point", ad::concat({input, ad::sub(input, lo), ad::sub(hi, input)}, 1), 2, true);
  Tensor context = ad::broadcast_repeat(ad::reduce_max(local, 0), 0, n);
  return mlp("extractor/context", ad::concat({local, context}, 1), 1, true);
}

Tensor CsNet::seg_forward(std::size_t block, const Tensor& f_s, const Tensor& input, const Tensor* prev_f_c,
                          const Tensor* prev_ps) const {
  if ((block > 1) != (prev_ps != nullptr)) {
    throw std::invalid_argument("seg_forward: previous labels are required exactly when block > 1");
  }
  const bool wants_global = seg_takes_global(config_, block);
  if (wants_global != (prev_f_c != nullptr)) {
    throw std::invalid_argument("seg_forward: block " + std::to_string(block) +
                                (wants_global ? " needs" : " does not take") + " the previous global feature");
  }
  const std::size_t n = input.dim(0);
  std::vector<Tensor> parts{f_s, input};
  if (prev_f_c) parts.push_back(ad::broadcast_repeat(*prev_f_c, 0, n));
  if (prev_ps) parts.push_back(*prev_ps);
  Tensor logits = mlp(block_scope(block) + "/seg", ad::concat(parts, 1), 3, false);
  return ad::sigmoid(logits);
}

Tensor CsNet::global_feature(const std::string& scope, const Tensor& input, const Tensor* ps) const {
  const std::size_t n = input.dim(0);
  Tensor x = ps ? ad::concat({input, *ps}, 1) : input;
  Tensor f1 = mlp(scope + "/global/f1", x, 2, true);
  Tensor f2 = ad::broadcast_repeat(ad::reduce_max(f1, 0), 0, n);
  Tensor f3 = mlp(scope + "/global/f3", ad::concat({f1, f2}, 1), 2, true);
  return ad::reduce_max(f3, 0);
}

Tensor CsNet::coarse_decode(const Tensor& global) const {
  const std::string s = block_scope(1) + "/decoder";
  const std::size_t b = config_.decoder_branching;
  const std::size_t c = config_.width(64);
  Tensor h = ad::relu(ad::add(ad::matmul(global, params_.at(s + "/root/0/weight")), params_.at(s + "/root/0/bias")));
  h = ad::reshape(h, {b, c});
  for (std::size_t l = 2; l <= config_.decoder_levels; ++l) {
    const std::size_t nodes = h.dim(0);
    Tensor x = ad::concat({h, ad::broadcast_repeat(global, 0, nodes)}, 1);
    const std::string level = s + "/level" + std::to_string(l);
    h = ad::relu(ad::add(ad::matmul(x, params_.at(level + "/0/weight")), params_.at(level + "/0/bias")));
    h = ad::reshape(h, {nodes * b, c});
  }
  Tensor leaves = ad::add(ad::matmul(h, params_.at(s + "/leaf/0/weight")), params_.at(s + "/leaf/0/bias"));
  if (leaves.dim(0) == config_.n_points) return leaves;
  std::vector<std::size_t> keep(config_.n_points);
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  return ad::gather_rows(leaves, keep);
}

Tensor label_mult_fps(const Tensor& input, const Tensor* labels, const Tensor& previous) {
  if (input.rank() != 2 || input.dim(1) != 3 || previous.shape() != input.shape()) {
    throw std::invalid_argument("label_mult_fps: input " + ad::shape_str(input.shape()) + " and previous " +
                                ad::shape_str(previous.shape()) + " must both be [N,3]");
  }
  const std::size_t n = input.dim(0);
  Tensor clean = input;
  if (labels) {
    if (labels->numel() != n) throw std::invalid_argument("label_mult_fps: one label per input point required");
    clean = ad::mul(input, ad::reshape(*labels, {n, 1}));
  }
  // Previous prediction first: FPS seeds on it and ties prefer its rows.
  Tensor fused = ad::concat({previous, clean}, 0);
  const std::vector<Vec3> pts = ad::to_points(fused);
  const auto picked = farthest_point_sample(std::span<const Vec3>(pts), n, 0);
  return ad::gather_rows(fused, picked);
}

Tensor CsNet::purify_and_fuse(const Tensor& input, const Tensor* ps_prev, const Tensor& pc_prev) const {
  const bool multiply = config_.enable_label_mult_fps && config_.enable_segmentation && ps_prev != nullptr;
  return label_mult_fps(input, multiply ? ps_prev : nullptr, pc_prev);
}

std::pair<Tensor, Tensor> CsNet::refinement_features(std::size_t block, const Tensor& p_sampled,
                                                      const Tensor& f_c) const {
  const std::string s = block_scope(block) + "/feature";
  const std::size_t n = p_sampled.dim(0);
  Tensor f_prime = mlp(s + "/f1", ad::concat({p_sampled, ad::broadcast_repeat(f_c, 0, n)}, 1), 2, true);
  Tensor pooled = ad::broadcast_repeat(ad::reduce_max(f_prime, 0), 0, n);
  Tensor f_double_prime = mlp(s + "/f2", ad::concat({f_prime, pooled, p_sampled}, 1), 2, true);
  return {f_prime, f_double_prime};
}

Tensor CsNet::knn_refine(std::size_t block, const Tensor& p_sampled, const Tensor& f_prime,
                         const Tensor& f_double_prime) const {
  if (f_prime.dim(0) != p_sampled.dim(0) || f_double_prime.dim(0) != p_sampled.dim(0)) {
    throw std::invalid_argument("knn_refine: features must be row-aligned with the sampled points");
  }
  const std::string s = block_scope(block) + "/refine";
  const std::size_t n = p_sampled.dim(0);
  Tensor shift1 = mlp(s + "/shift1", ad::concat({f_prime, f_double_prime, p_sampled}, 1), 3, false);
  Tensor proposed = ad::add(p_sampled, shift1);
  if (!config_.enable_knn_refine) return proposed;

  const std::vector<Vec3> pts = ad::to_points(proposed);
  const NeighborIndex idx = knn(std::span<const Vec3>(pts), config_.k_neighbors);
  Tensor grouped = ad::reshape(ad::gather_rows(proposed, idx.indices), {n, 3 * config_.k_neighbors});
  Tensor shift2 =
      mlp(s + "/shift2", ad::concat({proposed, grouped, f_prime, f_double_prime}, 1), 3, false);
  return ad::add(p_sampled, shift2);
}

ForwardResult CsNet::forward(const PointCloud& input) const {
  const Tensor x = input_tensor(input);
  ForwardResult out;
  const bool seg = config_.enable_segmentation;
  const bool comp = config_.enable_completion;
  if (seg) out.f_s = extract_seg_features(x);

  for (std::size_t i = 1; i <= config_.m_blocks; ++i) {
    BlockOutput b;
    const BlockOutput* prev = i > 1 ? &out.blocks.back() : nullptr;
    if (seg) {
      const Tensor* prev_f_c = prev && seg_takes_global(config_, i) ? &prev->f_c : nullptr;
      const Tensor* prev_ps = prev ? &prev->ps_pred : nullptr;
      b.ps_pred = seg_forward(i, out.f_s, x, prev_f_c, prev_ps);
    }
    if (comp) {
      if (i == 1) {
        b.f_c = global_feature(block_scope(1), x, nullptr);
        b.pc_pred = coarse_decode(b.f_c);
      } else {
        const Tensor* ps_prev = seg ? &prev->ps_pred : nullptr;
        b.p_sampled = purify_and_fuse(x, ps_prev, prev->pc_pred);
        b.f_c = global_feature(block_scope(i), x, global_takes_labels(config_, i) ? ps_prev : nullptr);
        auto [f_prime, f_double_prime] = refinement_features(i, b.p_sampled, b.f_c);
        b.pc_pred = knn_refine(i, b.p_sampled, f_prime, f_double_prime);
      }
    }
    out.blocks.push_back(std::move(b));
  }
  return out;
}

LossBreakdown CsNet::total_loss(const ForwardResult& out, std::span<const Vec3> gt_complete,
                                std::span<const double> gt_labels) const {
  const std::size_t n = config_.n_points;
  if (config_.enable_segmentation && gt_labels.size() != n) {
    throw std::invalid_argument("total_loss: expected " + std::to_string(n) + " ground-truth labels, got " +
                                std::to_string(gt_labels.size()));
  }
  if (config_.enable_completion && gt_complete.size() != n) {
    throw std::invalid_argument("total_loss: expected " + std::to_string(n) + " ground-truth points, got " +
                                std::to_string(gt_complete.size()));
  }
  LossBreakdown loss;
  Tensor total = Tensor::scalar(0.0);
  for (const auto& b : out.blocks) {
    if (b.ps_pred.defined()) {
      Tensor seg = ad::bce_loss(b.ps_pred, gt_labels);
      loss.seg.push_back(seg.item());
      total = ad::add(total, ad::scalar_mul(seg, config_.alpha1));
    }
    if (b.pc_pred.defined()) {
      Tensor cd = ad::chamfer_loss(b.pc_pred, gt_complete);
      loss.cd.push_back(cd.item());
      total = ad::add(total, ad::scalar_mul(cd, config_.alpha2));
    }
  }
  loss.total = total;
  return loss;
}

}  // namespace pcc
