#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcc/csnet.hpp"
#include "pcc/datasynth.hpp"
#include "pcc/metrics.hpp"

namespace pcc {

struct TrainConfig {
  double lr = 1.2e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 120;
  std::uint64_t seed = 0;  // parameter init and shuffling
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t checkpoint_interval = 0;  // epochs between checkpoints; 0 = final only
  std::size_t max_steps = 0;            // stop after this many optimizer steps; 0 = no cap

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct AdamState {
  std::map<std::string, std::vector<double>> m, v;
  std::uint64_t step = 0;
};

using GradMap = std::map<std::string, std::vector<double>>;

/// One bias-corrected Adam update of every tensor named in `grads`.
/// Throws std::invalid_argument on unknown names or size mismatches.
void adam_step(CsNetParams& params, const GradMap& grads, AdamState& state, const TrainConfig& config);

/// Thrown when a loss goes NaN or infinite; the message names the block.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EpochLog {
  std::size_t step = 0;  // optimizer steps taken so far
  std::size_t epoch = 0;
  double total = 0.0;
  std::vector<double> seg, cd;  // per block means; empty when the head is disabled
};

std::string loss_log_csv(const std::vector<EpochLog>& log, std::size_t blocks);

struct TrainResult {
  CsNetParams params;
  std::vector<EpochLog> log;
  std::size_t steps = 0;
};

/// Loss and gradients of one sample under `net`, summed over blocks.
struct SampleGrad {
  LossBreakdown loss;
  GradMap grads;
};
SampleGrad sample_gradient(const CsNetConfig& config, const CsNetParams& params, const PointCloud& input,
                           const PointCloud& gt_complete);

/// Trains on the manifest's train split. When `out_dir` is set, writes
/// loss.csv, periodic epoch checkpoints and final.csnt there.
TrainResult train(const Manifest& manifest, const CsNetConfig& net, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& out_dir,
                  std::optional<CsNetParams> init = std::nullopt);

struct EvalOptions {
  std::string split = "test";
  bool all_blocks = false;  // one row per block instead of the last block only
  bool oracle = false;      // replace predictions by ground truth
};

MetricsReport evaluate(const Manifest& manifest, const CsNet& net, const MetricConfig& metrics,
                       const EvalOptions& options);

struct AblationVariant {
  std::string name;
  CsNetConfig config;
};

/// Segmentation only, completion only, +feature sharing, +label-multiplication
/// FPS, full, and the full model with two and four blocks.
std::vector<AblationVariant> ablation_variants(const CsNetConfig& base);

struct AblationRow {
  std::string name;
  std::optional<double> cd;    // x1e4, final block
  std::optional<double> macc;  // percent
  std::size_t params = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  std::string to_markdown() const;
};

AblationReport ablation_suite(const Manifest& manifest, const CsNetConfig& base, const TrainConfig& train_config,
                              const MetricConfig& metrics, const std::string& eval_split = "test");

}  // namespace pcc
