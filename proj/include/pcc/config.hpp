#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcc/csnet.hpp"
#include "pcc/datasynth.hpp"
#include "pcc/metrics.hpp"
#include "pcc/train.hpp"

namespace pcc {

/// Everything a run needs, addressable by dotted keys ("net.m_blocks",
/// "train.lr", "metric.dcd_alpha", "eval.oracle", "synth.separation", ...).
///
/// Text form is one `key = value` per line; '#' starts a comment. A
/// `profile = desk|full` line resets everything to that profile before the
/// remaining keys apply, wherever it appears.
struct RunConfig {
  CsNetConfig net = CsNetConfig::full();
  TrainConfig train;
  MetricConfig metric;
  EvalOptions eval;
  SynthConfig synth;
  std::string profile = "full";

  static RunConfig from_profile(const std::string& name);
  static RunConfig parse(const std::string& text, const std::string& source = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  /// Sets one key. Unknown keys and malformed values throw
  /// std::invalid_argument naming `where` and the key.
  void set(const std::string& key, const std::string& value, const std::string& where = "override");
  /// "key=value" from the command line.
  void apply_override(const std::string& assignment);
  void validate() const;

  static std::vector<std::string> keys();
  /// Canonical text form; parse(to_text()) reproduces the configuration.
  std::string to_text() const;
};

}  // namespace pcc
