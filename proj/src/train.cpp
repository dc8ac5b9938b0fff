#include "pcc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pcc/io.hpp"
#include "pcc/parallel.hpp"

namespace pcc {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train.lr must be positive");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("train.beta1 must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("train.beta2 must lie in [0,1)");
  if (!(eps > 0.0)) throw std::invalid_argument("train.eps must be positive");
}

void adam_step(CsNetParams& params, const GradMap& grads, AdamState& state, const TrainConfig& config) {
  for (const auto& [name, g] : grads) {
    if (!params.contains(name)) throw std::invalid_argument("adam_step: unknown parameter '" + name + "'");
    if (params.at(name).numel() != g.size())
      throw std::invalid_argument("adam_step: gradient for '" + name + "' has " + std::to_string(g.size()) +
                                  " entries, parameter has " + std::to_string(params.at(name).numel()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (const auto& [name, g] : grads) {
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);
    if (m.size() != g.size() || v.size() != g.size())
      throw std::invalid_argument("adam_step: moment buffers for '" + name + "' do not match");
    auto w = params.at(name).mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      w[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
}

std::string loss_log_csv(const std::vector<EpochLog>& log, std::size_t blocks) {
  const bool has_seg = !log.empty() && !log.front().seg.empty();
  const bool has_cd = !log.empty() && !log.front().cd.empty();
  std::string out = "step,epoch,total";
  for (std::size_t b = 1; b <= blocks && has_seg; ++b) out += ",seg_" + std::to_string(b);
  for (std::size_t b = 1; b <= blocks && has_cd; ++b) out += ",cd_" + std::to_string(b);
  out += "\n";
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, ",%.17g", v);
    out += buf;
  };
  for (const auto& row : log) {
    out += std::to_string(row.step) + "," + std::to_string(row.epoch);
    num(row.total);
    for (double v : row.seg) num(v);
    for (double v : row.cd) num(v);
    out += "\n";
  }
  return out;
}

namespace {

void check_finite(const LossBreakdown& loss, const std::string& where) {
  for (std::size_t b = 0; b < loss.seg.size(); ++b)
    if (!std::isfinite(loss.seg[b]))
      throw NonFiniteLoss("non-finite segmentation loss in block " + std::to_string(b + 1) + " (" + where + ")");
  for (std::size_t b = 0; b < loss.cd.size(); ++b)
    if (!std::isfinite(loss.cd[b]))
      throw NonFiniteLoss("non-finite completion loss in block " + std::to_string(b + 1) + " (" + where + ")");
  if (!std::isfinite(loss.total.item())) throw NonFiniteLoss("non-finite total loss (" + where + ")");
}

void check_points(const CsNetConfig& net, const LoadedSample& s) {
  if (s.input.size() != net.n_points || s.gt_complete.size() != net.n_points)
    throw std::invalid_argument("sample '" + s.entry.id + "' has " + std::to_string(s.input.size()) +
                                " points, model expects " + std::to_string(net.n_points));
}

}  // namespace

SampleGrad sample_gradient(const CsNetConfig& config, const CsNetParams& params, const PointCloud& input,
                           const PointCloud& gt_complete) {
  CsNet net(config, params.clone());
  const ForwardResult out = net.forward(input);
  const std::vector<double> no_labels;
  SampleGrad r{net.total_loss(out, gt_complete.points(), input.has_labels() ? input.labels() : no_labels), {}};
  backward(r.loss.total);
  for (const auto& [name, t] : net.params().tensors()) {
    if (t.has_grad()) {
      const auto g = t.grad();
      r.grads.emplace(name, std::vector<double>(g.begin(), g.end()));
    } else {
      r.grads.emplace(name, std::vector<double>(t.numel(), 0.0));
    }
  }
  return r;
}

TrainResult train(const Manifest& manifest, const CsNetConfig& net, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& out_dir, std::optional<CsNetParams> init) {
  net.validate();
  config.validate();
  const auto entries = manifest.split("train");
  if (entries.empty()) throw std::invalid_argument("training split is empty");
  std::vector<LoadedSample> data;
  data.reserve(entries.size());
  for (const auto& e : entries) {
    data.push_back(load_sample(manifest, e));
    check_points(net, data.back());
  }

  TrainResult result;
  if (init) {
    init->check_compatible(net);
    result.params = init->clone();
  } else {
    result.params = CsNetParams::initialize(net, config.seed);
  }
  if (out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir->string() + ": " + ec.message());
  }

  Rng shuffle(config.seed ^ 0x5deece66dull);
  AdamState adam;
  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.max_steps && result.steps >= config.max_steps) break;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle.index(i + 1)]);

    EpochLog row;
    row.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      if (config.max_steps && result.steps >= config.max_steps) break;
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<SampleGrad> parts(end - start);
      parallel_for(parts.size(), [&](std::size_t j) {
        const auto& s = data[order[start + j]];
        parts[j] = sample_gradient(net, result.params, s.input, s.gt_complete);
      });
      // Reduce in sample order so the sum does not depend on thread timing.
      GradMap grads;
      const double inv = 1.0 / static_cast<double>(parts.size());
      for (std::size_t j = 0; j < parts.size(); ++j) {
        const auto& p = parts[j];
        check_finite(p.loss, "epoch " + std::to_string(epoch) + ", sample '" + data[order[start + j]].entry.id + "'");
        row.total += p.loss.total.item();
        if (row.seg.empty()) row.seg.assign(p.loss.seg.size(), 0.0);
        if (row.cd.empty()) row.cd.assign(p.loss.cd.size(), 0.0);
        for (std::size_t b = 0; b < p.loss.seg.size(); ++b) row.seg[b] += p.loss.seg[b];
        for (std::size_t b = 0; b < p.loss.cd.size(); ++b) row.cd[b] += p.loss.cd[b];
        for (const auto& [name, g] : p.grads) {
          auto& acc = grads[name];
          if (acc.empty()) acc.assign(g.size(), 0.0);
          for (std::size_t k = 0; k < g.size(); ++k) acc[k] += inv * g[k];
        }
      }
      seen += parts.size();
      adam_step(result.params, grads, adam, config);
      ++result.steps;
    }
    const double n = static_cast<double>(std::max<std::size_t>(seen, 1));
    row.total /= n;
    for (double& v : row.seg) v /= n;
    for (double& v : row.cd) v /= n;
    row.step = result.steps;
    result.log.push_back(std::move(row));

    if (out_dir && config.checkpoint_interval && epoch % config.checkpoint_interval == 0) {
      save_checkpoint(result.params, *out_dir / ("epoch_" + std::to_string(epoch) + ".csnt"));
    }
  }
  if (out_dir) {
    write_atomic(*out_dir / "loss.csv", loss_log_csv(result.log, net.m_blocks));
    save_checkpoint(result.params, *out_dir / "final.csnt");
  }
  return result;
}

MetricsReport evaluate(const Manifest& manifest, const CsNet& net, const MetricConfig& metrics,
                       const EvalOptions& options) {
  const CsNetConfig& cfg = net.config();
  net.params().check_compatible(cfg);
  const auto entries = manifest.split(options.split);
  if (entries.empty()) throw std::invalid_argument("split '" + options.split + "' is empty");

  std::vector<std::vector<MetricRow>> rows(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const LoadedSample s = load_sample(manifest, entries[i]);
    check_points(cfg, s);
    std::optional<ForwardResult> out;
    if (!options.oracle) out = net.forward(s.input);
    const std::size_t first = options.all_blocks ? 1 : cfg.m_blocks;
    for (std::size_t b = first; b <= cfg.m_blocks; ++b) {
      std::optional<PointCloud> pred;
      std::vector<double> labels;
      if (cfg.enable_completion) pred = options.oracle ? s.gt_complete : PointCloud(ad::to_points(out->blocks[b - 1].pc_pred));
      if (cfg.enable_segmentation) {
        if (options.oracle) {
          labels = s.input.labels();
        } else {
          const auto d = out->blocks[b - 1].ps_pred.data();
          labels.assign(d.begin(), d.end());
        }
      }
      MetricRow row;
      row.id = s.entry.id;
      row.category = s.entry.category;
      row.block = static_cast<int>(b);
      const std::span<const double> gt_labels =
          cfg.enable_segmentation ? std::span<const double>(s.input.labels()) : std::span<const double>();
      row.values = compute_metrics(pred ? &*pred : nullptr, pred ? &s.gt_complete : nullptr, labels, gt_labels, metrics);
      rows[i].push_back(std::move(row));
    }
  });

  MetricsReport report;
  report.config = metrics;
  for (auto& r : rows)
    for (auto& row : r) report.samples.push_back(std::move(row));
  report.aggregate();
  return report;
}

std::vector<AblationVariant> ablation_variants(const CsNetConfig& base) {
  std::vector<AblationVariant> v;
  CsNetConfig c = base;
  c.enable_segmentation = true;
  c.enable_completion = false;
  c.enable_feature_sharing = false;
  c.enable_label_mult_fps = false;
  c.enable_knn_refine = false;
  v.push_back({"segmentation only", c});
  c.enable_segmentation = false;
  c.enable_completion = true;
  v.push_back({"completion only", c});
  c.enable_segmentation = true;
  c.enable_feature_sharing = true;
  v.push_back({"+ feature sharing", c});
  c.enable_label_mult_fps = true;
  v.push_back({"+ label-multiplication FPS", c});
  c.enable_knn_refine = true;
  v.push_back({"+ KNN-grouping refinement (full)", c});
  c.m_blocks = 2;
  v.push_back({"full, M=2", c});
  c.m_blocks = 4;
  v.push_back({"full, M=4", c});
  return v;
}

std::string AblationReport::to_markdown() const {
  std::string out = "| # | variant | CD (x1e4) | mAcc (%) | params |\n|---|---|---|---|---|\n";
  char buf[64];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out += "| (" + std::to_string(i + 1) + ") | " + r.name + " | ";
    if (r.cd) {
      std::snprintf(buf, sizeof buf, "%.4f", *r.cd);
      out += buf;
    } else {
      out += "-";
    }
    out += " | ";
    if (r.macc) {
      std::snprintf(buf, sizeof buf, "%.2f", *r.macc);
      out += buf;
    } else {
      out += "-";
    }
    out += " | " + std::to_string(r.params) + " |\n";
  }
  return out;
}

AblationReport ablation_suite(const Manifest& manifest, const CsNetConfig& base, const TrainConfig& train_config,
                              const MetricConfig& metrics, const std::string& eval_split) {
  AblationReport report;
  for (const auto& variant : ablation_variants(base)) {
    TrainResult trained = train(manifest, variant.config, train_config, std::nullopt);
    AblationRow row;
    row.name = variant.name;
    row.params = param_count(trained.params);
    const CsNet net(variant.config, std::move(trained.params));
    EvalOptions opts;
    opts.split = eval_split;
    const MetricsReport r = evaluate(manifest, net, metrics, opts);
    const auto& v = r.overall(static_cast<int>(variant.config.m_blocks)).values;
    row.cd = v.cd;
    if (v.seg_macc) row.macc = 100.0 * *v.seg_macc;
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace pcc
