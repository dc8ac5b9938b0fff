// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "pcc/check.hpp"
#include "pcc/csnet.hpp"
#include "pcc/datasynth.hpp"
#include "pcc/io.hpp"
#include "pcc/metrics.hpp"
#include "pcc/train.hpp"

using namespace pcc;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<Vec3> random_cloud(Rng& rng, std::size_t n) {
  std::vector<Vec3> p(n);
  for (auto& v : p) v = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return p;
}

ad::Tensor random_leaf(Rng& rng, ad::Shape s) {
  std::vector<double> d(ad::numel(s));
  for (double& x : d) x = rng.uniform(-1, 1);
  return ad::Tensor::parameter(std::move(s), std::move(d));
}

std::vector<std::size_t> random_perm(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(p[i], p[rng.index(i + 1)]);
  return p;
}

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("pcc_accept_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// ------------------------------------------------------------------ 1

Outcome gradient_fidelity() {
  using namespace ad;
  Rng rng(101);
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  std::string where;
  auto run = [&](const std::string& name, const std::function<Tensor()>& loss, std::vector<Tensor> leaves,
                 std::vector<std::string> names = {}) {
    const auto r = check::check_gradients(loss, std::move(leaves), std::move(names));
    checked += r.checked;
    skipped += r.skipped;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = name + (r.worst.empty() ? "" : " " + r.worst);
    }
  };

  // Each primitive on its own, under a nonlinear read-out so no gradient is constant.
  Tensor a = random_leaf(rng, {4, 3}), b = random_leaf(rng, {3, 5}), c = random_leaf(rng, {4, 3});
  Tensor row = random_leaf(rng, {1, 3});
  auto readout = [](const Tensor& t) { return sum(mul(tanh(t), t)); };
  const std::vector<std::size_t> rows{3, 0, 0, 2, 1};
  const std::vector<std::pair<std::string, std::function<Tensor()>>> prims = {
      {"matmul", [&] { return readout(matmul(a, b)); }},
      {"add", [&] { return readout(add(a, row)); }},
      {"sub", [&] { return readout(sub(a, c)); }},
      {"mul", [&] { return readout(mul(a, c)); }},
      {"scalar_mul", [&] { return readout(scalar_mul(a, -2.5)); }},
      {"relu", [&] { return readout(relu(a)); }},
      {"sigmoid", [&] { return readout(sigmoid(a)); }},
      {"tanh", [&] { return readout(tanh(a)); }},
      {"layer_norm", [&] { return readout(mul(layer_norm(a), c)); }},
      {"concat", [&] { return readout(concat({a, c}, 1)); }},
      {"reduce_max", [&] { return readout(add(reduce_max(a, 0), reduce_max(c, 1))); }},
      {"reduce_mean", [&] { return readout(reduce_mean(a, 1)); }},
      {"broadcast_repeat", [&] { return readout(mul(broadcast_repeat(row, 0, 4), a)); }},
      {"gather_rows", [&] { return readout(gather_rows(a, rows)); }},
      {"reshape", [&] { return readout(mul(reshape(a, {3, 4}), reshape(c, {3, 4}))); }},
  };
  for (const auto& [name, fn] : prims) run(name, fn, {a, b, c, row});

  Tensor pred = random_leaf(rng, {16, 3});
  const auto gt = random_cloud(rng, 16);
  run("chamfer_loss", [&] { return chamfer_loss(pred, gt); }, {pred});
  Tensor probs = Tensor::parameter({6, 1}, {0.1, 0.4, 0.6, 0.9, 0.3, 0.7});
  const std::vector<double> labels{1, 0, 1, 1, 0, 0};
  run("bce_loss", [&] { return bce_loss(probs, labels); }, {probs});

  // End-to-end on the miniature network.
  CsNetConfig cfg;
  cfg.n_points = 32;
  cfg.m_blocks = 2;
  cfg.width_multiplier = 1.0 / 32;
  cfg.k_neighbors = 4;
  cfg.decoder_levels = 3;
  cfg.decoder_branching = 4;
  cfg.f_prime_width = 8;
  cfg.f_double_prime_width = 8;
  CsNetParams params = CsNetParams::initialize(cfg, 1);
  for (const auto& [name, t] : params.tensors()) {
    Tensor copy = t;
    for (double& x : copy.mutable_data()) x += 0.1 * rng.normal();
  }
  std::vector<double> seg(32);
  for (std::size_t i = 0; i < 32; ++i) seg[i] = i % 3 ? 1.0 : 0.0;
  const PointCloud input(random_cloud(rng, 32), seg);
  const auto target = random_cloud(rng, 32);
  const CsNet net(cfg, params);
  std::vector<Tensor> leaves;
  std::vector<std::string> names;
  for (const auto& [name, t] : net.params().tensors()) {
    leaves.push_back(t);
    names.push_back(name);
  }
  run("network", [&] { return net.total_loss(net.forward(input), target, seg).total; }, leaves, names);
  return {worst <= 1e-4 && checked > 0,
          fmt("max rel error %.2e at %s; %zu coords checked, %zu skipped at ties; %zu params", worst, where.c_str(),
              checked, skipped, param_count(params))};
}

// ------------------------------------------------------------------ 2

Outcome oracle_equivalence() {
  Rng rng(202);
  std::size_t bad_fps = 0, bad_knn = 0;
  double worst_cd = 0.0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.index(512);
    auto pts = random_cloud(rng, n);
    if (t % 4 == 0)  // coarse grid: exact ties everywhere
      for (auto& p : pts)
        for (double& c : p) c = std::round(c * 3.0);
    const std::size_t m = 1 + rng.index(std::min<std::size_t>(n, 128));
    const std::size_t seed = rng.index(n);
    bad_fps += farthest_point_sample(pts, m, seed) != check::fps_oracle(pts, m, seed);
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(n, 32));
    bad_knn += knn(pts, k).indices != check::knn_oracle(pts, k).indices;
    const auto other = random_cloud(rng, 1 + rng.index(512));
    for (bool sq : {false, true})
      worst_cd = std::max(worst_cd, std::abs(chamfer_distance(pts, other, sq) - check::chamfer_oracle(pts, other, sq)));
  }
  return {bad_fps == 0 && bad_knn == 0 && worst_cd <= 1e-12,
          fmt("fps mismatches %zu, knn mismatches %zu, max |cd - oracle| %.1e over 200 clouds", bad_fps, bad_knn,
              worst_cd)};
}

// ------------------------------------------------------------------ 3

Outcome metric_identities() {
  Rng rng(303);
  const auto a = random_cloud(rng, 500);
  const double cd = chamfer_distance(a, a);
  const double f = f_score(a, a, 1e-4);
  const double dcd = density_aware_cd(a, a);
  const std::vector<Vec3> p{{0, 0, 0}}, q{{1, 0, 0}};
  const double single = density_aware_cd(p, q, 1.0);
  const double err = std::abs(single - (1.0 - std::exp(-1.0)));
  return {cd == 0.0 && f == 1.0 && dcd == 0.0 && err <= 1e-9,
          fmt("CD(a,a)=%g F(a,a)=%g DCD(a,a)=%g |DCD pair - (1-1/e)|=%.1e", cd, f, dcd, err)};
}

// ------------------------------------------------------------------ 4

Outcome purification() {
  SynthConfig sc;
  sc.points = 256;
  double worst = 0.0, mean = 0.0, control = 0.0;
  // Share of FPS picks that sit within 0.05 of an outlier's original position.
  auto outlier_share = [](const std::vector<Vec3>& fused, const std::vector<Vec3>& outliers, std::size_t n) {
    std::size_t near = 0;
    for (std::size_t i : farthest_point_sample(fused, n)) {
      for (const auto& o : outliers) {
        if (distance(fused[i], o) <= 0.05) {
          ++near;
          break;
        }
      }
    }
    return double(near) / double(n);
  };
  for (std::uint64_t s = 0; s < 50; ++s) {
    const SceneSample sample = generate_sample("p", kAllCategories[s % 4], 4000 + s, sc);
    const std::size_t n = sample.input.size();
    // Label multiplication with true labels, fused after the complete cloud as in the network.
    std::vector<Vec3> fused(sample.gt_complete.points());
    std::vector<Vec3> raw(sample.gt_complete.points());
    std::vector<Vec3> outliers;
    for (std::size_t i = 0; i < n; ++i) {
      const double l = sample.input.labels()[i];
      fused.push_back(l * sample.input[i]);
      raw.push_back(sample.input[i]);
      if (l == 0.0) outliers.push_back(sample.input[i]);
    }
    const double share = outlier_share(fused, outliers, n);
    worst = std::max(worst, share);
    mean += share / 50.0;
    control += outlier_share(raw, outliers, n) / 50.0;
  }
  return {worst <= 0.05, fmt("outlier-position share in P_sampled: worst %.4f, mean %.4f over 50 samples "
                             "(without label multiplication: mean %.4f)",
                             worst, mean, control)};
}

// ------------------------------------------------------------------ 5, 6

std::vector<SceneSample> desk_samples(std::size_t count) {
  SynthConfig sc;
  sc.points = 256;
  std::vector<SceneSample> out;
  for (std::size_t s = 0; s < count; ++s) out.push_back(generate_sample("q", kAllCategories[s % 4], 500 + s, sc));
  return out;
}

Outcome permutation_invariance() {
  const CsNetConfig cfg = CsNetConfig::desk();
  const CsNet net(cfg, CsNetParams::initialize(cfg, 5));
  Rng rng(505);
  std::size_t compared = 0, different = 0;
  for (const auto& s : desk_samples(3)) {
    const auto base = net.forward(s.input);
    for (int t = 0; t < 20; ++t) {
      const auto out = net.forward(s.input.select(random_perm(rng, s.input.size())));
      for (std::size_t i = 0; i < cfg.m_blocks; ++i) {
        ++compared;
        different += vec(out.blocks[i].f_c.data()) != vec(base.blocks[i].f_c.data());
      }
    }
  }
  return {different == 0, fmt("%zu of %zu f_c comparisons differ (3 samples x 20 permutations x %zu blocks)",
                              different, compared, cfg.m_blocks)};
}

Outcome identity_at_init() {
  const CsNetConfig cfg = CsNetConfig::desk();
  const CsNet net(cfg, CsNetParams::initialize(cfg, 6));
  std::size_t compared = 0, different = 0;
  for (const auto& s : desk_samples(4)) {
    const auto out = net.forward(s.input);
    for (std::size_t i = 1; i < out.blocks.size(); ++i) {
      ++compared;
      different += vec(out.blocks[i].pc_pred.data()) != vec(out.blocks[i].p_sampled.data());
    }
  }
  return {different == 0 && compared > 0, fmt("%zu of %zu blocks differ from P_sampled", different, compared)};
}

// ------------------------------------------------------------------ 7, 8

struct OverfitRun {
  bool ok = false;
  std::string error;
  double cd_init = 0.0, cd_final = 0.0, cd1_final = 0.0, acc_final = 0.0, seconds = 0.0;
  std::size_t steps = 0;
};

OverfitRun overfit() {
  OverfitRun r;
  try {
    ScratchDir dir("overfit");
    SynthConfig sc;
    sc.points = 256;
    sc.split_ratios = {1.0, 0.0, 0.0};
    const Manifest m = generate_dataset(10, 7, dir.path(), sc);
    CsNetConfig net = CsNetConfig::desk();
    net.m_blocks = 2;
    TrainConfig tc;
    tc.lr = 1.2e-4;
    tc.batch_size = 10;
    tc.epochs = 1000;
    tc.max_steps = 500;
    tc.seed = 0;
    MetricConfig mc;
    EvalOptions eo;
    eo.split = "train";
    eo.all_blocks = true;
    const CsNetParams init = CsNetParams::initialize(net, tc.seed);
    const auto before = evaluate(m, CsNet(net, init.clone()), mc, eo);
    r.cd_init = *before.overall(2).values.cd;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult tr = train(m, net, tc, std::nullopt);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.steps = tr.steps;
    const auto after = evaluate(m, CsNet(net, tr.params.clone()), mc, eo);
    r.cd_final = *after.overall(2).values.cd;
    r.cd1_final = *after.overall(1).values.cd;
    r.acc_final = *after.overall(2).values.seg_macc;
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

// ------------------------------------------------------------------ 9

Outcome determinism() {
  auto run_once = [](const std::filesystem::path& root) {
    SynthConfig sc;
    sc.points = 128;
    const Manifest m = generate_dataset(12, 77, root / "data", sc);
    CsNetConfig net = CsNetConfig::desk();
    net.n_points = 128;
    net.m_blocks = 2;
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    tc.seed = 3;
    tc.lr = 1e-3;
    train(m, net, tc, root / "run");
    return m;
  };
  ScratchDir a("det_a"), b("det_b");
  const Manifest ma = run_once(a.path());
  const Manifest mb = run_once(b.path());
  std::size_t files = 0, differ = 0;
  auto same = [&](const std::filesystem::path& rel) {
    ++files;
    differ += read_bytes(a.path() / rel) != read_bytes(b.path() / rel);
  };
  same("data/manifest.jsonl");
  for (const auto& e : ma.entries) same(std::filesystem::path("data") / e.path);
  same("run/loss.csv");
  same("run/final.csnt");
  return {differ == 0 && ma.entries.size() == mb.entries.size(),
          fmt("%zu of %zu files differ (manifest, %zu samples, loss log, final checkpoint)", differ, files,
              ma.entries.size())};
}

// ------------------------------------------------------------------ 10

Outcome ablation() {
  ScratchDir dir("ablate");
  SynthConfig sc;
  sc.points = 64;
  const Manifest m = generate_dataset(10, 9, dir.path(), sc);
  CsNetConfig base = CsNetConfig::desk();
  base.n_points = 64;
  base.width_multiplier = 1.0 / 16;
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.max_steps = 2;
  const AblationReport rep = ablation_suite(m, base, tc, MetricConfig{});
  bool ok = rep.rows.size() == 7;
  if (ok) {
    ok = !rep.rows[0].cd && rep.rows[0].macc && rep.rows[1].cd && !rep.rows[1].macc;
    for (std::size_t i = 2; i < 7; ++i) ok = ok && rep.rows[i].cd && rep.rows[i].macc;
  }
  const std::string md = rep.to_markdown();
  ok = ok && std::count(md.begin(), md.end(), '\n') >= 9;
  return {ok, fmt("%zu rows; row 1 CD %s, row 2 mAcc %s", rep.rows.size(),
                  rep.rows.size() > 0 && !rep.rows[0].cd ? "absent" : "present",
                  rep.rows.size() > 1 && !rep.rows[1].macc ? "absent" : "present")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, double limit_s, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limit_s > 0 && dt > limit_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", limit_s);
    }
    std::printf("criterion %2d %s: %s (%s; %.1f s)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), dt);
    std::fflush(stdout);
    failures += !o.pass;
  };

  report(1, "gradient fidelity", 60, gradient_fidelity);
  report(2, "oracle equivalence", 30, oracle_equivalence);
  report(3, "metric identities", 0, metric_identities);
  report(4, "purification", 0, purification);
  report(5, "permutation invariance", 0, permutation_invariance);
  report(6, "identity at init", 0, identity_at_init);

  // Criteria 7 and 8 share one training run, held to a single thread.
  setenv("PCC_THREADS", "1", 1);
  const auto t0 = std::chrono::steady_clock::now();
  const OverfitRun run = overfit();
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  unsetenv("PCC_THREADS");
  report(7, "overfit gate", 0, [&] {
    if (!run.ok) return Outcome{false, "threw: " + run.error};
    const double ratio = run.cd_final / run.cd_init;
    return Outcome{ratio <= 0.3 && run.acc_final >= 0.9 && run.steps <= 500 && dt <= 600,
                   fmt("CD x1e4 %.1f -> %.1f (%.1f%% of initial), seg accuracy %.3f, %zu steps, train %.0f s of %.0f s",
                       run.cd_init, run.cd_final, 100 * ratio, run.acc_final, run.steps, run.seconds, dt)};
  });
  report(8, "cascade refinement trend", 0, [&] {
    if (!run.ok) return Outcome{false, "no overfit run"};
    return Outcome{run.cd_final <= run.cd1_final,
                   fmt("block 1 CD x1e4 %.1f, block 2 CD x1e4 %.1f", run.cd1_final, run.cd_final)};
  });
  report(9, "determinism", 0, determinism);
  report(10, "ablation report", 0, ablation);

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
