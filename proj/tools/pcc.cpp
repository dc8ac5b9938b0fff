// pcc: synth, train, eval, ablate, complete, selftest, bench.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "pcc/check.hpp"
#include "pcc/cloud_io.hpp"
#include "pcc/config.hpp"
#include "pcc/io.hpp"
#include "pcc/metrics.hpp"
#include "pcc/parallel.hpp"
#include "selftest.hpp"

using namespace pcc;

namespace {

enum Exit { kOk = 0, kFail = 1, kUsage = 2, kIo = 3, kCheckpoint = 4, kNonFinite = 5 };

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct ConfigArgs {
  std::string file;
  std::string profile = "desk";
  std::vector<std::string> sets;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", file, "Configuration file (key = value lines)");
    cmd->add_option("--profile", profile, "Base profile when no --config is given")->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--set", sets, "Override, key=value (repeatable)");
  }

  RunConfig resolve(const std::filesystem::path& fallback = {}) const {
    RunConfig c;
    if (!file.empty())
      c = RunConfig::load(file);
    else if (!fallback.empty() && std::filesystem::exists(fallback))
      c = RunConfig::load(fallback);
    else
      c = RunConfig::from_profile(profile);
    for (const auto& s : sets) c.apply_override(s);
    c.validate();
    return c;
  }
};

CsNetParams load_params(const std::string& path, const CsNetConfig& net) {
  try {
    CsNetParams p = load_checkpoint(path);
    p.check_compatible(net);
    return p;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint ") + path + ": " + e.what());
  }
}

std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  return dir;
}

// ---------------------------------------------------------------- commands

int cmd_synth(const std::string& out, std::size_t count, std::uint64_t seed, std::size_t points,
              const std::string& categories, const ConfigArgs& cfg) {
  RunConfig rc = cfg.resolve();
  SynthConfig sc = rc.synth;
  sc.points = points;
  if (!categories.empty()) {
    sc.categories.clear();
    std::stringstream ss(categories);
    std::string name;
    while (std::getline(ss, name, ',')) sc.categories.push_back(parse_category(name));
  }
  if (count < 10) throw std::invalid_argument("--count must be at least 10");
  if (points < 4) throw std::invalid_argument("--points must be at least 4");
  const Manifest m = generate_dataset(count, seed, out, sc);
  const auto path = std::filesystem::path(out) / "manifest.jsonl";
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(read_text(path))));
  std::cout << "manifest: " << path.string() << " (fnv1a " << hash << ")\n";
  std::cout << "train=" << m.count("train") << " val=" << m.count("val") << " test=" << m.count("test") << "\n";
  return kOk;
}

int cmd_train(const std::string& data, const std::string& out, const std::string& ckpt, const ConfigArgs& cfg) {
  const RunConfig rc = cfg.resolve();
  const Manifest m = load_manifest(data);
  std::optional<CsNetParams> init;
  if (!ckpt.empty()) init = load_params(ckpt, rc.net);
  const auto dir = ensure_dir(out);
  write_atomic(dir / "config.txt", rc.to_text());
  const TrainResult r = train(m, rc.net, rc.train, dir, std::move(init));
  std::cout << "steps=" << r.steps << " epochs=" << r.log.size() << " params=" << param_count(r.params) << "\n";
  if (!r.log.empty()) std::cout << "final epoch mean loss " << r.log.back().total << "\n";
  std::cout << "checkpoint: " << (dir / "final.csnt").string() << "\n";
  std::cout << "fixed learning rate " << rc.train.lr << " (no schedule)\n";
  return kOk;
}

int cmd_eval(const std::string& data, const std::string& out, const std::string& ckpt, const std::string& split,
             bool oracle, bool all_blocks, const ConfigArgs& cfg) {
  const std::filesystem::path fallback = ckpt.empty() ? "" : std::filesystem::path(ckpt).parent_path() / "config.txt";
  RunConfig rc = cfg.resolve(fallback);
  if (!split.empty()) rc.eval.split = split;
  rc.eval.oracle = rc.eval.oracle || oracle;
  rc.eval.all_blocks = rc.eval.all_blocks || all_blocks;
  const Manifest m = load_manifest(data);
  CsNetParams params;
  if (!rc.eval.oracle) {
    if (ckpt.empty()) throw std::invalid_argument("--ckpt is required unless --oracle is set");
    params = load_params(ckpt, rc.net);
  } else {
    params = ckpt.empty() ? CsNetParams::initialize(rc.net, rc.train.seed) : load_params(ckpt, rc.net);
  }
  const CsNet net(rc.net, std::move(params));
  const MetricsReport report = evaluate(m, net, rc.metric, rc.eval);
  const auto dir = ensure_dir(out);
  write_atomic(dir / "report.csv", report.to_csv());
  write_atomic(dir / "report.md", report.to_markdown());
  std::cout << report.to_markdown();
  return kOk;
}

int cmd_ablate(const std::string& data, const std::string& out, const ConfigArgs& cfg) {
  const RunConfig rc = cfg.resolve();
  const Manifest m = load_manifest(data);
  const AblationReport r = ablation_suite(m, rc.net, rc.train, rc.metric, rc.eval.split);
  const auto dir = ensure_dir(out);
  write_atomic(dir / "ablation.md", r.to_markdown());
  std::cout << r.to_markdown();
  return kOk;
}

int cmd_complete(const std::string& input, const std::string& ckpt, const std::string& output, bool emit_labels,
                 const ConfigArgs& cfg) {
  const RunConfig rc = cfg.resolve(std::filesystem::path(ckpt).parent_path() / "config.txt");
  const PointCloud raw = read_cloud(input);
  const CsNet net(rc.net, load_params(ckpt, rc.net));
  if (!rc.net.enable_completion) throw std::invalid_argument("model configuration has no completion head");
  if (emit_labels && !rc.net.enable_segmentation) throw std::invalid_argument("model configuration has no segmentation head");

  Rng rng(rc.train.seed);
  const PointCloud sized = resample_to(PointCloud(raw.points()), rc.net.n_points, rng);
  const auto [normalized, frame] = normalize_unit_ball(sized);
  const ForwardResult out = net.forward(normalized);
  const auto& last = out.blocks.back();
  std::vector<Vec3> pts = ad::to_points(last.pc_pred);
  for (auto& p : pts) p = frame.invert(p);
  write_cloud(output, PointCloud(pts));
  std::cout << "wrote " << pts.size() << " points to " << output << "\n";
  if (emit_labels) {
    const auto d = last.ps_pred.data();
    std::filesystem::path lp = output;
    lp.replace_extension(".labels.xyzl");
    write_cloud(lp, PointCloud(sized.points(), std::vector<double>(d.begin(), d.end())));
    std::cout << "wrote labels to " << lp.string() << "\n";
  }
  return kOk;
}

int cmd_bench(const std::string& op, std::size_t n) {
  std::vector<std::size_t> sizes = n ? std::vector<std::size_t>{n} : std::vector<std::size_t>{256, 512, 1024, 2048, 4096};
  std::printf("%-4s %8s %12s %14s\n", "op", "n", "seconds", "points/s");
  Rng rng(1);
  for (std::size_t size : sizes) {
    std::vector<Vec3> a(size), b(size);
    for (auto& p : a) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    for (auto& p : b) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto t0 = std::chrono::steady_clock::now();
    double sink = 0.0;
    if (op == "fps") sink += static_cast<double>(farthest_point_sample(a, size / 4 + 1).back());
    if (op == "knn") sink += static_cast<double>(knn(a, std::min<std::size_t>(16, size)).indices.back());
    if (op == "cd") sink += chamfer_distance(a, b);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%-4s %8zu %12.6f %14.0f\n", op.c_str(), size, dt, static_cast<double>(size) / std::max(dt, 1e-12));
    if (sink < -1.0) std::puts("");
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point cloud completion and segmentation toolkit"};
  app.require_subcommand(1);

  std::string out, data, ckpt, input, output, categories, split, op;
  std::size_t count = 100, points = 2048, n = 0;
  std::uint64_t seed = 0;
  bool oracle = false, all_blocks = false, emit_labels = false;
  ConfigArgs cfg;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--count", count, "Number of samples (at least 10)");
  synth->add_option("--seed", seed, "Master seed");
  synth->add_option("--points", points, "Points per cloud");
  synth->add_option("--categories", categories, "Comma-separated subset of chair,table,lamp,cabinet");
  cfg.add(synth);

  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--out", out, "Output directory")->required();
  tr->add_option("--ckpt", ckpt, "Initial checkpoint");
  cfg.add(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--data", data, "Dataset directory")->required();
  ev->add_option("--out", out, "Output directory for report.csv and report.md")->required();
  ev->add_option("--ckpt", ckpt, "Checkpoint");
  ev->add_option("--split", split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_flag("--oracle", oracle, "Score ground truth in place of predictions");
  ev->add_flag("--all-blocks", all_blocks, "One row per cascade block");
  cfg.add(ev);

  auto* ab = app.add_subcommand("ablate", "Train and evaluate the ablation variants");
  ab->add_option("--data", data, "Dataset directory")->required();
  ab->add_option("--out", out, "Output directory")->required();
  cfg.add(ab);

  auto* co = app.add_subcommand("complete", "Complete one point cloud");
  co->add_option("--input", input, "XYZ, XYZL or PCSM file")->required();
  co->add_option("--ckpt", ckpt, "Checkpoint")->required();
  co->add_option("--output", output, "Output file (.pcsm binary, otherwise text)")->required();
  co->add_flag("--emit-labels", emit_labels, "Also write predicted labels for the input");
  cfg.add(co);

  auto* st = app.add_subcommand("selftest", "Gradient and oracle checks");

  auto* be = app.add_subcommand("bench", "Time a geometry kernel");
  be->add_option("--op", op, "fps, knn or cd")->required();
  be->add_option("--n", n, "Single size (default: a sweep)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) return cmd_synth(out, count, seed, points, categories, cfg);
    if (*tr) return cmd_train(data, out, ckpt, cfg);
    if (*ev) return cmd_eval(data, out, ckpt, split, oracle, all_blocks, cfg);
    if (*ab) return cmd_ablate(data, out, cfg);
    if (*co) return cmd_complete(input, ckpt, output, emit_labels, cfg);
    if (*st) return tool::run_selftest(std::cout) ? kOk : kFail;
    if (*be) {
      if (op != "fps" && op != "knn" && op != "cd") {
        std::cerr << "error: unknown op '" << op << "' (expected fps, knn or cd)\n";
        return kUsage;
      }
      return cmd_bench(op, n);
    }
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCheckpoint;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonFinite;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kUsage;
}
