#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>

#include "pcc/io.hpp"
#include "pcc/train.hpp"
#include "support.hpp"

using namespace pcc;

namespace {

CsNetParams one_tensor(double value) {
  CsNetParams p;
  p.set("w", ad::Tensor::parameter({1}, {value}));
  return p;
}

CsNetConfig tiny_net() {
  CsNetConfig c = pcc::test::mini_config();
  c.n_points = 32;
  return c;
}

Manifest tiny_dataset(const std::filesystem::path& dir) {
  SynthConfig s;
  s.points = 32;
  return generate_dataset(10, 5, dir, s);
}

}  // namespace

TEST_CASE("adam examples") {
  TrainConfig cfg;
  cfg.lr = 1e-3;
  CsNetParams p = one_tensor(0.5);
  AdamState st;
  adam_step(p, {{"w", {1.0}}}, st, cfg);
  CHECK(st.step == 1);
  CHECK(0.5 - p.at("w").data()[0] == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-12));

  CsNetParams q = one_tensor(0.5);
  AdamState st2;
  adam_step(q, {{"w", {0.0}}}, st2, cfg);
  CHECK(q.at("w").data()[0] == 0.5);
  CHECK(st2.step == 1);

  CsNetParams r = one_tensor(0.5);
  AdamState st3;
  adam_step(r, {{"w", {1.0}}}, st3, cfg);
  CHECK(r.at("w").data()[0] == p.at("w").data()[0]);

  CHECK_THROWS_AS(adam_step(r, {{"nope", {1.0}}}, st3, cfg), std::invalid_argument);
  CHECK_THROWS_AS(adam_step(r, {{"w", {1.0, 2.0}}}, st3, cfg), std::invalid_argument);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = TrainConfig();
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("param count") {
  CsNetParams p;
  CHECK(param_count(p) == 0);
  p.set("w", ad::Tensor::parameter({3, 4}, std::vector<double>(12, 0.0)));
  p.set("b", ad::Tensor::parameter({1, 4}, std::vector<double>(4, 0.0)));
  CHECK(param_count(p) == 16);
  const CsNetParams net = CsNetParams::initialize(tiny_net(), 3);
  CHECK(param_count(decode_checkpoint(encode_checkpoint(net))) == param_count(net));
}

TEST_CASE("initialization respects the declared layout") {
  const CsNetConfig cfg = tiny_net();
  const CsNetParams p = CsNetParams::initialize(cfg, 4);
  for (const auto& spec : CsNetParams::declare(cfg)) {
    const ad::Tensor& t = p.at(spec.name);
    CHECK(t.shape() == spec.shape);
    if (spec.zero_init) {
      for (double v : t.data()) CHECK(v == 0.0);
    } else {
      const double bound = std::sqrt(6.0 / double(spec.shape[0] + spec.shape[1]));
      for (double v : t.data()) CHECK(std::abs(v) <= bound);
    }
  }
}

TEST_CASE("sample gradient matches the network loss") {
  const CsNetConfig cfg = tiny_net();
  const CsNetParams p = pcc::test::perturbed_params(cfg, 5);
  Rng rng(71);
  const PointCloud in = pcc::test::labeled_cloud(rng, 32);
  const PointCloud gt(pcc::test::random_cloud(rng, 32));
  const SampleGrad g = sample_gradient(cfg, p, in, gt);
  const CsNet net(cfg, p.clone());
  CHECK(g.loss.total.item() == net.total_loss(net.forward(in), gt.points(), in.labels()).total.item());
  CHECK(g.grads.size() == p.size());
  // The caller's parameters are left without gradients.
  for (const auto& [name, t] : p.tensors()) CHECK_FALSE(t.has_grad());
}

TEST_CASE("zero epochs returns the initialization") {
  pcc::test::TempDir d("train0");
  const Manifest m = tiny_dataset(d.path() / "data");
  TrainConfig tc;
  tc.epochs = 0;
  tc.seed = 9;
  const TrainResult r = train(m, tiny_net(), tc, d.path() / "run");
  CHECK(r.steps == 0);
  CHECK(encode_checkpoint(r.params) == encode_checkpoint(CsNetParams::initialize(tiny_net(), 9)));
  CHECK(read_bytes(d.path() / "run" / "final.csnt") == encode_checkpoint(r.params));
}

TEST_CASE("training is reproducible and logs every epoch") {
  pcc::test::TempDir d("train1");
  const Manifest m = tiny_dataset(d.path() / "data");
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 3;
  tc.seed = 1;
  tc.lr = 1e-3;
  tc.checkpoint_interval = 1;
  const TrainResult a = train(m, tiny_net(), tc, d.path() / "a");
  const TrainResult b = train(m, tiny_net(), tc, d.path() / "b");
  CHECK(a.steps == 2 * 3);  // 8 training samples in batches of 3
  REQUIRE(a.log.size() == 2);
  CHECK(a.log[0].cd.size() == 2);
  CHECK(a.log[0].seg.size() == 2);
  CHECK(read_bytes(d.path() / "a" / "loss.csv") == read_bytes(d.path() / "b" / "loss.csv"));
  CHECK(read_bytes(d.path() / "a" / "final.csnt") == read_bytes(d.path() / "b" / "final.csnt"));
  CHECK(std::filesystem::exists(d.path() / "a" / "epoch_1.csnt"));
  CHECK(encode_checkpoint(a.params) != encode_checkpoint(CsNetParams::initialize(tiny_net(), 1)));

  const std::string csv = read_text(d.path() / "a" / "loss.csv");
  CHECK(csv.rfind("step,epoch,total,seg_1,seg_2,cd_1,cd_2\n", 0) == 0);

  TrainConfig capped = tc;
  capped.max_steps = 4;
  CHECK(train(m, tiny_net(), capped, std::nullopt).steps == 4);
}

TEST_CASE("evaluation report shape and oracle mode") {
  pcc::test::TempDir d("eval");
  const Manifest m = tiny_dataset(d.path() / "data");
  const CsNetConfig cfg = tiny_net();
  const CsNet net(cfg, CsNetParams::initialize(cfg, 2));
  MetricConfig mc;
  EvalOptions opt;
  const MetricsReport r = evaluate(m, net, mc, opt);
  const std::size_t n_test = m.count("test");
  CHECK(r.samples.size() == n_test);
  std::set<std::string> cats;
  for (const auto& e : m.split("test")) cats.insert(e.category);
  CHECK(r.aggregates.size() == 1 + cats.size());

  opt.all_blocks = true;
  const MetricsReport rb = evaluate(m, net, mc, opt);
  CHECK(rb.samples.size() == n_test * cfg.m_blocks);
  CHECK(rb.overall(1).block == 1);
  CHECK(rb.overall(2).block == 2);

  opt.oracle = true;
  const MetricsReport ro = evaluate(m, net, mc, opt);
  for (const auto& row : ro.samples) {
    CHECK(*row.values.cd == 0.0);
    CHECK(*row.values.fscore_small == 1.0);
    CHECK(*row.values.fscore_large == 1.0);
    CHECK(*row.values.seg_macc == 1.0);
  }

  CsNetConfig other = cfg;
  other.k_neighbors = 2;
  CHECK_THROWS(CsNet(other, net.params()));
}

TEST_CASE("ablation variants") {
  const CsNetConfig base = CsNetConfig::full();
  const auto v = ablation_variants(base);
  REQUIRE(v.size() == 7);
  CHECK_FALSE(v[0].config.enable_completion);
  CHECK_FALSE(v[1].config.enable_segmentation);
  CHECK(v[4].config == base);
  CHECK(v[5].config.m_blocks == 2);
  CHECK(v[6].config.m_blocks == 4);
  AblationReport rep;
  rep.rows.push_back({"segmentation only", std::nullopt, 91.5, 100});
  const std::string md = rep.to_markdown();
  CHECK(md.find("| - |") != std::string::npos);
}

TEST_CASE("training output does not depend on the thread count") {
  pcc::test::TempDir d("threads");
  const Manifest m = tiny_dataset(d.path() / "data");
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.seed = 2;
  tc.lr = 1e-3;
  setenv("PCC_THREADS", "1", 1);
  const auto one = encode_checkpoint(train(m, tiny_net(), tc, std::nullopt).params);
  setenv("PCC_THREADS", "3", 1);
  const auto three = encode_checkpoint(train(m, tiny_net(), tc, std::nullopt).params);
  unsetenv("PCC_THREADS");
  CHECK(one == three);
}
