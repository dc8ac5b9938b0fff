#include "selftest.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "pcc/check.hpp"
#include "pcc/csnet.hpp"
#include "pcc/metrics.hpp"
#include "pcc/rng.hpp"

namespace pcc::tool {

namespace {

std::vector<Vec3> random_cloud(Rng& rng, std::size_t n) {
  std::vector<Vec3> p(n);
  for (auto& v : p) v = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
  return p;
}

std::string gradients(Rng& rng) {
  using namespace ad;
  auto leaf = [&](Shape s) {
    std::vector<double> d(numel(s));
    for (double& x : d) x = rng.uniform(-1, 1);
    return Tensor::parameter(std::move(s), std::move(d));
  };
  Tensor a = leaf({4, 3}), b = leaf({3, 5}), c = leaf({1, 5}), w = leaf({10, 3}), v = leaf({10, 1});
  const std::vector<double> gt_labels{1, 0, 1, 1};
  const auto gt = random_cloud(rng, 6);
  const std::vector<std::size_t> rows{0, 2, 2, 3};
  auto loss = [&] {
    Tensor h = relu(add(matmul(a, b), c));
    h = layer_norm(concat({tanh(h), sigmoid(h)}, 1));
    Tensor m = mul(sub(h, broadcast_repeat(reduce_max(h, 0), 0, 4)), h);
    Tensor pts = matmul(gather_rows(m, rows), w);
    Tensor bce = bce_loss(sigmoid(matmul(m, v)), gt_labels);
    Tensor extra = scalar_mul(sum(reduce_mean(reshape(m, {8, 5}), 0)), 0.1);
    return add(add(chamfer_loss(pts, gt), bce), extra);
  };
  auto r = check::check_gradients(loss, {a, b, c, w, v});
  if (!r.ok(1e-4)) return "primitive graph max rel error " + std::to_string(r.max_rel_error) + " at " + r.worst;

  CsNetConfig cfg;
  cfg.n_points = 32;
  cfg.m_blocks = 2;
  cfg.width_multiplier = 1.0 / 32;
  cfg.k_neighbors = 4;
  cfg.decoder_levels = 3;
  cfg.decoder_branching = 4;
  CsNetParams params = CsNetParams::initialize(cfg, 1);
  for (const auto& [name, t] : params.tensors())
    for (double& x : const_cast<Tensor&>(t).mutable_data()) x += 0.1 * rng.normal();
  std::vector<double> labels(32);
  for (std::size_t i = 0; i < 32; ++i) labels[i] = i % 3 ? 1.0 : 0.0;
  const PointCloud input(random_cloud(rng, 32), labels);
  const auto target = random_cloud(rng, 32);
  const CsNet net(cfg, params);
  std::vector<Tensor> leaves;
  std::vector<std::string> names;
  for (const auto& [name, t] : net.params().tensors()) {
    leaves.push_back(t);
    names.push_back(name);
  }
  auto rn = check::check_gradients([&] { return net.total_loss(net.forward(input), target, labels).total; }, leaves,
                                   names);
  if (!rn.ok(1e-4)) return "network max rel error " + std::to_string(rn.max_rel_error) + " at " + rn.worst;
  return "";
}

std::string fps_knn(Rng& rng) {
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 1 + rng.index(256);
    const auto pts = random_cloud(rng, n);
    const std::size_t m = 1 + rng.index(std::min<std::size_t>(n, 48));
    if (farthest_point_sample(pts, m) != check::fps_oracle(pts, m)) return "fps mismatch at n=" + std::to_string(n);
    const std::size_t k = 1 + rng.index(std::min<std::size_t>(n, 16));
    if (knn(pts, k).indices != check::knn_oracle(pts, k).indices) return "knn mismatch at n=" + std::to_string(n);
  }
  return "";
}

std::string chamfer(Rng& rng) {
  for (int t = 0; t < 40; ++t) {
    const auto a = random_cloud(rng, 1 + rng.index(256)), b = random_cloud(rng, 1 + rng.index(256));
    for (bool sq : {false, true})
      if (std::abs(chamfer_distance(a, b, sq) - check::chamfer_oracle(a, b, sq)) > 1e-12) return "chamfer mismatch";
  }
  return "";
}

std::string metric_identities(Rng& rng) {
  const auto a = random_cloud(rng, 100);
  if (chamfer_distance(a, a) != 0.0) return "CD(a,a) != 0";
  if (f_score(a, a, 1e-4) != 1.0) return "F(a,a) != 1";
  if (std::abs(density_aware_cd(a, a)) > 1e-12) return "DCD(a,a) != 0";
  const std::vector<Vec3> p{{0, 0, 0}}, q{{1, 0, 0}};
  if (std::abs(density_aware_cd(p, q, 1.0) - (1.0 - std::exp(-1.0))) > 1e-9) return "DCD single pair";
  return "";
}

std::string visibility(Rng& rng) {
  std::vector<Vec3> pts;
  while (pts.size() < 500) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double len = norm(v);
    if (len > 1e-9) pts.push_back((1.0 / len) * v);
  }
  const Vec3 view{0, 0, 3};
  const auto vis = hidden_point_removal(pts, {view, 10.0});
  const double frac = static_cast<double>(vis.size()) / 500.0;
  if (frac < 0.35 || frac > 0.65) return "sphere visible fraction " + std::to_string(frac);
  // The flip operator is approximate near the horizon; demand broad agreement.
  std::vector<char> marked(pts.size(), 0);
  for (std::size_t i : vis) marked[i] = 1;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    agree += static_cast<bool>(marked[i]) == check::sphere_point_visible(pts[i], {0, 0, 0}, 1.0, view);
  if (agree < 450) return "agreement with facing test " + std::to_string(agree) + "/500";
  return "";
}

}  // namespace

bool run_selftest(std::ostream& out) {
  const std::pair<const char*, std::function<std::string(Rng&)>> groups[] = {
      {"gradients", gradients},          {"fps/knn oracle", fps_knn}, {"chamfer oracle", chamfer},
      {"metric identities", metric_identities}, {"visibility", visibility},
  };
  bool all = true;
  Rng rng(20240607);
  for (const auto& [name, fn] : groups) {
    std::string why;
    try {
      why = fn(rng);
    } catch (const std::exception& e) {
      why = std::string("threw: ") + e.what();
    }
    out << name << ": " << (why.empty() ? "pass" : "fail (" + why + ")") << "\n";
    all = all && why.empty();
  }
  return all;
}

}  // namespace pcc::tool
