#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pcc/autodiff.hpp"

namespace pcc::ad {
namespace {

std::size_t nearest_index(const Vec3& p, std::span<const Vec3> cloud, double& best_d2) {
  best_d2 = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t j = 0; j < cloud.size(); ++j) {
    const double d2 = squared_distance(p, cloud[j]);
    if (d2 < best_d2) {
      best_d2 = d2;
      arg = j;
    }
  }
  return arg;
}

}  // namespace

Tensor chamfer_loss(const Tensor& pred, std::span<const Vec3> gt, bool squared) {
  if (!pred.defined()) throw std::invalid_argument("chamfer_loss: undefined prediction");
  const std::vector<Vec3> p = to_points(pred);
  if (p.empty() || gt.empty()) throw std::invalid_argument("chamfer_loss: empty input");
  const std::size_t n = p.size(), m = gt.size();

  // choices: nearest gt for each prediction, then nearest prediction for each gt point.
  std::vector<std::size_t> matches(n + m);
  std::vector<double> d_pg(n), d_gp(m);
  double forward_sum = 0.0, backward_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double d2;
    matches[i] = nearest_index(p[i], gt, d2);
    d_pg[i] = squared ? d2 : std::sqrt(d2);
    forward_sum += d_pg[i];
  }
  for (std::size_t j = 0; j < m; ++j) {
    double d2;
    matches[n + j] = nearest_index(gt[j], p, d2);
    d_gp[j] = squared ? d2 : std::sqrt(d2);
    backward_sum += d_gp[j];
  }
  const double loss = forward_sum / static_cast<double>(n) + backward_sum / static_cast<double>(m);

  std::vector<Vec3> target(gt.begin(), gt.end());
  auto node = std::make_shared<detail::Node>();
  node->shape = {};
  node->data = {loss};
  node->leaf = false;
  node->requires_grad = pred.requires_grad();
  node->inputs = {pred.node()};
  node->choices = std::move(matches);
  if (node->requires_grad) {
    node->backward = [target = std::move(target), d_pg = std::move(d_pg), d_gp = std::move(d_gp), n, m,
                      squared](detail::Node& self) {
      const double g = self.grad[0];
      const auto& x = self.inputs[0]->data;
      auto& dx = self.inputs[0]->grad;
      // Zero-distance matches take the zero subgradient.
      auto push = [&](std::size_t i, const Vec3& q, double d, double weight) {
        if (d == 0.0) return;
        const double scale = squared ? 2.0 * weight : weight / d;
        for (int a = 0; a < 3; ++a) dx[3 * i + a] += g * scale * (x[3 * i + a] - q[a]);
      };
      const double wn = 1.0 / static_cast<double>(n), wm = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) push(i, target[self.choices[i]], d_pg[i], wn);
      for (std::size_t j = 0; j < m; ++j) push(self.choices[n + j], target[j], d_gp[j], wm);
    };
  }
  return Tensor(std::move(node));
}

Tensor bce_loss(const Tensor& pred, std::span<const double> gt) {
  if (!pred.defined()) throw std::invalid_argument("bce_loss: undefined prediction");
  const auto p = pred.data();
  if (p.size() != gt.size()) {
    throw std::invalid_argument("bce_loss: " + std::to_string(p.size()) + " predictions for " +
                                std::to_string(gt.size()) + " labels");
  }
  if (p.empty()) throw std::invalid_argument("bce_loss: empty input");
  constexpr double lo = 1e-7, hi = 1.0 - 1e-7;
  std::vector<std::size_t> clamped(p.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], lo, hi);
    clamped[i] = q != p[i] ? 1 : 0;
    total += gt[i] * std::log(q) + (1.0 - gt[i]) * std::log(1.0 - q);
  }
  const double n = static_cast<double>(p.size());

  auto node = std::make_shared<detail::Node>();
  node->shape = {};
  node->data = {-total / n};
  node->leaf = false;
  node->requires_grad = pred.requires_grad();
  node->inputs = {pred.node()};
  node->choices = std::move(clamped);
  if (node->requires_grad) {
    node->backward = [labels = std::vector<double>(gt.begin(), gt.end()), n](detail::Node& self) {
      const double g = self.grad[0];
      const auto& x = self.inputs[0]->data;
      auto& dx = self.inputs[0]->grad;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (self.choices[i]) continue;
        const double q = x[i];
        dx[i] += -g * (labels[i] / q - (1.0 - labels[i]) / (1.0 - q)) / n;
      }
    };
  }
  return Tensor(std::move(node));
}

}  // namespace pcc::ad
