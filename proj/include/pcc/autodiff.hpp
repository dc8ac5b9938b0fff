#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pcc/geom.hpp"

namespace pcc::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward touches the node
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  // Accumulates this node's grad into its inputs' grads.
  std::function<void(Node& self)> backward;
  // Discrete decisions taken in the forward pass (argmax, matches, masks).
  std::vector<std::size_t> choices;
};

}  // namespace detail

/// Dense row-major array of doubles that participates in the gradient tape.
///
/// A Tensor is a cheap handle; copies share storage. Values produced by the
/// primitives are immutable. Only leaves expose mutable data, for optimizer
/// updates and finite-difference probes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor parameter(Shape shape, std::vector<double> data);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data().size(); }

  std::span<const double> data() const;
  std::span<double> mutable_data();  // leaves only
  double item() const;
  double operator()(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  /// Same values, no history.
  Tensor detach() const;
  /// Deep copy of values; keeps requires_grad for leaves.
  Tensor clone() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Ordered record of the operations reachable from a root, inputs first.
class Tape {
 public:
  explicit Tape(const Tensor& root);
  std::size_t size() const { return order_.size(); }
  /// Propagates d(root)/d(node) back to every requires_grad leaf.
  void backward();
  /// Hash of every discrete forward decision on the tape.
  std::uint64_t selection_signature() const;

 private:
  Tensor root_;
  std::vector<detail::Node*> order_;
};

/// Runs reverse mode from a one-element loss; leaf grads accumulate.
void backward(const Tensor& loss);

// Primitives. Binary elementwise ops broadcast like dense-array libraries do:
// trailing-aligned dimensions must match or be 1.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Each row of a rank-2 tensor shifted to zero mean and scaled to unit
/// variance: (x - mean) / sqrt(var + eps). No learned gain or offset.
Tensor layer_norm(const Tensor& a, double eps = 1e-5);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Keeps the reduced axis with extent 1. Gradient goes to the first maximum.
Tensor reduce_max(const Tensor& a, std::size_t axis);
Tensor reduce_mean(const Tensor& a, std::size_t axis);
Tensor sum(const Tensor& a);
/// Tiles `a` `times` times along `axis`.
Tensor broadcast_repeat(const Tensor& a, std::size_t axis, std::size_t times);
/// Rows of a (axis 0) in index order; gradient scatters back additively.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices);
Tensor reshape(const Tensor& a, Shape shape);

/// Differentiable Chamfer distance from an N x 3 prediction to a fixed cloud.
/// Correspondences are fixed in the forward pass.
Tensor chamfer_loss(const Tensor& pred, std::span<const Vec3> gt, bool squared = false);
/// Mean binary cross-entropy; predictions are clamped to [1e-7, 1 - 1e-7].
Tensor bce_loss(const Tensor& pred, std::span<const double> gt);

/// Row-major N x 3 values of a tensor with shape {N, 3}.
std::vector<Vec3> to_points(const Tensor& t);
Tensor from_points(std::span<const Vec3> pts, bool requires_grad = false);

}  // namespace pcc::ad
