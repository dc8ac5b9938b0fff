#include "pcc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace pcc::ad {

using detail::Node;

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

[[noreturn]] void fail(const std::string& op, const std::string& msg) {
  throw std::invalid_argument(op + ": " + msg);
}

const Node& get(const Tensor& t, const char* op) {
  if (!t.defined()) fail(op, "undefined tensor");
  return *t.node();
}

// Creates a result node; history is kept only when some input needs gradients.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->leaf = false;
  for (const auto& t : inputs) node->requires_grad = node->requires_grad || t.requires_grad();
  node->inputs.reserve(inputs.size());
  for (auto& t : inputs) node->inputs.push_back(t.node());
  if (node->requires_grad) node->backward = std::move(backward);
  return Tensor(std::move(node));
}

bool wants(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }
std::vector<double>& grad_of(Node& self, std::size_t i) { return self.inputs[i]->grad; }

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a, stride_b;  // per output axis, 0 where broadcast
  bool same = false;
};

std::vector<std::size_t> strides_for(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

Broadcast plan(const Shape& a, const Shape& b, const char* op) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t r = std::max(a.size(), b.size());
  p.out.assign(r, 1);
  p.stride_a.assign(r, 0);
  p.stride_b.assign(r, 0);
  const auto sa = strides_for(a), sb = strides_for(b);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t ai = i + a.size() >= r ? i + a.size() - r : SIZE_MAX;
    const std::size_t bi = i + b.size() >= r ? i + b.size() - r : SIZE_MAX;
    const std::size_t da = ai == SIZE_MAX ? 1 : a[ai];
    const std::size_t db = bi == SIZE_MAX ? 1 : b[bi];
    if (da != db && da != 1 && db != 1) {
      fail(op, "shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
    }
    p.out[i] = std::max(da, db);
    if (da != 1) p.stride_a[i] = sa[ai];
    if (db != 1) p.stride_b[i] = sb[bi];
  }
  return p;
}

template <class F>
void for_each_pair(const Broadcast& p, F&& f) {
  const std::size_t total = numel(p.out);
  if (p.same) {
    for (std::size_t k = 0; k < total; ++k) f(k, k, k);
    return;
  }
  const std::size_t r = p.out.size();
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t k = 0; k < total; ++k) {
    f(k, oa, ob);
    std::size_t d = r - 1;
    ++idx[d];
    oa += p.stride_a[d];
    ob += p.stride_b[d];
    while (idx[d] == p.out[d] && d > 0) {
      oa -= p.stride_a[d] * p.out[d];
      ob -= p.stride_b[d] * p.out[d];
      idx[d] = 0;
      --d;
      ++idx[d];
      oa += p.stride_a[d];
      ob += p.stride_b[d];
    }
  }
}

enum class BinOp { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const Node& na = get(a, name);
  const Node& nb = get(b, name);
  Broadcast p = plan(na.shape, nb.shape, name);
  std::vector<double> out(numel(p.out));
  const double* da = na.data.data();
  const double* db = nb.data.data();
  switch (op) {
    case BinOp::Add:
      for_each_pair(p, [&](std::size_t k, std::size_t i, std::size_t j) { out[k] = da[i] + db[j]; });
      break;
    case BinOp::Sub:
      for_each_pair(p, [&](std::size_t k, std::size_t i, std::size_t j) { out[k] = da[i] - db[j]; });
      break;
    case BinOp::Mul:
      for_each_pair(p, [&](std::size_t k, std::size_t i, std::size_t j) { out[k] = da[i] * db[j]; });
      break;
  }
  Shape shape = p.out;
  return make_result(std::move(shape), std::move(out), {a, b}, [p, op](Node& self) {
    const std::vector<double>& g = self.grad;
    const bool ga = wants(self, 0), gb = wants(self, 1);
    const double* va = self.inputs[0]->data.data();
    const double* vb = self.inputs[1]->data.data();
    double* ra = ga ? grad_of(self, 0).data() : nullptr;
    double* rb = gb ? grad_of(self, 1).data() : nullptr;
    for_each_pair(p, [&](std::size_t k, std::size_t i, std::size_t j) {
      switch (op) {
        case BinOp::Add:
          if (ra) ra[i] += g[k];
          if (rb) rb[j] += g[k];
          break;
        case BinOp::Sub:
          if (ra) ra[i] += g[k];
          if (rb) rb[j] -= g[k];
          break;
        case BinOp::Mul:
          if (ra) ra[i] += g[k] * vb[j];
          if (rb) rb[j] += g[k] * va[i];
          break;
      }
    });
  });
}

// outer x len x inner view of a shape around `axis`.
struct AxisView {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisView around(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace

// ---------------------------------------------------------------- Tensor

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  if (ad::numel(shape) != data.size()) {
    fail("Tensor", "shape " + shape_str(shape) + " needs " + std::to_string(ad::numel(shape)) +
                       " values, got " + std::to_string(data.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t = constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = ad::numel(shape);
  Tensor t = constant(std::move(shape), std::vector<double>(n, 0.0));
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v) { return constant({}, {v}); }

const Shape& Tensor::shape() const { return get(*this, "shape").shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) fail("dim", "axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::span<const double> Tensor::data() const { return get(*this, "data").data; }

std::span<double> Tensor::mutable_data() {
  if (!defined() || !node_->leaf) fail("mutable_data", "only leaf tensors are mutable");
  return node_->data;
}

double Tensor::item() const {
  const Node& n = get(*this, "item");
  if (n.data.size() != 1) fail("item", "tensor of shape " + shape_str(n.shape) + " is not a scalar");
  return n.data[0];
}

double Tensor::operator()(std::size_t row, std::size_t col) const {
  const Node& n = get(*this, "at");
  if (n.shape.size() != 2 || row >= n.shape[0] || col >= n.shape[1]) fail("at", "index out of range");
  return n.data[row * n.shape[1] + col];
}

bool Tensor::requires_grad() const { return defined() && node_->requires_grad; }
bool Tensor::is_leaf() const { return defined() && node_->leaf; }
bool Tensor::has_grad() const { return defined() && !node_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  const Node& n = get(*this, "grad");
  if (n.grad.empty()) fail("grad", "no gradient has been computed for this tensor");
  return n.grad;
}

void Tensor::zero_grad() {
  if (defined()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  const Node& n = get(*this, "detach");
  return constant(n.shape, n.data);
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.node_->requires_grad = is_leaf() && requires_grad();
  return t;
}

// ---------------------------------------------------------------- Tape

Tape::Tape(const Tensor& root) : root_(root) {
  get(root, "Tape");
  std::unordered_set<const Node*> seen;
  struct Frame {
    Node* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{root.node().get(), 0}};
  seen.insert(root.node().get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->inputs.size()) {
      Node* in = f.node->inputs[f.next++].get();
      if (seen.insert(in).second) stack.push_back({in, 0});
    } else {
      order_.push_back(f.node);
      stack.pop_back();
    }
  }
}

void Tape::backward() {
  Node& root = *root_.node();
  if (root.data.size() != 1) {
    fail("backward", "loss must be a scalar, got shape " + shape_str(root.shape));
  }
  for (Node* n : order_) {
    if (!n->requires_grad) continue;
    if (!n->leaf)
      n->grad.assign(n->data.size(), 0.0);
    else if (n->grad.size() != n->data.size())
      n->grad.assign(n->data.size(), 0.0);
  }
  if (!root.requires_grad) return;
  root.grad[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (!n->leaf && n->requires_grad && n->backward) n->backward(*n);
  }
}

std::uint64_t Tape::selection_signature() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  };
  for (const Node* n : order_) {
    mix(n->choices.size());
    for (std::size_t c : n->choices) mix(c);
  }
  return h;
}

void backward(const Tensor& loss) { Tape(loss).backward(); }

// ---------------------------------------------------------------- primitives

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Node& na = get(a, "matmul");
  const Node& nb = get(b, "matmul");
  if (na.shape.size() != 2 || nb.shape.size() != 2 || na.shape[1] != nb.shape[0]) {
    fail("matmul", "cannot multiply " + shape_str(na.shape) + " by " + shape_str(nb.shape));
  }
  const std::size_t m = na.shape[0], k = na.shape[1], n = nb.shape[1];
  std::vector<double> out(m * n, 0.0);
  const double* A = na.data.data();
  const double* B = nb.data.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const double* G = self.grad.data();
    const double* A = self.inputs[0]->data.data();
    const double* B = self.inputs[1]->data.data();
    if (wants(self, 0)) {
      double* dA = grad_of(self, 0).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = B + p * n;
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
          dA[i * k + p] += s;
        }
      }
    }
    if (wants(self, 1)) {
      double* dB = grad_of(self, 1).data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          double* drow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::Mul, "mul"); }

Tensor scalar_mul(const Tensor& a, double s) {
  const Node& na = get(a, "scalar_mul");
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * na.data[i];
  return make_result(na.shape, std::move(out), {a}, [s](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor relu(const Tensor& a) {
  const Node& na = get(a, "relu");
  std::vector<double> out(na.data.size());
  std::vector<std::size_t> mask(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = na.data[i] > 0.0 ? 1 : 0;
    out[i] = mask[i] ? na.data[i] : 0.0;
  }
  Tensor t = make_result(na.shape, std::move(out), {a}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (self.choices[i]) g[i] += self.grad[i];
  });
  t.node()->choices = std::move(mask);
  return t;
}

Tensor sigmoid(const Tensor& a) {
  const Node& na = get(a, "sigmoid");
  static const double lo = std::numeric_limits<double>::denorm_min();
  static const double hi = std::nextafter(1.0, 0.0);
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = na.data[i];
    const double y = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    // Keep outputs strictly inside (0,1) where double rounding would saturate.
    out[i] = std::clamp(y, lo, hi);
  }
  return make_result(na.shape, std::move(out), {a}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.data[i];
      g[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  const Node& na = get(a, "layer_norm");
  if (na.shape.size() != 2) fail("layer_norm", "expected rank 2, got " + shape_str(na.shape));
  if (!(eps > 0.0)) fail("layer_norm", "eps must be positive");
  const std::size_t rows = na.shape[0], cols = na.shape[1];
  std::vector<double> out(na.data.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = na.data.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += x[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (x[c] - mean) * (x[c] - mean);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = (x[c] - mean) * inv_std[r];
  }
  return make_result(na.shape, std::move(out), {a}, [rows, cols, inv_std = std::move(inv_std)](Node& self) {
    auto& g = grad_of(self, 0);
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * cols;
      const double* up = self.grad.data() + r * cols;
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        mean_g += up[c];
        mean_gy += up[c] * y[c];
      }
      mean_g /= n;
      mean_gy /= n;
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += inv_std[r] * (up[c] - mean_g - y[c] * mean_gy);
    }
  });
}

Tensor tanh(const Tensor& a) {
  const Node& na = get(a, "tanh");
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(na.data[i]);
  return make_result(na.shape, std::move(out), {a}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double y = self.data[i];
      g[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail("concat", "no inputs");
  const Shape& first = get(parts[0], "concat").shape;
  if (axis >= first.size()) fail("concat", "axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> lens;
  for (const auto& p : parts) {
    const Shape& s = get(p, "concat").shape;
    if (s.size() != first.size()) fail("concat", "rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != first[d]) {
        fail("concat", "shapes " + shape_str(first) + " and " + shape_str(s) + " differ off the concat axis");
      }
    out_shape[axis] += s[axis];
    lens.push_back(s[axis]);
  }
  const AxisView v = around(out_shape, axis);
  std::vector<double> out(numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& src = parts[pi].node()->data;
    const std::size_t chunk = lens[pi] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy_n(src.data() + o * chunk, chunk, out.data() + o * v.len * v.inner + offset * v.inner);
    }
    offset += lens[pi];
  }
  return make_result(std::move(out_shape), std::move(out), parts, [v, lens](Node& self) {
    std::size_t offset = 0;
    for (std::size_t pi = 0; pi < lens.size(); ++pi) {
      const std::size_t chunk = lens[pi] * v.inner;
      if (wants(self, pi)) {
        auto& g = grad_of(self, pi);
        for (std::size_t o = 0; o < v.outer; ++o) {
          const double* src = self.grad.data() + o * v.len * v.inner + offset * v.inner;
          double* dst = g.data() + o * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      offset += lens[pi];
    }
  });
}

Tensor reduce_max(const Tensor& a, std::size_t axis) {
  const Node& na = get(a, "reduce_max");
  if (axis >= na.shape.size()) fail("reduce_max", "axis out of range for " + shape_str(na.shape));
  if (na.shape[axis] == 0) fail("reduce_max", "empty reduction axis");
  const AxisView v = around(na.shape, axis);
  Shape out_shape = na.shape;
  out_shape[axis] = 1;
  std::vector<double> out(v.outer * v.inner);
  std::vector<std::size_t> arg(out.size());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const double* base = na.data.data() + o * v.len * v.inner + i;
      std::size_t best = 0;
      for (std::size_t l = 1; l < v.len; ++l)
        if (base[l * v.inner] > base[best * v.inner]) best = l;
      out[o * v.inner + i] = base[best * v.inner];
      arg[o * v.inner + i] = best;
    }
  Tensor t = make_result(std::move(out_shape), std::move(out), {a}, [v](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t k = o * v.inner + i;
        g[o * v.len * v.inner + self.choices[k] * v.inner + i] += self.grad[k];
      }
  });
  t.node()->choices = std::move(arg);
  return t;
}

Tensor reduce_mean(const Tensor& a, std::size_t axis) {
  const Node& na = get(a, "reduce_mean");
  if (axis >= na.shape.size()) fail("reduce_mean", "axis out of range for " + shape_str(na.shape));
  if (na.shape[axis] == 0) fail("reduce_mean", "empty reduction axis");
  const AxisView v = around(na.shape, axis);
  Shape out_shape = na.shape;
  out_shape[axis] = 1;
  std::vector<double> out(v.outer * v.inner, 0.0);
  const double inv = 1.0 / static_cast<double>(v.len);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t l = 0; l < v.len; ++l)
      for (std::size_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += na.data[(o * v.len + l) * v.inner + i];
  for (double& x : out) x *= inv;
  return make_result(std::move(out_shape), std::move(out), {a}, [v, inv](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t l = 0; l < v.len; ++l)
        for (std::size_t i = 0; i < v.inner; ++i)
          g[(o * v.len + l) * v.inner + i] += inv * self.grad[o * v.inner + i];
  });
}

Tensor sum(const Tensor& a) {
  const Node& na = get(a, "sum");
  double s = 0.0;
  for (double x : na.data) s += x;
  return make_result({}, {s}, {a}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (double& x : g) x += self.grad[0];
  });
}

Tensor broadcast_repeat(const Tensor& a, std::size_t axis, std::size_t times) {
  const Node& na = get(a, "broadcast_repeat");
  if (axis >= na.shape.size()) fail("broadcast_repeat", "axis out of range for " + shape_str(na.shape));
  if (times == 0) fail("broadcast_repeat", "repeat count must be positive");
  const AxisView v = around(na.shape, axis);
  Shape out_shape = na.shape;
  out_shape[axis] *= times;
  std::vector<double> out(numel(out_shape));
  const std::size_t chunk = v.len * v.inner;
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t t = 0; t < times; ++t)
      std::copy_n(na.data.data() + o * chunk, chunk, out.data() + (o * times + t) * chunk);
  return make_result(std::move(out_shape), std::move(out), {a}, [v, times, chunk](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t t = 0; t < times; ++t) {
        const double* src = self.grad.data() + (o * times + t) * chunk;
        for (std::size_t i = 0; i < chunk; ++i) g[o * chunk + i] += src[i];
      }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> indices) {
  const Node& na = get(a, "gather_rows");
  if (na.shape.empty()) fail("gather_rows", "cannot gather rows of a scalar");
  const std::size_t rows = na.shape[0];
  const std::size_t width = rows == 0 ? 0 : na.data.size() / rows;
  std::vector<double> out;
  out.reserve(indices.size() * width);
  for (std::size_t r : indices) {
    if (r >= rows) {
      fail("gather_rows", "row " + std::to_string(r) + " out of range for " + std::to_string(rows) + " rows");
    }
    out.insert(out.end(), na.data.begin() + static_cast<std::ptrdiff_t>(r * width),
               na.data.begin() + static_cast<std::ptrdiff_t>((r + 1) * width));
  }
  Shape out_shape = na.shape;
  out_shape[0] = indices.size();
  Tensor t = make_result(std::move(out_shape), std::move(out), {a}, [width](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t k = 0; k < self.choices.size(); ++k) {
      const std::size_t r = self.choices[k];
      for (std::size_t c = 0; c < width; ++c) g[r * width + c] += self.grad[k * width + c];
    }
  });
  t.node()->choices.assign(indices.begin(), indices.end());
  return t;
}

Tensor reshape(const Tensor& a, Shape shape) {
  const Node& na = get(a, "reshape");
  if (numel(shape) != na.data.size()) {
    fail("reshape", "cannot reshape " + shape_str(na.shape) + " to " + shape_str(shape));
  }
  return make_result(std::move(shape), na.data, {a}, [](Node& self) {
    auto& g = grad_of(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

std::vector<Vec3> to_points(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() != 2 || s[1] != 3) fail("to_points", "expected shape [N,3], got " + shape_str(s));
  const auto d = t.data();
  std::vector<Vec3> out(s[0]);
  for (std::size_t i = 0; i < s[0]; ++i) out[i] = {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
  return out;
}

Tensor from_points(std::span<const Vec3> pts, bool requires_grad) {
  std::vector<double> d;
  d.reserve(pts.size() * 3);
  for (const auto& p : pts) d.insert(d.end(), p.begin(), p.end());
  return requires_grad ? Tensor::parameter({pts.size(), 3}, std::move(d))
                       : Tensor::constant({pts.size(), 3}, std::move(d));
}

}  // namespace pcc::ad
