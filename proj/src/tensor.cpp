#include "dpngan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "dpngan/error.hpp"

namespace dpngan {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

std::span<double> Node::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

std::span<double> Node::input_grad(std::size_t i) {
  auto& in = inputs[i];
  if (!in || !in->requires_grad) return {};
  return in->grad_buffer();
}

}  // namespace detail

namespace {

thread_local bool g_grad_enabled = true;
const char* g_corrupted_op = nullptr;
double g_corruption_factor = 1.0;

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values) {
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                     shape_str(shape));
  }
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  return node;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

// Splits `shape` around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return record(op, x.shape(), std::move(out), {x}, [df](detail::Node& self) {
    auto gx = self.input_grad(0);
    if (gx.empty()) return;
    auto xv = self.input_value(0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i] * df(xv[i], self.value[i]);
  });
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : node_(make_leaf(shape, std::vector<double>(shape_numel(shape), fill))) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : node_(make_leaf(std::move(shape), std::move(values))) {}

Tensor Tensor::scalar(double v) { return Tensor(Shape{1}, std::vector<double>{v}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape s{values.size()};
  return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

const Shape& Tensor::shape() const {
  static const Shape empty;
  return node_ ? node_->shape : empty;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= rank()) throw ShapeError("extent: axis out of range for " + shape_str(shape()));
  return shape()[axis];
}

std::size_t Tensor::numel() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const {
  if (!node_) return {};
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  if (!node_) throw Error("mutable_values on an undefined tensor");
  if (!node_->is_leaf()) throw Error("mutable_values on a non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!node_) throw Error("set_requires_grad on an undefined tensor");
  if (!node_->is_leaf()) throw Error("set_requires_grad on a non-leaf tensor");
  node_->requires_grad = on;
  return *this;
}

std::span<const double> Tensor::grad() const {
  if (!node_) return {};
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  if (!node_) throw Error("mutable_grad on an undefined tensor");
  return node_->grad_buffer();
}

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto leaf = std::make_shared<detail::Node>();
  leaf->shape = shape();
  leaf->value = node_->value;
  return Tensor(std::move(leaf));
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.node_->requires_grad = requires_grad();
  return t;
}

const char* Tensor::op() const { return node_ ? node_->op : "undefined"; }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_corrupted_backward(const char* op, double factor) {
  g_corrupted_op = op;
  g_corruption_factor = factor;
}

Tensor record(const char* op, Shape shape, std::vector<double> values,
              std::initializer_list<Tensor> inputs, detail::BackwardFn backward) {
  return record(op, std::move(shape), std::move(values), std::vector<Tensor>(inputs),
                std::move(backward));
}

Tensor record(const char* op, Shape shape, std::vector<double> values,
              const std::vector<Tensor>& inputs, detail::BackwardFn backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite value in result");
  }
  auto node = make_leaf(std::move(shape), std::move(values));
  node->op = op;
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    if (g_corrupted_op != nullptr && std::strcmp(g_corrupted_op, op) == 0) {
      const double factor = g_corruption_factor;
      node->backward = [inner = std::move(backward), factor](detail::Node& self) {
        auto saved = self.grad;
        for (auto& g : self.grad) g *= factor;
        inner(self);
        self.grad = std::move(saved);
      };
    } else {
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

Tape Tape::from_root(const Tensor& root) {
  Tape tape;
  if (!root.defined()) return tape;
  // Iterative post-order DFS; 1 = on stack, 2 = emitted.
  std::unordered_map<const detail::Node*, int> state;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  state[root.node().get()] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node* child = node->inputs[next++].get();
      if (child == nullptr || !child->requires_grad) continue;
      auto it = state.find(child);
      if (it == state.end()) {
        state[child] = 1;
        stack.emplace_back(child, 0);
      } else if (it->second == 1) {
        throw Error("tape: cycle detected at op " + std::string(child->op));
      }
    } else {
      state[node] = 2;
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  return tape;
}

void Tape::run_backward() {
  if (order_.empty()) return;
  for (auto* node : order_) {
    if (!node->is_leaf()) node->grad.clear();
  }
  auto* root = order_.back();
  root->grad_buffer()[0] += 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf() || !node->backward) continue;
    if (node->grad.empty()) continue;  // nothing flowed here
    node->backward(*node);
  }
  for (auto* node : order_) {
    if (!node->is_leaf()) continue;
    for (double g : node->grad) {
      if (!std::isfinite(g)) throw NumericError("backward: non-finite gradient");
    }
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw Error("backward: undefined loss");
  if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;
  Tape::from_root(loss).run_backward();
}

// --- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return record("add", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      auto g = self.input_grad(k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return record("sub", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto ga = self.input_grad(0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
    auto gb = self.input_grad(1);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return record("mul", a.shape(), std::move(out), {a, b}, [](detail::Node& self) {
    auto av = self.input_value(0), bv = self.input_value(1);
    auto ga = self.input_grad(0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * bv[i];
    auto gb = self.input_grad(1);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += self.grad[i] * av[i];
  });
}

Tensor scale(const Tensor& a, double s) {
  return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor add_n(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw ShapeError("add_n: no terms");
  for (const auto& t : terms) require_same_shape("add_n", terms.front(), t);
  std::vector<double> out(terms.front().numel(), 0.0);
  for (const auto& t : terms) {
    auto v = t.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return record("add_n", terms.front().shape(), std::move(out), terms, [](detail::Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto g = self.input_grad(k);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor tanh(const Tensor& a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor silu(const Tensor& a) {
  return unary(
      "silu", a, [](double x) { return x / (1.0 + std::exp(-x)); },
      [](double x, double) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor sum(const Tensor& a) {
  auto v = a.values();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return record("sum", Shape{1}, {total}, {a}, [](detail::Node& self) {
    auto g = self.input_grad(0);
    for (auto& gi : g) gi += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  auto v = a.values();
  const double n = static_cast<double>(v.size());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return record("mean", Shape{1}, {total / n}, {a}, [n](detail::Node& self) {
    auto g = self.input_grad(0);
    for (auto& gi : g) gi += self.grad[0] / n;
  });
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape("dot", a, b);
  auto av = a.values(), bv = b.values();
  double total = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * bv[i];
  return record("dot", Shape{1}, {total}, {a, b}, [](detail::Node& self) {
    auto av = self.input_value(0), bv = self.input_value(1);
    const double g0 = self.grad[0];
    auto ga = self.input_grad(0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0 * bv[i];
    auto gb = self.input_grad(1);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g0 * av[i];
  });
}

// --- structural ------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  auto v = a.values();
  return record("reshape", std::move(shape), std::vector<double>(v.begin(), v.end()), {a},
                [](detail::Node& self) {
                  auto g = self.input_grad(0);
                  for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                });
}

Tensor flatten(const Tensor& a) { return reshape(a, Shape{a.numel()}); }

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == axis) || s[i] == first[i];
    if (!ok) throw ShapeError("concat: incompatible shapes " + shape_str(first) + " and " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_at(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const AxisSplit ps = split_at(p.shape(), axis);
    auto v = p.values();
    for (std::size_t o = 0; o < ps.outer; ++o) {
      std::copy_n(v.begin() + o * ps.extent * ps.inner, ps.extent * ps.inner,
                  out.begin() + (o * os.extent + offset) * os.inner);
    }
    offset += ps.extent;
  }
  return record("concat", out_shape, std::move(out), parts, [axis, offsets, os](detail::Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      auto g = self.input_grad(k);
      if (g.empty()) continue;
      const AxisSplit ps = split_at(self.inputs[k]->shape, axis);
      for (std::size_t o = 0; o < ps.outer; ++o) {
        const double* src = self.grad.data() + (o * os.extent + offsets[k]) * os.inner;
        double* dst = g.data() + o * ps.extent * ps.inner;
        for (std::size_t i = 0; i < ps.extent * ps.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_at(a.shape(), axis);
  if (length == 0 || start + length > s.extent) {
    throw ShapeError("slice: [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside extent " + std::to_string(s.extent));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  auto v = a.values();
  std::vector<double> out(shape_numel(out_shape));
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(v.begin() + (o * s.extent + start) * s.inner, length * s.inner,
                out.begin() + o * length * s.inner);
  }
  return record("slice", out_shape, std::move(out), {a}, [s, start, length](detail::Node& self) {
    auto g = self.input_grad(0);
    if (g.empty()) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = self.grad.data() + o * length * s.inner;
      double* dst = g.data() + (o * s.extent + start) * s.inner;
      for (std::size_t i = 0; i < length * s.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor pad_zeros(const Tensor& a, std::size_t axis, std::size_t before, std::size_t after) {
  const AxisSplit s = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = s.extent + before + after;
  const std::size_t ext = out_shape[axis];
  auto v = a.values();
  std::vector<double> out(shape_numel(out_shape), 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(v.begin() + o * s.extent * s.inner, s.extent * s.inner,
                out.begin() + (o * ext + before) * s.inner);
  }
  return record("pad_zeros", out_shape, std::move(out), {a}, [s, ext, before](detail::Node& self) {
    auto g = self.input_grad(0);
    if (g.empty()) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* src = self.grad.data() + (o * ext + before) * s.inner;
      double* dst = g.data() + o * s.extent * s.inner;
      for (std::size_t i = 0; i < s.extent * s.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor broadcast_columns(const Tensor& v, std::size_t length) {
  if (v.rank() != 1) throw ShapeError("broadcast_columns: expected rank-1 input, got " + shape_str(v.shape()));
  if (length == 0) throw ShapeError("broadcast_columns: zero length");
  const std::size_t c = v.numel();
  auto vv = v.values();
  std::vector<double> out(c * length);
  for (std::size_t i = 0; i < c; ++i) std::fill_n(out.begin() + i * length, length, vv[i]);
  return record("broadcast_columns", Shape{c, length}, std::move(out), {v}, [c, length](detail::Node& self) {
    auto g = self.input_grad(0);
    for (std::size_t i = 0; i < g.size() && i < c; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < length; ++t) acc += self.grad[i * length + t];
      g[i] += acc;
    }
  });
}

}  // namespace dpngan
