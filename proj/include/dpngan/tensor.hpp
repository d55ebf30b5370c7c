#pragma once

// Dense tensors with define-by-run reverse-mode differentiation.
//
// Every operation produces a new immutable tensor. When gradient recording is
// enabled and at least one input requires a gradient, the result keeps handles
// to its inputs together with a backward rule; `backward()` rebuilds the tape
// from those links, orders it topologically and visits each node once.
//
// Values are stored as 64-bit reals. A tape is confined to a single thread.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace dpngan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;

  bool is_leaf() const { return inputs.empty(); }
  // Zero-initialised on first use.
  std::span<double> grad_buffer();
  // Gradient buffer of input `i`, or an empty span when that input does not
  // take part in differentiation.
  std::span<double> input_grad(std::size_t i);
  std::span<const double> input_value(std::size_t i) const { return inputs[i]->value; }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  // Only leaves may be written in place (parameters, optimizer updates).
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same values, no tape history.
  Tensor detach() const;
  // Deep copy of values into a fresh leaf with the same requires-grad flag.
  Tensor clone() const;

  const char* op() const;
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Thread-local switch for gradient recording.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Records a primitive application. `values` must hold shape_numel(shape)
// finite numbers; the backward rule reads `self.grad` and accumulates into
// `self.input_grad(i)`.
Tensor record(const char* op, Shape shape, std::vector<double> values,
              std::initializer_list<Tensor> inputs, detail::BackwardFn backward);
Tensor record(const char* op, Shape shape, std::vector<double> values,
              const std::vector<Tensor>& inputs, detail::BackwardFn backward);

// Topologically ordered view of every node reachable from a root.
class Tape {
 public:
  static Tape from_root(const Tensor& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<detail::Node*>& order() const { return order_; }
  // Seeds d(root)/d(root)=1 and visits the nodes in reverse order.
  void run_backward();

 private:
  std::vector<detail::Node*> order_;
};

// Accumulates d(loss)/d(leaf) into every reachable leaf requiring a gradient.
void backward(const Tensor& loss);

// Test hook: multiplies the output gradient seen by the named op's backward
// rule by `factor`. Pass nullptr to clear.
void set_corrupted_backward(const char* op, double factor = 1.5);

// --- elementwise and structural primitives ---------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor add_n(const std::vector<Tensor>& terms);

Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor silu(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// sum(a * b) as a scalar.
Tensor dot(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis = 0);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor pad_zeros(const Tensor& a, std::size_t axis, std::size_t before, std::size_t after);
// [C] -> [C, length], each row constant.
Tensor broadcast_columns(const Tensor& v, std::size_t length);

}  // namespace dpngan
