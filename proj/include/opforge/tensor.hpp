#pragma once

// Dense float64 tensors that record a reverse-mode graph while ops run.
//
// Every op in ops.hpp returns a fresh Tensor. When any input requires a
// gradient the result keeps shared references to its inputs plus a closure
// that propagates its gradient back; backward() walks that graph once in
// reverse topological order and then drops it.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace opforge {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::span<double> grad_buffer();
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const { return shape().at(i); }
  std::size_t size() const;

  std::span<const double> values() const;
  // Writable access is meant for leaves (parameters, data); writing into an
  // interior node invalidates the recorded graph.
  std::span<double> values_mut();
  double item() const;
  double at(std::size_t flat) const { return values()[flat]; }

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> grad_mut();
  void zero_grad();

  // Copy of the values with no graph attached.
  Tensor detach() const;
  Tensor reshape(Shape shape) const;

  // Internal: op implementations build nodes directly.
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Accumulates d(root)/d(leaf) into every reachable leaf. The root must hold a
// single element. Without retain_graph the graph is released afterwards.
void backward(const Tensor& root, bool retain_graph = false);

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

// Creates the output node of an op. Records inputs and the backward closure
// only when grad mode is on and some input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward);

}  // namespace detail

}  // namespace opforge
