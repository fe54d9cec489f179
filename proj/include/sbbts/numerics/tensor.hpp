#pragma once

// Dense float64 tensor with a dynamic reverse-mode graph.
//
// Every op result keeps shared references to its inputs together with a
// closure that pushes the output gradient back to them. Calling backward()
// on a scalar walks that graph in reverse topological order. Graph recording
// is switched off on the current thread while a NoGradGuard is alive.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sbbts::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulated into
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node_->data.size(); }
  /// Product of all extents except the last one.
  std::size_t rows() const;
  /// Last extent.
  std::size_t cols() const;

  std::span<const double> data() const { return node_->data; }
  std::span<double> mutable_data() { return node_->data; }
  double item() const;
  double operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; zeros when nothing has been accumulated yet.
  std::span<const double> grad() const;
  void zero_grad() { node_->grad.clear(); }

  /// Copy of the values with no graph history.
  Tensor detach() const;
  Tensor reshape(Shape shape) const;

  /// Reverse-mode sweep from this scalar.
  void backward() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }

  /// Builds an op result. The closure receives the output node whose grad is
  /// populated and must accumulate into the parents' grad buffers.
  static Tensor from_op(Shape shape, std::vector<double> data,
                        std::vector<Tensor> inputs,
                        std::function<void(detail::Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// True unless a NoGradGuard is active on this thread.
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

}  // namespace sbbts::numerics
