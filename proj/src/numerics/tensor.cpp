#include "sbbts/numerics/tensor.hpp"

#include <unordered_set>
#include <utility>

#include "sbbts/errors.hpp"

namespace sbbts::numerics {

namespace {
thread_local bool t_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor() : node_(std::make_shared<detail::Node>()) { node_->shape = {0}; }

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("Tensor: shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw DimensionError("Tensor::dim: axis out of range for " + shape_str(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::rows() const {
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < rank(); ++i) r *= node_->shape[i];
  return r;
}

std::size_t Tensor::cols() const { return rank() == 0 ? 1 : node_->shape.back(); }

double Tensor::item() const {
  if (numel() != 1) throw ContractError("Tensor::item: tensor " + shape_str(shape()) + " is not a scalar");
  return node_->data[0];
}

std::span<const double> Tensor::grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0);
  return node_->grad;
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data, false); }

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(this->shape()) + " as " + shape_str(shape));
  }
  return from_op(std::move(shape), node_->data, {*this}, [](detail::Node& out) {
    auto& g = out.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
  });
}

Tensor Tensor::from_op(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                       std::function<void(detail::Node&)> backward) {
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (t_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& in : inputs) node->parents.push_back(in.node_);
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) {
    throw ContractError("backward: loss does not depend on any tensor requiring gradients");
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      detail::Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  // Interior nodes start from zero on every sweep; leaves accumulate.
  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->data.size(), 0.0);
  }
  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

}  // namespace sbbts::numerics
