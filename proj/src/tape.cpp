#include "sdmtl/tape.hpp"

#include <utility>

namespace sdmtl {

Tape::Node& Tape::node(int id) {
  if (id < 0 || id >= size()) {
    throw ContractError("tape node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const Tape::Node& Tape::node(int id) const {
  if (id < 0 || id >= size()) {
    throw ContractError("tape node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

Value Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, Tensor(), false});
  return Value{size() - 1};
}

Value Tape::emit(Tensor value, std::vector<int> inputs, BackwardFn back) {
  for (int in : inputs) {
    if (in < 0 || in >= size()) {
      throw ContractError("tape input id " + std::to_string(in) + " does not precede its node");
    }
  }
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(back), Tensor(), false});
  return Value{size() - 1};
}

Tensor& Tape::grad_slot(int id) {
  Node& n = node(id);
  if (!n.grad_set) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_set = true;
  }
  return n.grad;
}

const Tensor& Tape::node_grad(int id) const {
  const Node& n = node(id);
  if (!n.grad_set) {
    throw ContractError("node " + std::to_string(id) + " has no gradient");
  }
  return n.grad;
}

Tensor Tape::grad(Value v) const {
  const Node& n = node(v.id);
  if (!n.grad_set) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::backward(Value loss) {
  const Node& ln = node(loss.id);
  if (!ln.value.shape().is_scalar()) {
    throw ContractError("backward target must be scalar, got " + shape_str(ln.value.shape()));
  }
  grad_slot(loss.id)[0] = 1.0f;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad_set || !n.back) continue;
    n.back(*this, id);
  }
}

Value Binder::operator()(const Tensor& t) {
  auto it = bound_.find(&t);
  if (it != bound_.end()) return it->second;
  Value v = tape_->leaf(t);
  bound_.emplace(&t, v);
  return v;
}

Value Binder::find(const Tensor& t) const {
  auto it = bound_.find(&t);
  return it == bound_.end() ? Value{} : it->second;
}

Tensor Binder::grad_of(const Tensor& t) const {
  Value v = find(t);
  if (!v.valid()) return Tensor::zeros(t.shape());
  return tape_->grad(v);
}

}  // namespace sdmtl
