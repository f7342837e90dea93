#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "sdmtl/tensor.hpp"

namespace sdmtl {

class Tape;

/// Handle to a node on a Tape.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Append-only record of a forward computation. Nodes are stored in
/// execution order, so every node's inputs precede it and a reverse sweep
/// is a valid topological order for backpropagation.
///
/// The tape is rebuilt per forward pass (define-by-run). Single-threaded;
/// run concurrent forwards on separate tapes.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int node_id)>;

  Value leaf(Tensor value);
  Value emit(Tensor value, std::vector<int> inputs, BackwardFn back);

  const Tensor& value(Value v) const { return node(v.id).value; }

  /// Gradient of the last backward() target w.r.t. this node. Nodes the
  /// loss does not reach report all zeros.
  Tensor grad(Value v) const;

  /// Accumulates the loss gradient into every reachable node. The loss
  /// must be scalar (all dims 1).
  void backward(Value loss);

  int size() const { return static_cast<int>(nodes_.size()); }

  // Backward-kernel support: zero-initialized accumulation slot.
  Tensor& grad_slot(int id);
  bool grad_set(int id) const { return node(id).grad_set; }
  const Tensor& node_value(int id) const { return node(id).value; }
  const Tensor& node_grad(int id) const;
  const std::vector<int>& node_inputs(int id) const { return node(id).inputs; }

 private:
  struct Node {
    Tensor value;
    std::vector<int> inputs;
    BackwardFn back;
    Tensor grad;
    bool grad_set = false;
  };

  Node& node(int id);
  const Node& node(int id) const;

  std::vector<Node> nodes_;
};

/// Maps parameter tensors to tape leaves, one leaf per tensor per tape, so
/// gradients accumulate in a single slot. The mapping is keyed by address:
/// parameters must outlive the binder.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(&tape) {}

  /// Leaf for this tensor, created on first use.
  Value operator()(const Tensor& t);

  /// Bound leaf, or an invalid Value when the tensor never entered the graph.
  Value find(const Tensor& t) const;

  /// Gradient for the tensor after backward(); zeros when unbound or unreached.
  Tensor grad_of(const Tensor& t) const;

  Tape& tape() { return *tape_; }

 private:
  Tape* tape_;
  std::unordered_map<const Tensor*, Value> bound_;
};

}  // namespace sdmtl
