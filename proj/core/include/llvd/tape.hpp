#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "llvd/tensor.hpp"

namespace llvd {

/// Gradients produced by one backward pass, keyed by the tape node of each
/// watched leaf. Leaves that never joined the recorded graph are absent.
template <typename S>
class GradientMap {
 public:
  bool contains(const TensorT<S>& leaf) const {
    return leaf.node >= 0 && grads_.count(leaf.node) > 0;
  }
  const TensorT<S>& at(const TensorT<S>& leaf) const {
    auto it = grads_.find(leaf.node);
    if (it == grads_.end()) throw ValueError("GradientMap: leaf not on tape");
    return it->second;
  }
  size_t size() const { return grads_.size(); }

  void insert(int32_t node, TensorT<S> grad) { grads_.emplace(node, std::move(grad)); }

 private:
  std::unordered_map<int32_t, TensorT<S>> grads_;
};

/// Ordered record of executed differentiable operations. Each recorded node
/// owns a closure that maps the node's output gradient onto its parents.
/// Creation order is topological by construction, so one reverse sweep
/// propagates every gradient. A tape belongs to one logical execution
/// stream; concurrent forward passes use independent tapes.
template <typename S>
class Tape {
 public:
  using BackwardFn = std::function<void(const std::vector<S>& out_grad, Tape<S>& tape)>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf (parameter or input) so backward() can report its
  /// gradient. Watching twice in the same epoch reuses the node.
  int32_t watch(TensorT<S>& t);

  /// Records an operation node; `backward` receives the node's output
  /// gradient and accumulates into parent nodes via accumulate().
  int32_t record(int64_t out_numel, BackwardFn backward);

  /// Adds `grad` into the gradient buffer of `node`.
  void accumulate(int32_t node, const std::vector<S>& grad);
  void accumulate(int32_t node, const S* grad, int64_t n);

  /// Reverse-mode sweep from a scalar loss. Returns one gradient per watched
  /// leaf that participated in the graph, then resets the tape.
  GradientMap<S> backward(const TensorT<S>& loss);

  void reset();

  uint64_t epoch() const { return epoch_; }
  size_t size() const { return nodes_.size(); }

  /// True when `t` is bound to this tape in the current recording epoch.
  bool bound(const TensorT<S>& t) const {
    return t.tape == this && t.tape_epoch == epoch_ && t.node >= 0;
  }

 private:
  struct Node {
    int64_t numel = 0;
    bool is_leaf = false;
    std::vector<int64_t> leaf_dims;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<S>> grads_;  // parallel to nodes_, empty until touched
  // Epochs are process-unique, never per-tape: a tensor bound to a
  // destroyed tape must not look bound to a new tape that happens to live
  // at the same address.
  uint64_t epoch_ = 0;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace llvd
