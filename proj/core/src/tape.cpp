#include "llvd/tape.hpp"

#include <atomic>

namespace llvd {

namespace {

// Shared across scalar types: uniqueness is all that matters.
uint64_t next_epoch() {
  static std::atomic<uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

template <typename S>
Tape<S>::Tape() : epoch_(next_epoch()) {}

template <typename S>
int32_t Tape<S>::watch(TensorT<S>& t) {
  if (t.empty()) throw ValueError("Tape::watch: empty tensor");
  if (bound(t)) return t.node;
  Node node;
  node.numel = t.numel();
  node.is_leaf = true;
  node.leaf_dims = t.dims;
  nodes_.push_back(std::move(node));
  grads_.emplace_back();
  t.tape = this;
  t.tape_epoch = epoch_;
  t.node = static_cast<int32_t>(nodes_.size() - 1);
  return t.node;
}

template <typename S>
int32_t Tape<S>::record(int64_t out_numel, BackwardFn backward) {
  Node node;
  node.numel = out_numel;
  node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  grads_.emplace_back();
  return static_cast<int32_t>(nodes_.size() - 1);
}

template <typename S>
void Tape<S>::accumulate(int32_t node, const S* grad, int64_t n) {
  auto& buf = grads_[node];
  if (buf.empty()) buf.assign(nodes_[node].numel, S(0));
  for (int64_t i = 0; i < n; ++i) buf[i] += grad[i];
}

template <typename S>
void Tape<S>::accumulate(int32_t node, const std::vector<S>& grad) {
  accumulate(node, grad.data(), static_cast<int64_t>(grad.size()));
}

template <typename S>
GradientMap<S> Tape<S>::backward(const TensorT<S>& loss) {
  if (!bound(loss)) throw ValueError("Tape::backward: loss was not produced on this tape");
  if (loss.numel() != 1) {
    throw ShapeError("Tape::backward: loss must be scalar, got " + shape_str(loss.dims));
  }
  grads_[loss.node].assign(1, S(1));

  for (int32_t i = static_cast<int32_t>(nodes_.size()) - 1; i >= 0; --i) {
    if (grads_[i].empty()) continue;  // node did not influence the loss
    if (nodes_[i].backward) nodes_[i].backward(grads_[i], *this);
  }

  GradientMap<S> out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_leaf || grads_[i].empty()) continue;
    out.insert(static_cast<int32_t>(i),
               TensorT<S>::from(nodes_[i].leaf_dims, std::move(grads_[i])));
  }
  reset();
  return out;
}

template <typename S>
void Tape<S>::reset() {
  nodes_.clear();
  grads_.clear();
  epoch_ = next_epoch();
}

template class Tape<float>;
template class Tape<double>;

}  // namespace llvd
