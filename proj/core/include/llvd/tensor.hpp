#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "llvd/errors.hpp"

namespace llvd {

template <typename S>
class Tape;

/// Dense row-major N-dimensional array. 4-D values use the (N, C, H, W)
/// dimension order; lower ranks are allowed. Values are immutable once a
/// tensor has entered a computation; the optimizer mutates parameter
/// buffers in place from a single stream.
///
/// The tape/node fields are autodiff bookkeeping: they are set when a
/// tensor is watched as a leaf or produced by a recorded operation, and
/// are ignored when the recording epoch no longer matches the tape.
template <typename S>
struct TensorT {
  std::vector<int64_t> dims;
  std::shared_ptr<std::vector<S>> values;
  bool requires_grad = false;

  Tape<S>* tape = nullptr;
  int32_t node = -1;
  uint64_t tape_epoch = 0;

  TensorT() = default;

  static TensorT zeros(std::vector<int64_t> dims);
  static TensorT full(std::vector<int64_t> dims, S value);
  static TensorT from(std::vector<int64_t> dims, std::vector<S> data);

  int64_t numel() const;
  int rank() const { return static_cast<int>(dims.size()); }
  bool empty() const { return !values; }

  S* data() { return values->data(); }
  const S* data() const { return values->data(); }

  // 4-D accessors (N, C, H, W).
  S& at4(int64_t n, int64_t c, int64_t h, int64_t w);
  S at4(int64_t n, int64_t c, int64_t h, int64_t w) const;

  /// Deep copy of the value buffer; autodiff bookkeeping is not carried over.
  TensorT clone() const;

  bool same_shape(const TensorT& other) const { return dims == other.dims; }
  bool all_finite() const;
};

using Tensor = TensorT<float>;

int64_t shape_numel(const std::vector<int64_t>& dims);
std::string shape_str(const std::vector<int64_t>& dims);

/// Throws ShapeError naming both shapes unless they match.
template <typename S>
void require_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op);

template <typename S>
TensorT<double> to_double(const TensorT<S>& t);
template <typename S>
TensorT<float> to_float(const TensorT<S>& t);

/// Stacks rank-3 [C,H,W] tensors into one [N,C,H,W] batch. Plain data
/// plumbing, never recorded on a tape.
template <typename S>
TensorT<S> stack_batch(const std::vector<TensorT<S>>& items);

/// Splits a [N,C,H,W] batch back into N rank-3 [C,H,W] tensors.
template <typename S>
std::vector<TensorT<S>> unstack_batch(const TensorT<S>& batch);

}  // namespace llvd
