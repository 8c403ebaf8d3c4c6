#pragma once

#include <vector>

#include "llvd/tape.hpp"
#include "llvd/tensor.hpp"

// The differentiable operation set: 2-D convolutions, their transposes,
// pixel shuffle/unshuffle, pointwise arithmetic and activations, channel
// concat/slice, reshape, and full reductions. Every op works untaped as a
// plain forward computation; when an operand is bound to a tape the op
// records a backward rule and binds its output to the same tape.
//
// Convolution semantics are cross-correlation (no kernel flip) with zero
// padding. conv2d weights are [Cout, Cin, k, k]; conv2d_transpose weights
// are [Cin, Cout, k, k], so a transpose applied with a conv's weight
// tensor is that conv's exact adjoint.

namespace llvd::ops {

/// input [N,Cin,H,W], weight [Cout,Cin,k,k], bias [Cout] or empty.
/// H' = floor((H + 2*padding - k) / stride) + 1.
template <typename S>
TensorT<S> conv2d(const TensorT<S>& input, const TensorT<S>& weight,
                  const TensorT<S>& bias, int stride, int padding);

/// input [N,Cin,H,W], weight [Cin,Cout,k,k], bias [Cout] or empty.
/// H'' = (H-1)*stride - 2*padding + k + output_padding.
template <typename S>
TensorT<S> conv2d_transpose(const TensorT<S>& input, const TensorT<S>& weight,
                            const TensorT<S>& bias, int stride, int padding,
                            int output_padding = 0);

/// [N,C,H,W] -> [N,C*r*r,H/r,W/r]; out channel of (c, dy, dx) is
/// c*r*r + dy*r + dx. Pure rearrangement, zero arithmetic.
template <typename S>
TensorT<S> pixel_unshuffle(const TensorT<S>& input, int r);

/// [N,C,H,W] -> [N,C/(r*r),H*r,W*r]; exact inverse of pixel_unshuffle.
template <typename S>
TensorT<S> pixel_shuffle(const TensorT<S>& input, int r);

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b);
template <typename S>
TensorT<S> divide(const TensorT<S>& a, const TensorT<S>& b);

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x);
template <typename S>
TensorT<S> tanh(const TensorT<S>& x);
/// Subgradient 0 at 0.
template <typename S>
TensorT<S> relu(const TensorT<S>& x);
/// Subgradient 0 at 0.
template <typename S>
TensorT<S> abs(const TensorT<S>& x);

template <typename S>
TensorT<S> scale(const TensorT<S>& x, S factor);
template <typename S>
TensorT<S> add_scalar(const TensorT<S>& x, S value);

/// Operands must share N, H, W; channels are stacked in argument order.
template <typename S>
TensorT<S> concat_channels(const std::vector<TensorT<S>>& parts);
template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b);

/// Channels [start, start+count) of a [N,C,H,W] tensor.
template <typename S>
TensorT<S> slice_channels(const TensorT<S>& x, int64_t start, int64_t count);

/// Same element count, new extents; row-major order preserved.
template <typename S>
TensorT<S> reshape(const TensorT<S>& x, std::vector<int64_t> dims);

/// Scalar [1] tensors. Reductions accumulate in double regardless of S.
template <typename S>
TensorT<S> sum(const TensorT<S>& x);
template <typename S>
TensorT<S> mean(const TensorT<S>& x);

}  // namespace llvd::ops
