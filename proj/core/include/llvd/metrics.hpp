#pragma once

#include <vector>

#include "llvd/tensor.hpp"

// Image quality metrics and the training loss. PSNR variants are plain
// double-valued measurements; ssim() and composite_loss() are built from
// the differentiable op set so they can sit on a tape.

namespace llvd {

/// Mean squared error over all elements, accumulated in double.
double mse(const Tensor& a, const Tensor& b);

/// 10*log10(peak^2 / MSE); +infinity when the inputs are identical.
double psnr(const Tensor& pred, const Tensor& target, double peak = 1.0);

/// Sequence PSNR from the MSE pooled over every frame, which is the metric
/// commonly reported for video: frames are weighted by pixel count rather
/// than averaged as per-frame decibels.
double psnr_sequence(const std::vector<Tensor>& pred, const std::vector<Tensor>& target,
                     double peak = 1.0);

/// Per-frame PSNR of two equally long frame lists.
std::vector<double> psnr_per_frame(const std::vector<Tensor>& pred,
                                   const std::vector<Tensor>& target, double peak = 1.0);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Mean structural similarity of two [N,C,H,W] tensors as a scalar tensor.
/// Local statistics come from a Gaussian window applied per channel with no
/// padding (the map covers valid positions only). Differentiable: when the
/// inputs are taped the result participates in backward().
template <typename S>
TensorT<S> ssim(const TensorT<S>& pred, const TensorT<S>& target,
                const SsimOptions& opt = {});

struct LossOptions {
  double lambda_l1 = 0.1;    // weight of the mean absolute error term
  double lambda_ssim = 0.01; // weight of the (1 - SSIM) term
  SsimOptions ssim;
};

/// MSE + lambda_l1 * MAE + lambda_ssim * (1 - SSIM), each term a mean over
/// all elements. The SSIM term is dropped for inputs smaller than the SSIM
/// window (it would have no valid positions).
template <typename S>
TensorT<S> composite_loss(const TensorT<S>& pred, const TensorT<S>& target,
                          const LossOptions& opt = {});

}  // namespace llvd
