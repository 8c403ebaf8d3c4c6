#include "llvd/metrics.hpp"

#include <cmath>
#include <limits>

#include "llvd/ops.hpp"

namespace llvd {

namespace {

double sum_sq_diff(const Tensor& a, const Tensor& b) {
  double acc = 0;
  const float* pa = a.data();
  const float* pb = b.data();
  const int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    acc += d * d;
  }
  return acc;
}

double psnr_from_mse(double m, double peak) {
  if (m <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / m);
}

template <typename S>
TensorT<S> gaussian_window(int w, double sigma) {
  std::vector<double> g(w);
  const double c = (w - 1) / 2.0;
  double norm = 0;
  for (int i = 0; i < w; ++i) {
    g[i] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    norm += g[i];
  }
  std::vector<S> vals(static_cast<size_t>(w) * w);
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < w; ++j) {
      vals[i * w + j] = static_cast<S>(g[i] * g[j] / (norm * norm));
    }
  }
  return TensorT<S>::from({1, 1, w, w}, std::move(vals));
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  return sum_sq_diff(a, b) / static_cast<double>(a.numel());
}

double psnr(const Tensor& pred, const Tensor& target, double peak) {
  return psnr_from_mse(mse(pred, target), peak);
}

double psnr_sequence(const std::vector<Tensor>& pred, const std::vector<Tensor>& target,
                     double peak) {
  if (pred.size() != target.size()) {
    throw ShapeError("psnr_sequence: " + std::to_string(pred.size()) + " frames vs " +
                     std::to_string(target.size()));
  }
  if (pred.empty()) throw ValueError("psnr_sequence: no frames");
  double acc = 0;
  int64_t count = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    require_same_shape(pred[i], target[i], "psnr_sequence");
    acc += sum_sq_diff(pred[i], target[i]);
    count += pred[i].numel();
  }
  return psnr_from_mse(acc / static_cast<double>(count), peak);
}

std::vector<double> psnr_per_frame(const std::vector<Tensor>& pred,
                                   const std::vector<Tensor>& target, double peak) {
  if (pred.size() != target.size()) {
    throw ShapeError("psnr_per_frame: " + std::to_string(pred.size()) + " frames vs " +
                     std::to_string(target.size()));
  }
  std::vector<double> out;
  out.reserve(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) out.push_back(psnr(pred[i], target[i], peak));
  return out;
}

template <typename S>
TensorT<S> ssim(const TensorT<S>& pred, const TensorT<S>& target, const SsimOptions& opt) {
  require_same_shape(pred, target, "ssim");
  if (pred.rank() != 4) {
    throw ShapeError("ssim: inputs must be [N,C,H,W], got " + shape_str(pred.dims));
  }
  const int64_t n = pred.dims[0], c = pred.dims[1], h = pred.dims[2], w = pred.dims[3];
  if (h < opt.window || w < opt.window) {
    throw ShapeError("ssim: input " + shape_str({h, w}) + " is smaller than the " +
                     std::to_string(opt.window) + "x" + std::to_string(opt.window) + " window");
  }
  const S c1 = static_cast<S>((opt.k1 * opt.peak) * (opt.k1 * opt.peak));
  const S c2 = static_cast<S>((opt.k2 * opt.peak) * (opt.k2 * opt.peak));

  // Fold channels into the batch so the single-channel Gaussian window
  // filters each channel independently.
  auto x = ops::reshape(pred, {n * c, 1, h, w});
  auto y = ops::reshape(target, {n * c, 1, h, w});
  auto win = gaussian_window<S>(opt.window, opt.sigma);
  const TensorT<S> no_bias;

  auto mu_x = ops::conv2d(x, win, no_bias, 1, 0);
  auto mu_y = ops::conv2d(y, win, no_bias, 1, 0);
  auto mu_xx = ops::mul(mu_x, mu_x);
  auto mu_yy = ops::mul(mu_y, mu_y);
  auto mu_xy = ops::mul(mu_x, mu_y);

  // Windowed second moments minus the squared means: local (co)variances.
  auto var_x = ops::sub(ops::conv2d(ops::mul(x, x), win, no_bias, 1, 0), mu_xx);
  auto var_y = ops::sub(ops::conv2d(ops::mul(y, y), win, no_bias, 1, 0), mu_yy);
  auto cov_xy = ops::sub(ops::conv2d(ops::mul(x, y), win, no_bias, 1, 0), mu_xy);

  auto num = ops::mul(ops::add_scalar(ops::scale(mu_xy, S(2)), c1),
                      ops::add_scalar(ops::scale(cov_xy, S(2)), c2));
  auto den = ops::mul(ops::add_scalar(ops::add(mu_xx, mu_yy), c1),
                      ops::add_scalar(ops::add(var_x, var_y), c2));
  return ops::mean(ops::divide(num, den));
}

template <typename S>
TensorT<S> composite_loss(const TensorT<S>& pred, const TensorT<S>& target,
                          const LossOptions& opt) {
  require_same_shape(pred, target, "composite_loss");
  auto diff = ops::sub(pred, target);
  auto loss = ops::mean(ops::mul(diff, diff));
  if (opt.lambda_l1 != 0) {
    loss = ops::add(loss, ops::scale(ops::mean(ops::abs(diff)), static_cast<S>(opt.lambda_l1)));
  }
  const bool ssim_fits = pred.rank() == 4 && pred.dims[2] >= opt.ssim.window &&
                         pred.dims[3] >= opt.ssim.window;
  if (opt.lambda_ssim != 0 && ssim_fits) {
    auto one_minus = ops::add_scalar(ops::scale(ssim(pred, target, opt.ssim), S(-1)), S(1));
    loss = ops::add(loss, ops::scale(one_minus, static_cast<S>(opt.lambda_ssim)));
  }
  return loss;
}

template TensorT<float> ssim<float>(const TensorT<float>&, const TensorT<float>&,
                                    const SsimOptions&);
template TensorT<double> ssim<double>(const TensorT<double>&, const TensorT<double>&,
                                      const SsimOptions&);
template TensorT<float> composite_loss<float>(const TensorT<float>&, const TensorT<float>&,
                                              const LossOptions&);
template TensorT<double> composite_loss<double>(const TensorT<double>&, const TensorT<double>&,
                                                const LossOptions&);

}  // namespace llvd
