#include "llvd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "llvd/mac_counter.hpp"

namespace llvd::ops {

namespace {

template <typename S>
Tape<S>* common_tape(std::initializer_list<const TensorT<S>*> ins) {
  Tape<S>* tape = nullptr;
  for (const TensorT<S>* t : ins) {
    if (!t || t->empty()) continue;
    if (t->tape && t->tape->bound(*t)) {
      if (tape && tape != t->tape) {
        throw ValueError("operands are bound to different tapes");
      }
      tape = t->tape;
    }
  }
  return tape;
}

template <typename S>
int32_t node_of(Tape<S>* tape, const TensorT<S>& t) {
  return (tape && !t.empty() && tape->bound(t)) ? t.node : -1;
}

template <typename S>
void bind(TensorT<S>& out, Tape<S>* tape, int32_t node) {
  out.tape = tape;
  out.node = node;
  out.tape_epoch = tape->epoch();
}

// ---------------------------------------------------------------------------
// Convolution kernels. The padded input is materialized so the dense loops
// run without bounds checks and execute exactly k*k*Cin*Cout*Ho*Wo
// multiplies, which the counting path tallies one by one.
// ---------------------------------------------------------------------------

template <typename S>
std::vector<S> pad_nchw(const S* in, int64_t planes, int64_t h, int64_t w, int p) {
  const int64_t hp = h + 2 * p, wp = w + 2 * p;
  std::vector<S> out(planes * hp * wp, S(0));
  for (int64_t pl = 0; pl < planes; ++pl) {
    const S* src = in + pl * h * w;
    S* dst = out.data() + pl * hp * wp + p * wp + p;
    for (int64_t y = 0; y < h; ++y) std::memcpy(dst + y * wp, src + y * w, sizeof(S) * w);
  }
  return out;
}

template <typename S>
void conv2d_kernel(const S* pad, int64_t n, int64_t cin, int64_t hp, int64_t wp,
                   const S* w, const S* b, int64_t cout, int64_t k, int stride,
                   S* out, int64_t ho, int64_t wo) {
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t co = 0; co < cout; ++co) {
      S* oplane = out + (in * cout + co) * ho * wo;
      const S bv = b ? b[co] : S(0);
      std::fill(oplane, oplane + ho * wo, bv);
      for (int64_t ci = 0; ci < cin; ++ci) {
        const S* iplane = pad + (in * cin + ci) * hp * wp;
        const S* wplane = w + (co * cin + ci) * k * k;
        for (int64_t i = 0; i < k; ++i) {
          for (int64_t j = 0; j < k; ++j) {
            const S wv = wplane[i * k + j];
            for (int64_t y = 0; y < ho; ++y) {
              const S* irow = iplane + (y * stride + i) * wp + j;
              S* orow = oplane + y * wo;
              if (stride == 1) {
                for (int64_t x = 0; x < wo; ++x) orow[x] += wv * irow[x];
              } else {
                for (int64_t x = 0; x < wo; ++x) orow[x] += wv * irow[x * stride];
              }
            }
          }
        }
      }
    }
  }
}

// Reference path with per-multiply instrumentation. Accumulation order per
// output element (bias first, then ci-major, i, j) matches conv2d_kernel, so
// both paths produce identical bits.
template <typename S>
void conv2d_kernel_counted(const S* pad, int64_t n, int64_t cin, int64_t hp, int64_t wp,
                           const S* w, const S* b, int64_t cout, int64_t k, int stride,
                           S* out, int64_t ho, int64_t wo) {
  uint64_t macs = 0;
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t co = 0; co < cout; ++co) {
      for (int64_t y = 0; y < ho; ++y) {
        for (int64_t x = 0; x < wo; ++x) {
          S acc = b ? b[co] : S(0);
          for (int64_t ci = 0; ci < cin; ++ci) {
            const S* iplane = pad + (in * cin + ci) * hp * wp;
            const S* wplane = w + (co * cin + ci) * k * k;
            for (int64_t i = 0; i < k; ++i) {
              for (int64_t j = 0; j < k; ++j) {
                acc += wplane[i * k + j] * iplane[(y * stride + i) * wp + (x * stride + j)];
                ++macs;
              }
            }
          }
          out[((in * cout + co) * ho + y) * wo + x] = acc;
        }
      }
    }
  }
  MacCountingScope::add(macs);
}

// dL/dinput of conv2d: scatter out_grad through the weights into a padded
// buffer, then crop the interior. Exact adjoint of the gather above.
template <typename S>
void conv2d_grad_input(const S* gout, int64_t n, int64_t cout, int64_t ho, int64_t wo,
                       const S* w, int64_t cin, int64_t k, int stride, int p,
                       S* gin, int64_t h, int64_t wdt) {
  const int64_t hp = h + 2 * p, wp = wdt + 2 * p;
  std::vector<S> gpad(n * cin * hp * wp, S(0));
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t co = 0; co < cout; ++co) {
      const S* gplane = gout + (in * cout + co) * ho * wo;
      for (int64_t ci = 0; ci < cin; ++ci) {
        S* gp = gpad.data() + (in * cin + ci) * hp * wp;
        const S* wplane = w + (co * cin + ci) * k * k;
        for (int64_t y = 0; y < ho; ++y) {
          for (int64_t x = 0; x < wo; ++x) {
            const S g = gplane[y * wo + x];
            S* base = gp + (y * stride) * wp + x * stride;
            for (int64_t i = 0; i < k; ++i) {
              for (int64_t j = 0; j < k; ++j) base[i * wp + j] += g * wplane[i * k + j];
            }
          }
        }
      }
    }
  }
  for (int64_t pl = 0; pl < n * cin; ++pl) {
    const S* src = gpad.data() + pl * hp * wp + p * wp + p;
    S* dst = gin + pl * h * wdt;
    for (int64_t y = 0; y < h; ++y) {
      for (int64_t x = 0; x < wdt; ++x) dst[y * wdt + x] += src[y * wp + x];
    }
  }
}

template <typename S>
void conv2d_grad_weight(const S* pad, int64_t n, int64_t cin, int64_t hp, int64_t wp,
                        const S* gout, int64_t cout, int64_t ho, int64_t wo,
                        int64_t k, int stride, S* gw) {
  for (int64_t in = 0; in < n; ++in) {
    for (int64_t co = 0; co < cout; ++co) {
      const S* gplane = gout + (in * cout + co) * ho * wo;
      for (int64_t ci = 0; ci < cin; ++ci) {
        const S* iplane = pad + (in * cin + ci) * hp * wp;
        S* wplane = gw + (co * cin + ci) * k * k;
        for (int64_t i = 0; i < k; ++i) {
          for (int64_t j = 0; j < k; ++j) {
            S acc = 0;
            for (int64_t y = 0; y < ho; ++y) {
              const S* irow = iplane + (y * stride + i) * wp + j;
              const S* grow = gplane + y * wo;
              if (stride == 1) {
                for (int64_t x = 0; x < wo; ++x) acc += grow[x] * irow[x];
              } else {
                for (int64_t x = 0; x < wo; ++x) acc += grow[x] * irow[x * stride];
              }
            }
            wplane[i * k + j] += acc;
          }
        }
      }
    }
  }
}

// Transposed conv forward: scatter every input element through the kernel
// into the full (H-1)*s+k extent, then crop [p, p+Hout). Output rows past
// the scatter extent (output_padding) stay zero.
template <typename S>
void tconv_kernel(const S* in, int64_t n, int64_t cin, int64_t h, int64_t w,
                  const S* wgt, const S* b, int64_t cout, int64_t k, int stride,
                  int p, S* out, int64_t ho, int64_t wo, bool counted) {
  const int64_t fh = (h - 1) * stride + k, fw = (w - 1) * stride + k;
  std::vector<S> buf(n * cout * fh * fw, S(0));
  uint64_t macs = 0;
  for (int64_t in_ = 0; in_ < n; ++in_) {
    for (int64_t ci = 0; ci < cin; ++ci) {
      const S* iplane = in + (in_ * cin + ci) * h * w;
      for (int64_t co = 0; co < cout; ++co) {
        S* bplane = buf.data() + (in_ * cout + co) * fh * fw;
        const S* wplane = wgt + (ci * cout + co) * k * k;
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t x = 0; x < w; ++x) {
            const S v = iplane[y * w + x];
            S* base = bplane + (y * stride) * fw + x * stride;
            for (int64_t i = 0; i < k; ++i) {
              for (int64_t j = 0; j < k; ++j) {
                base[i * fw + j] += v * wplane[i * k + j];
                if (counted) ++macs;
              }
            }
          }
        }
      }
    }
  }
  if (counted) MacCountingScope::add(macs);
  for (int64_t in_ = 0; in_ < n; ++in_) {
    for (int64_t co = 0; co < cout; ++co) {
      const S* bplane = buf.data() + (in_ * cout + co) * fh * fw;
      S* oplane = out + (in_ * cout + co) * ho * wo;
      const S bv = b ? b[co] : S(0);
      for (int64_t y = 0; y < ho; ++y) {
        for (int64_t x = 0; x < wo; ++x) {
          const int64_t sy = y + p, sx = x + p;
          const S v = (sy < fh && sx < fw) ? bplane[sy * fw + sx] : S(0);
          oplane[y * wo + x] = v + bv;
        }
      }
    }
  }
}

// Embeds out_grad into the full scatter extent (offset by padding) so the
// tconv backward gathers can run without bounds checks.
template <typename S>
std::vector<S> tconv_extend_grad(const S* gout, int64_t planes, int64_t ho, int64_t wo,
                                 int64_t fh, int64_t fw, int p) {
  std::vector<S> ext(planes * fh * fw, S(0));
  for (int64_t pl = 0; pl < planes; ++pl) {
    const S* src = gout + pl * ho * wo;
    S* dst = ext.data() + pl * fh * fw;
    for (int64_t y = 0; y < ho && y + p < fh; ++y) {
      for (int64_t x = 0; x < wo && x + p < fw; ++x) dst[(y + p) * fw + (x + p)] = src[y * wo + x];
    }
  }
  return ext;
}

template <typename S>
void tconv_grad_input(const S* ext, int64_t n, int64_t cout, int64_t fh, int64_t fw,
                      const S* wgt, int64_t cin, int64_t k, int stride,
                      S* gin, int64_t h, int64_t w) {
  for (int64_t in_ = 0; in_ < n; ++in_) {
    for (int64_t ci = 0; ci < cin; ++ci) {
      S* gplane = gin + (in_ * cin + ci) * h * w;
      for (int64_t co = 0; co < cout; ++co) {
        const S* eplane = ext + (in_ * cout + co) * fh * fw;
        const S* wplane = wgt + (ci * cout + co) * k * k;
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t x = 0; x < w; ++x) {
            S acc = 0;
            const S* base = eplane + (y * stride) * fw + x * stride;
            for (int64_t i = 0; i < k; ++i) {
              for (int64_t j = 0; j < k; ++j) acc += base[i * fw + j] * wplane[i * k + j];
            }
            gplane[y * w + x] += acc;
          }
        }
      }
    }
  }
}

template <typename S>
void tconv_grad_weight(const S* in, int64_t n, int64_t cin, int64_t h, int64_t w,
                       const S* ext, int64_t cout, int64_t fh, int64_t fw,
                       int64_t k, int stride, S* gw) {
  for (int64_t in_ = 0; in_ < n; ++in_) {
    for (int64_t ci = 0; ci < cin; ++ci) {
      const S* iplane = in + (in_ * cin + ci) * h * w;
      for (int64_t co = 0; co < cout; ++co) {
        const S* eplane = ext + (in_ * cout + co) * fh * fw;
        S* wplane = gw + (ci * cout + co) * k * k;
        for (int64_t y = 0; y < h; ++y) {
          for (int64_t x = 0; x < w; ++x) {
            const S v = iplane[y * w + x];
            const S* base = eplane + (y * stride) * fw + x * stride;
            for (int64_t i = 0; i < k; ++i) {
              for (int64_t j = 0; j < k; ++j) wplane[i * k + j] += v * base[i * fw + j];
            }
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Shuffle kernels (raw buffers, reused by forward and backward).
// ---------------------------------------------------------------------------

template <typename S>
void unshuffle_raw(const S* in, int64_t n, int64_t c, int64_t h, int64_t w, int r, S* out) {
  const int64_t oh = h / r, ow = w / r, oc = c * r * r;
  for (int64_t in_ = 0; in_ < n; ++in_) {
    for (int64_t co = 0; co < oc; ++co) {
      const int64_t ci = co / (r * r), rem = co % (r * r);
      const int64_t dy = rem / r, dx = rem % r;
      const S* iplane = in + (in_ * c + ci) * h * w;
      S* oplane = out + (in_ * oc + co) * oh * ow;
      for (int64_t y = 0; y < oh; ++y) {
        for (int64_t x = 0; x < ow; ++x) oplane[y * ow + x] = iplane[(y * r + dy) * w + (x * r + dx)];
      }
    }
  }
}

template <typename S>
void shuffle_raw(const S* in, int64_t n, int64_t c, int64_t h, int64_t w, int r, S* out) {
  const int64_t oc = c / (r * r), oh = h * r, ow = w * r;
  for (int64_t in_ = 0; in_ < n; ++in_) {
    for (int64_t ci = 0; ci < c; ++ci) {
      const int64_t co = ci / (r * r), rem = ci % (r * r);
      const int64_t dy = rem / r, dx = rem % r;
      const S* iplane = in + (in_ * c + ci) * h * w;
      S* oplane = out + (in_ * oc + co) * oh * ow;
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) oplane[(y * r + dy) * ow + (x * r + dx)] = iplane[y * w + x];
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d / conv2d_transpose
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> conv2d(const TensorT<S>& input, const TensorT<S>& weight,
                  const TensorT<S>& bias, int stride, int padding) {
  if (input.rank() != 4) throw ShapeError("conv2d: input must be [N,Cin,H,W], got " + shape_str(input.dims));
  if (weight.rank() != 4) throw ShapeError("conv2d: weight must be [Cout,Cin,k,k], got " + shape_str(weight.dims));
  if (weight.dims[2] != weight.dims[3]) throw ShapeError("conv2d: kernel must be square, got " + shape_str(weight.dims));
  if (stride < 1) throw ValueError("conv2d: stride must be >= 1");
  if (padding < 0) throw ValueError("conv2d: padding must be >= 0");
  const int64_t n = input.dims[0], cin = input.dims[1], h = input.dims[2], w = input.dims[3];
  const int64_t cout = weight.dims[0], k = weight.dims[2];
  if (weight.dims[1] != cin) {
    throw ShapeError("conv2d: input channels " + std::to_string(cin) +
                     " do not match weight input channels " + std::to_string(weight.dims[1]));
  }
  if (!bias.empty() && bias.numel() != cout) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) +
                     " entries for " + std::to_string(cout) + " output channels");
  }
  if (k > h + 2 * padding || k > w + 2 * padding) {
    throw ShapeError("conv2d: kernel " + std::to_string(k) + " exceeds padded input " +
                     shape_str({h + 2 * padding, w + 2 * padding}));
  }
  const int64_t ho = (h + 2 * padding - k) / stride + 1;
  const int64_t wo = (w + 2 * padding - k) / stride + 1;

  auto pad = pad_nchw(input.data(), n * cin, h, w, padding);
  TensorT<S> out = TensorT<S>::zeros({n, cout, ho, wo});
  const S* bptr = bias.empty() ? nullptr : bias.data();
  const int64_t hp = h + 2 * padding, wp = w + 2 * padding;
  if (MacCountingScope::active()) {
    conv2d_kernel_counted(pad.data(), n, cin, hp, wp, weight.data(), bptr, cout, k, stride,
                          out.data(), ho, wo);
  } else {
    conv2d_kernel(pad.data(), n, cin, hp, wp, weight.data(), bptr, cout, k, stride,
                  out.data(), ho, wo);
  }

  Tape<S>* tape = common_tape<S>({&input, &weight, &bias});
  if (tape) {
    const int32_t in_node = node_of(tape, input);
    const int32_t w_node = node_of(tape, weight);
    const int32_t b_node = bias.empty() ? -1 : node_of(tape, bias);
    auto in_vals = input.values;
    auto w_vals = weight.values;
    const int sp = padding;
    const int st = stride;
    int32_t id = tape->record(out.numel(), [=](const std::vector<S>& g, Tape<S>& t) {
      if (in_node >= 0) {
        std::vector<S> gin(n * cin * h * w, S(0));
        conv2d_grad_input(g.data(), n, cout, ho, wo, w_vals->data(), cin, k, st, sp,
                          gin.data(), h, w);
        t.accumulate(in_node, gin);
      }
      if (w_node >= 0) {
        auto pad2 = pad_nchw(in_vals->data(), n * cin, h, w, sp);
        std::vector<S> gw(cout * cin * k * k, S(0));
        conv2d_grad_weight(pad2.data(), n, cin, h + 2 * sp, w + 2 * sp, g.data(), cout, ho, wo,
                           k, st, gw.data());
        t.accumulate(w_node, gw);
      }
      if (b_node >= 0) {
        std::vector<S> gb(cout, S(0));
        for (int64_t in_ = 0; in_ < n; ++in_) {
          for (int64_t co = 0; co < cout; ++co) {
            const S* gp = g.data() + (in_ * cout + co) * ho * wo;
            S acc = 0;
            for (int64_t i = 0; i < ho * wo; ++i) acc += gp[i];
            gb[co] += acc;
          }
        }
        t.accumulate(b_node, gb);
      }
    });
    bind(out, tape, id);
  }
  return out;
}

template <typename S>
TensorT<S> conv2d_transpose(const TensorT<S>& input, const TensorT<S>& weight,
                            const TensorT<S>& bias, int stride, int padding,
                            int output_padding) {
  if (input.rank() != 4) throw ShapeError("conv2d_transpose: input must be [N,Cin,H,W], got " + shape_str(input.dims));
  if (weight.rank() != 4) throw ShapeError("conv2d_transpose: weight must be [Cin,Cout,k,k], got " + shape_str(weight.dims));
  if (weight.dims[2] != weight.dims[3]) throw ShapeError("conv2d_transpose: kernel must be square");
  if (stride < 1) throw ValueError("conv2d_transpose: stride must be >= 1");
  if (padding < 0) throw ValueError("conv2d_transpose: padding must be >= 0");
  if (output_padding < 0 || output_padding >= stride) {
    throw ValueError("conv2d_transpose: output_padding must be in [0, stride)");
  }
  const int64_t n = input.dims[0], cin = input.dims[1], h = input.dims[2], w = input.dims[3];
  const int64_t cout = weight.dims[1], k = weight.dims[2];
  if (weight.dims[0] != cin) {
    throw ShapeError("conv2d_transpose: input channels " + std::to_string(cin) +
                     " do not match weight input channels " + std::to_string(weight.dims[0]));
  }
  if (!bias.empty() && bias.numel() != cout) {
    throw ShapeError("conv2d_transpose: bias has " + std::to_string(bias.numel()) +
                     " entries for " + std::to_string(cout) + " output channels");
  }
  const int64_t ho = (h - 1) * stride - 2 * padding + k + output_padding;
  const int64_t wo = (w - 1) * stride - 2 * padding + k + output_padding;
  if (ho < 1 || wo < 1) {
    throw ShapeError("conv2d_transpose: output would be empty for input " + shape_str(input.dims));
  }

  TensorT<S> out = TensorT<S>::zeros({n, cout, ho, wo});
  const S* bptr = bias.empty() ? nullptr : bias.data();
  tconv_kernel(input.data(), n, cin, h, w, weight.data(), bptr, cout, k, stride, padding,
               out.data(), ho, wo, MacCountingScope::active());

  Tape<S>* tape = common_tape<S>({&input, &weight, &bias});
  if (tape) {
    const int32_t in_node = node_of(tape, input);
    const int32_t w_node = node_of(tape, weight);
    const int32_t b_node = bias.empty() ? -1 : node_of(tape, bias);
    auto in_vals = input.values;
    auto w_vals = weight.values;
    const int sp = padding;
    const int st = stride;
    int32_t id = tape->record(out.numel(), [=](const std::vector<S>& g, Tape<S>& t) {
      const int64_t fh = (h - 1) * st + k, fw = (w - 1) * st + k;
      auto ext = tconv_extend_grad(g.data(), n * cout, ho, wo, fh, fw, sp);
      if (in_node >= 0) {
        std::vector<S> gin(n * cin * h * w, S(0));
        tconv_grad_input(ext.data(), n, cout, fh, fw, w_vals->data(), cin, k, st,
                         gin.data(), h, w);
        t.accumulate(in_node, gin);
      }
      if (w_node >= 0) {
        std::vector<S> gw(cin * cout * k * k, S(0));
        tconv_grad_weight(in_vals->data(), n, cin, h, w, ext.data(), cout, fh, fw, k, st,
                          gw.data());
        t.accumulate(w_node, gw);
      }
      if (b_node >= 0) {
        std::vector<S> gb(cout, S(0));
        for (int64_t in_ = 0; in_ < n; ++in_) {
          for (int64_t co = 0; co < cout; ++co) {
            const S* gp = g.data() + (in_ * cout + co) * ho * wo;
            S acc = 0;
            for (int64_t i = 0; i < ho * wo; ++i) acc += gp[i];
            gb[co] += acc;
          }
        }
        t.accumulate(b_node, gb);
      }
    });
    bind(out, tape, id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// pixel shuffle / unshuffle
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> pixel_unshuffle(const TensorT<S>& input, int r) {
  if (input.rank() != 4) throw ShapeError("pixel_unshuffle: input must be rank 4, got " + shape_str(input.dims));
  if (r < 1) throw ValueError("pixel_unshuffle: r must be >= 1");
  const int64_t n = input.dims[0], c = input.dims[1], h = input.dims[2], w = input.dims[3];
  if (h % r != 0 || w % r != 0) {
    throw ShapeError("pixel_unshuffle: r=" + std::to_string(r) + " does not divide spatial dims " +
                     shape_str({h, w}));
  }
  TensorT<S> out = TensorT<S>::zeros({n, c * r * r, h / r, w / r});
  unshuffle_raw(input.data(), n, c, h, w, r, out.data());

  Tape<S>* tape = common_tape<S>({&input});
  if (tape) {
    const int32_t in_node = node_of(tape, input);
    int32_t id = tape->record(out.numel(), [=, od = out.dims](const std::vector<S>& g, Tape<S>& t) {
      if (in_node < 0) return;
      std::vector<S> gin(n * c * h * w);
      shuffle_raw(g.data(), od[0], od[1], od[2], od[3], r, gin.data());
      t.accumulate(in_node, gin);
    });
    bind(out, tape, id);
  }
  return out;
}

template <typename S>
TensorT<S> pixel_shuffle(const TensorT<S>& input, int r) {
  if (input.rank() != 4) throw ShapeError("pixel_shuffle: input must be rank 4, got " + shape_str(input.dims));
  if (r < 1) throw ValueError("pixel_shuffle: r must be >= 1");
  const int64_t n = input.dims[0], c = input.dims[1], h = input.dims[2], w = input.dims[3];
  if (c % (static_cast<int64_t>(r) * r) != 0) {
    throw ShapeError("pixel_shuffle: r^2=" + std::to_string(r * r) + " does not divide channels " +
                     std::to_string(c));
  }
  TensorT<S> out = TensorT<S>::zeros({n, c / (r * r), h * r, w * r});
  shuffle_raw(input.data(), n, c, h, w, r, out.data());

  Tape<S>* tape = common_tape<S>({&input});
  if (tape) {
    const int32_t in_node = node_of(tape, input);
    int32_t id = tape->record(out.numel(), [=, od = out.dims](const std::vector<S>& g, Tape<S>& t) {
      if (in_node < 0) return;
      std::vector<S> gin(n * c * h * w);
      unshuffle_raw(g.data(), od[0], od[1], od[2], od[3], r, gin.data());
      t.accumulate(in_node, gin);
    });
    bind(out, tape, id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// pointwise arithmetic
// ---------------------------------------------------------------------------

namespace {

// fwd(a, b) -> out; dda/ddb map (a, b, g) to the operand gradients.
template <typename S, typename Fwd, typename Da, typename Db>
TensorT<S> binary_op(const TensorT<S>& a, const TensorT<S>& b, const char* name,
                     Fwd fwd, Da dda, Db ddb) {
  require_same_shape(a, b, name);
  TensorT<S> out = TensorT<S>::zeros(a.dims);
  const int64_t nels = out.numel();
  const S* pa = a.data();
  const S* pb = b.data();
  S* po = out.data();
  for (int64_t i = 0; i < nels; ++i) po[i] = fwd(pa[i], pb[i]);

  Tape<S>* tape = common_tape<S>({&a, &b});
  if (tape) {
    const int32_t an = node_of(tape, a), bn = node_of(tape, b);
    auto av = a.values;
    auto bv = b.values;
    int32_t id = tape->record(nels, [=](const std::vector<S>& g, Tape<S>& t) {
      if (an >= 0) {
        std::vector<S> ga(nels);
        for (int64_t i = 0; i < nels; ++i) ga[i] = dda((*av)[i], (*bv)[i], g[i]);
        t.accumulate(an, ga);
      }
      if (bn >= 0) {
        std::vector<S> gb(nels);
        for (int64_t i = 0; i < nels; ++i) gb[i] = ddb((*av)[i], (*bv)[i], g[i]);
        t.accumulate(bn, gb);
      }
    });
    bind(out, tape, id);
  }
  return out;
}

// fwd maps x to y; dydx maps (x, y) to the local derivative.
template <typename S, typename Fwd, typename Dydx>
TensorT<S> unary_op(const TensorT<S>& x, Fwd fwd, Dydx dydx) {
  TensorT<S> out = TensorT<S>::zeros(x.dims);
  const int64_t nels = out.numel();
  const S* px = x.data();
  S* po = out.data();
  for (int64_t i = 0; i < nels; ++i) po[i] = fwd(px[i]);

  Tape<S>* tape = common_tape<S>({&x});
  if (tape) {
    const int32_t xn = node_of(tape, x);
    auto xv = x.values;
    auto ov = out.values;
    int32_t id = tape->record(nels, [=](const std::vector<S>& g, Tape<S>& t) {
      if (xn < 0) return;
      std::vector<S> gx(nels);
      for (int64_t i = 0; i < nels; ++i) gx[i] = g[i] * dydx((*xv)[i], (*ov)[i]);
      t.accumulate(xn, gx);
    });
    bind(out, tape, id);
  }
  return out;
}

}  // namespace

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  return binary_op(
      a, b, "add", [](S x, S y) { return x + y; },
      [](S, S, S g) { return g; }, [](S, S, S g) { return g; });
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  return binary_op(
      a, b, "sub", [](S x, S y) { return x - y; },
      [](S, S, S g) { return g; }, [](S, S, S g) { return -g; });
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  return binary_op(
      a, b, "mul", [](S x, S y) { return x * y; },
      [](S, S y, S g) { return g * y; }, [](S x, S, S g) { return g * x; });
}

template <typename S>
TensorT<S> divide(const TensorT<S>& a, const TensorT<S>& b) {
  return binary_op(
      a, b, "divide", [](S x, S y) { return x / y; },
      [](S, S y, S g) { return g / y; },
      [](S x, S y, S g) { return -g * x / (y * y); });
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x) {
  return unary_op(
      x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
TensorT<S> tanh(const TensorT<S>& x) {
  return unary_op(
      x, [](S v) { return std::tanh(v); },
      [](S, S y) { return S(1) - y * y; });
}

template <typename S>
TensorT<S> relu(const TensorT<S>& x) {
  return unary_op(
      x, [](S v) { return v > S(0) ? v : S(0); },
      [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
TensorT<S> abs(const TensorT<S>& x) {
  return unary_op(
      x, [](S v) { return v < S(0) ? -v : v; },
      [](S v, S) { return v > S(0) ? S(1) : (v < S(0) ? S(-1) : S(0)); });
}

template <typename S>
TensorT<S> scale(const TensorT<S>& x, S factor) {
  return unary_op(
      x, [factor](S v) { return v * factor; },
      [factor](S, S) { return factor; });
}

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& x, S value) {
  return unary_op(
      x, [value](S v) { return v + value; },
      [](S, S) { return S(1); });
}

// ---------------------------------------------------------------------------
// layout ops
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> concat_channels(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw ValueError("concat_channels: no operands");
  int64_t ctotal = 0;
  for (const auto& p : parts) {
    if (p.rank() != 4) throw ShapeError("concat_channels: operands must be rank 4, got " + shape_str(p.dims));
    if (p.dims[0] != parts[0].dims[0] || p.dims[2] != parts[0].dims[2] || p.dims[3] != parts[0].dims[3]) {
      throw ShapeError("concat_channels: N/H/W mismatch " + shape_str(parts[0].dims) + " vs " + shape_str(p.dims));
    }
    ctotal += p.dims[1];
  }
  const int64_t n = parts[0].dims[0], h = parts[0].dims[2], w = parts[0].dims[3];
  TensorT<S> out = TensorT<S>::zeros({n, ctotal, h, w});
  for (int64_t in_ = 0; in_ < n; ++in_) {
    int64_t coff = 0;
    for (const auto& p : parts) {
      const int64_t c = p.dims[1];
      std::memcpy(out.data() + ((in_ * ctotal + coff) * h * w),
                  p.data() + (in_ * c * h * w), sizeof(S) * c * h * w);
      coff += c;
    }
  }

  std::vector<const TensorT<S>*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  Tape<S>* tape = nullptr;
  for (const auto* p : ptrs) {
    Tape<S>* t = common_tape<S>({p});
    if (t && tape && t != tape) throw ValueError("concat_channels: operands on different tapes");
    if (t) tape = t;
  }
  if (tape) {
    std::vector<int32_t> nodes;
    std::vector<int64_t> chans;
    for (const auto& p : parts) {
      nodes.push_back(node_of(tape, p));
      chans.push_back(p.dims[1]);
    }
    int32_t id = tape->record(out.numel(), [=](const std::vector<S>& g, Tape<S>& t) {
      int64_t coff = 0;
      for (size_t pi = 0; pi < nodes.size(); ++pi) {
        const int64_t c = chans[pi];
        if (nodes[pi] >= 0) {
          std::vector<S> gp(n * c * h * w);
          for (int64_t in_ = 0; in_ < n; ++in_) {
            std::memcpy(gp.data() + in_ * c * h * w,
                        g.data() + ((in_ * ctotal + coff) * h * w), sizeof(S) * c * h * w);
          }
          t.accumulate(nodes[pi], gp);
        }
        coff += c;
      }
    });
    bind(out, tape, id);
  }
  return out;
}

template <typename S>
TensorT<S> concat_channels(const TensorT<S>& a, const TensorT<S>& b) {
  return concat_channels(std::vector<TensorT<S>>{a, b});
}

template <typename S>
TensorT<S> slice_channels(const TensorT<S>& x, int64_t start, int64_t count) {
  if (x.rank() != 4) throw ShapeError("slice_channels: input must be rank 4, got " + shape_str(x.dims));
  const int64_t n = x.dims[0], c = x.dims[1], h = x.dims[2], w = x.dims[3];
  if (start < 0 || count < 1 || start + count > c) {
    throw ShapeError("slice_channels: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + std::to_string(c) + " channels");
  }
  TensorT<S> out = TensorT<S>::zeros({n, count, h, w});
  for (int64_t in_ = 0; in_ < n; ++in_) {
    std::memcpy(out.data() + in_ * count * h * w,
                x.data() + ((in_ * c + start) * h * w), sizeof(S) * count * h * w);
  }

  Tape<S>* tape = common_tape<S>({&x});
  if (tape) {
    const int32_t xn = node_of(tape, x);
    int32_t id = tape->record(out.numel(), [=](const std::vector<S>& g, Tape<S>& t) {
      if (xn < 0) return;
      std::vector<S> gx(n * c * h * w, S(0));
      for (int64_t in_ = 0; in_ < n; ++in_) {
        std::memcpy(gx.data() + ((in_ * c + start) * h * w),
                    g.data() + in_ * count * h * w, sizeof(S) * count * h * w);
      }
      t.accumulate(xn, gx);
    });
    bind(out, tape, id);
  }
  return out;
}

template <typename S>
TensorT<S> reshape(const TensorT<S>& x, std::vector<int64_t> dims) {
  if (shape_numel(dims) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.dims) + " as " + shape_str(dims));
  }
  TensorT<S> out;
  out.dims = std::move(dims);
  out.values = x.values;  // contiguous row-major view, no copy
  Tape<S>* tape = common_tape<S>({&x});
  if (tape) {
    const int32_t xn = node_of(tape, x);
    int32_t id = tape->record(out.numel(), [=](const std::vector<S>& g, Tape<S>& t) {
      if (xn >= 0) t.accumulate(xn, g);
    });
    bind(out, tape, id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> sum(const TensorT<S>& x) {
  double acc = 0;
  for (S v : *x.values) acc += static_cast<double>(v);
  TensorT<S> out = TensorT<S>::from({1}, {static_cast<S>(acc)});
  Tape<S>* tape = common_tape<S>({&x});
  if (tape) {
    const int32_t xn = node_of(tape, x);
    const int64_t nels = x.numel();
    int32_t id = tape->record(1, [=](const std::vector<S>& g, Tape<S>& t) {
      if (xn < 0) return;
      std::vector<S> gx(nels, g[0]);
      t.accumulate(xn, gx);
    });
    bind(out, tape, id);
  }
  return out;
}

template <typename S>
TensorT<S> mean(const TensorT<S>& x) {
  const int64_t nels = x.numel();
  double acc = 0;
  for (S v : *x.values) acc += static_cast<double>(v);
  TensorT<S> out = TensorT<S>::from({1}, {static_cast<S>(acc / static_cast<double>(nels))});
  Tape<S>* tape = common_tape<S>({&x});
  if (tape) {
    const int32_t xn = node_of(tape, x);
    int32_t id = tape->record(1, [=](const std::vector<S>& g, Tape<S>& t) {
      if (xn < 0) return;
      std::vector<S> gx(nels, static_cast<S>(g[0] / static_cast<S>(nels)));
      t.accumulate(xn, gx);
    });
    bind(out, tape, id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// explicit instantiations
// ---------------------------------------------------------------------------

#define LLVD_INSTANTIATE_OPS(S)                                                              \
  template TensorT<S> conv2d<S>(const TensorT<S>&, const TensorT<S>&, const TensorT<S>&,    \
                                int, int);                                                   \
  template TensorT<S> conv2d_transpose<S>(const TensorT<S>&, const TensorT<S>&,             \
                                          const TensorT<S>&, int, int, int);                 \
  template TensorT<S> pixel_unshuffle<S>(const TensorT<S>&, int);                            \
  template TensorT<S> pixel_shuffle<S>(const TensorT<S>&, int);                              \
  template TensorT<S> add<S>(const TensorT<S>&, const TensorT<S>&);                          \
  template TensorT<S> sub<S>(const TensorT<S>&, const TensorT<S>&);                          \
  template TensorT<S> mul<S>(const TensorT<S>&, const TensorT<S>&);                          \
  template TensorT<S> divide<S>(const TensorT<S>&, const TensorT<S>&);                       \
  template TensorT<S> sigmoid<S>(const TensorT<S>&);                                         \
  template TensorT<S> tanh<S>(const TensorT<S>&);                                            \
  template TensorT<S> relu<S>(const TensorT<S>&);                                            \
  template TensorT<S> abs<S>(const TensorT<S>&);                                             \
  template TensorT<S> scale<S>(const TensorT<S>&, S);                                        \
  template TensorT<S> add_scalar<S>(const TensorT<S>&, S);                                   \
  template TensorT<S> concat_channels<S>(const std::vector<TensorT<S>>&);                    \
  template TensorT<S> concat_channels<S>(const TensorT<S>&, const TensorT<S>&);              \
  template TensorT<S> slice_channels<S>(const TensorT<S>&, int64_t, int64_t);                \
  template TensorT<S> reshape<S>(const TensorT<S>&, std::vector<int64_t>);                   \
  template TensorT<S> sum<S>(const TensorT<S>&);                                             \
  template TensorT<S> mean<S>(const TensorT<S>&);

LLVD_INSTANTIATE_OPS(float)
LLVD_INSTANTIATE_OPS(double)

#undef LLVD_INSTANTIATE_OPS

}  // namespace llvd::ops
