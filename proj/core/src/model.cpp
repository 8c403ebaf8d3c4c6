#include "llvd/model.hpp"

#include <cmath>
#include <unordered_map>

#include "llvd/data.hpp"
#include "llvd/ops.hpp"

namespace llvd {

void ModelConfig::validate() const {
  if (kernel < 1 || kernel % 2 == 0) {
    throw ConfigError("model: kernel must be odd and positive, got " + std::to_string(kernel));
  }
  if (in_channels < 1) throw ConfigError("model: in_channels must be >= 1");
  if (shuffle < 1) throw ConfigError("model: shuffle must be >= 1");
  if (lstm_layers < 0) throw ConfigError("model: lstm_layers must be >= 0");
  if (conv_per_stage < 2) throw ConfigError("model: conv_per_stage must be >= 2");
  for (int64_t w : stage_widths) {
    if (w < 1) throw ConfigError("model: stage widths must be >= 1");
  }
  if (stage_widths.empty() && lstm_layers < 1) {
    throw ConfigError("model: need at least one stage or one LSTM layer");
  }
  if (lstm_layers > 0 && lstm_hidden < 1) throw ConfigError("model: lstm_hidden must be >= 1");
  if (!stage_widths.empty() && lstm_layers > 0 && lstm_hidden != stage_widths.back()) {
    throw ConfigError("model: lstm_hidden (" + std::to_string(lstm_hidden) +
                      ") must equal the last stage width (" +
                      std::to_string(stage_widths.back()) +
                      ") so the skip around the recurrence lines up");
  }
}

int64_t ModelConfig::spatial_multiple() const {
  int64_t m = shuffle;
  if (!stage_widths.empty()) m <<= (stage_widths.size() - 1);
  return m;
}

ArchPlan build_plan(const ModelConfig& cfg) {
  cfg.validate();
  ArchPlan plan;
  plan.trunk_in = cfg.in_channels * cfg.shuffle * cfg.shuffle;
  const int k = cfg.kernel, p = cfg.kernel / 2;
  const int n = static_cast<int>(cfg.stage_widths.size());
  const int cps = cfg.conv_per_stage;

  auto conv = [&](const std::string& name, int64_t cin, int64_t cout, int kk, int stride,
                  bool relu, int in_depth) {
    LayerPlan lp;
    lp.kind = LayerPlan::Kind::Conv;
    lp.name = name;
    lp.cin = cin;
    lp.cout = cout;
    lp.k = kk;
    lp.stride = stride;
    lp.padding = kk / 2;
    lp.relu = relu;
    lp.area_depth = in_depth + (stride == 2 ? 1 : 0);
    lp.bias_depth = lp.area_depth;
    plan.layers.push_back(lp);
  };

  int depth = 0;
  int64_t prev = plan.trunk_in;
  for (int s = 1; s <= n; ++s) {
    const int64_t w = cfg.stage_widths[s - 1];
    for (int ci = 1; ci <= cps; ++ci) {
      const bool down = (s < n && ci == cps);
      conv("enc.s" + std::to_string(s) + ".c" + std::to_string(ci), ci == 1 ? prev : w, w, k,
           down ? 2 : 1, true, depth);
      if (down) ++depth;
    }
    prev = w;
  }

  if (n == 0) conv("head.in_proj", plan.trunk_in, cfg.lstm_hidden, 1, 1, true, 0);

  int64_t lstm_in = (n == 0) ? cfg.lstm_hidden : cfg.stage_widths.back();
  for (int l = 1; l <= cfg.lstm_layers; ++l) {
    LayerPlan lp;
    lp.kind = LayerPlan::Kind::Lstm;
    lp.name = "lstm.l" + std::to_string(l);
    lp.cin = lstm_in;
    lp.cout = cfg.lstm_hidden;
    lp.k = k;
    lp.stride = 1;
    lp.padding = p;
    lp.area_depth = depth;
    lp.bias_depth = depth;
    plan.layers.push_back(lp);
    lstm_in = cfg.lstm_hidden;
  }

  for (int d = 1; d <= n; ++d) {
    const int64_t w = cfg.stage_widths[n - d];
    const int64_t stage_out = (d < n) ? cfg.stage_widths[n - d - 1] : plan.trunk_in;
    for (int ci = 1; ci <= cps; ++ci) {
      const std::string nm = "dec.s" + std::to_string(d) + ".c" + std::to_string(ci);
      if (d > 1 && ci == 1) {
        LayerPlan lp;
        lp.kind = LayerPlan::Kind::TConv;
        lp.name = nm;
        lp.cin = w;
        lp.cout = w;
        lp.k = k;
        lp.stride = 2;
        lp.padding = p;
        lp.output_padding = 1;
        lp.relu = true;
        lp.area_depth = depth;      // transposed conv cost scales with its input
        lp.bias_depth = depth - 1;  // bias lands on the upsampled output
        plan.layers.push_back(lp);
        --depth;
      } else if (ci == cps) {
        conv(nm, w, stage_out, k, 1, d < n, depth);  // final conv stays linear
      } else {
        conv(nm, w, w, k, 1, true, depth);
      }
    }
  }

  if (n == 0) conv("head.out_proj", cfg.lstm_hidden, plan.trunk_in, 1, 1, false, 0);

  conv("residual.proj", plan.trunk_in, plan.trunk_in, 1, 1, false, 0);
  return plan;
}

namespace {

template <typename S>
void append_param(std::vector<std::pair<std::string, TensorT<S>>>& params,
                  const std::string& name, std::vector<int64_t> dims) {
  params.emplace_back(name, TensorT<S>::zeros(std::move(dims)));
}

}  // namespace

template <typename S>
ModelT<S>::ModelT(ModelConfig cfg) : config_(std::move(cfg)), plan_(build_plan(config_)) {
  for (const LayerPlan& lp : plan_.layers) {
    const int64_t k = lp.k;
    switch (lp.kind) {
      case LayerPlan::Kind::Conv:
        append_param(params_, lp.name + ".weight", {lp.cout, lp.cin, k, k});
        append_param(params_, lp.name + ".bias", {lp.cout});
        break;
      case LayerPlan::Kind::TConv:
        append_param(params_, lp.name + ".weight", {lp.cin, lp.cout, k, k});
        append_param(params_, lp.name + ".bias", {lp.cout});
        break;
      case LayerPlan::Kind::Lstm:
        append_param(params_, lp.name + ".gates.weight", {4 * lp.cout, lp.cin + lp.cout, k, k});
        append_param(params_, lp.name + ".gates.bias", {4 * lp.cout});
        break;
    }
  }
}

template <typename S>
void ModelT<S>::init_params(uint64_t seed) {
  NoiseStream rng(seed, 0);
  for (const LayerPlan& lp : plan_.layers) {
    const bool lstm = lp.kind == LayerPlan::Kind::Lstm;
    const std::string wname = lp.name + (lstm ? ".gates.weight" : ".weight");
    const std::string bname = lp.name + (lstm ? ".gates.bias" : ".bias");
    const double fan_in = static_cast<double>(lstm ? lp.cin + lp.cout : lp.cin) * lp.k * lp.k;
    const double fan_out = static_cast<double>(lstm ? 4 * lp.cout : lp.cout) * lp.k * lp.k;
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));

    TensorT<S>& w = param(wname);
    S* wp = w.data();
    for (int64_t i = 0; i < w.numel(); ++i) {
      wp[i] = static_cast<S>((2.0 * rng.uniform() - 1.0) * limit);
    }

    TensorT<S>& b = param(bname);
    S* bp = b.data();
    std::fill(bp, bp + b.numel(), S(0));
    if (lstm) {
      // Forget gate opens at 1 so a fresh cell state is carried, not erased.
      for (int64_t i = lp.cout; i < 2 * lp.cout; ++i) bp[i] = S(1);
    }
  }
}

template <typename S>
TensorT<S>& ModelT<S>::param(const std::string& name) {
  for (auto& [nm, t] : params_) {
    if (nm == name) return t;
  }
  throw ValueError("model: no parameter named '" + name + "'");
}

template <typename S>
const TensorT<S>& ModelT<S>::param(const std::string& name) const {
  return const_cast<ModelT<S>*>(this)->param(name);
}

template <typename S>
int64_t ModelT<S>::param_count() const {
  int64_t total = 0;
  for (const auto& [nm, t] : params_) total += t.numel();
  return total;
}

template <typename S>
void ModelT<S>::watch_params(Tape<S>& tape) {
  for (auto& [nm, t] : params_) tape.watch(t);
}

template <typename S>
TensorT<S> ModelT<S>::lstm_cell(const LayerPlan& lp, const TensorT<S>& x,
                                typename RecurrentStateT<S>::Layer& state) const {
  const int64_t hid = lp.cout;
  const std::vector<int64_t> sdims = {x.dims[0], hid, x.dims[2], x.dims[3]};
  if (state.h.empty()) {
    state.h = TensorT<S>::zeros(sdims);
    state.c = TensorT<S>::zeros(sdims);
  } else if (state.h.dims != sdims || state.c.dims != sdims) {
    throw ShapeError("model: recurrent state " + shape_str(state.h.dims) +
                     " does not match latent " + shape_str(sdims) +
                     "; reset the state when resolution or batch changes");
  }
  auto z = ops::conv2d(ops::concat_channels(x, state.h), param(lp.name + ".gates.weight"),
                       param(lp.name + ".gates.bias"), 1, lp.padding);
  auto i = ops::sigmoid(ops::slice_channels(z, 0, hid));
  auto f = ops::sigmoid(ops::slice_channels(z, hid, hid));
  auto o = ops::sigmoid(ops::slice_channels(z, 2 * hid, hid));
  auto g = ops::tanh(ops::slice_channels(z, 3 * hid, hid));
  auto c_next = ops::add(ops::mul(f, state.c), ops::mul(i, g));
  auto h_next = ops::mul(o, ops::tanh(c_next));
  state.h = h_next;
  state.c = c_next;
  return h_next;
}

template <typename S>
TensorT<S> ModelT<S>::step(const TensorT<S>& frame, RecurrentStateT<S>& state) const {
  if (frame.rank() != 4) {
    throw ShapeError("model step: input must be [N,C,H,W], got " + shape_str(frame.dims));
  }
  if (frame.dims[1] != config_.in_channels) {
    throw ShapeError("model step: expected " + std::to_string(config_.in_channels) +
                     " channels, got " + std::to_string(frame.dims[1]));
  }
  const int64_t mult = config_.spatial_multiple();
  if (frame.dims[2] % mult != 0 || frame.dims[3] % mult != 0) {
    throw ShapeError("model step: H and W must be multiples of " + std::to_string(mult) +
                     ", got " + shape_str({frame.dims[2], frame.dims[3]}));
  }

  auto P = [&](const std::string& nm) -> const TensorT<S>& { return param(nm); };
  const int n = static_cast<int>(config_.stage_widths.size());
  const int cps = config_.conv_per_stage;
  const int p = config_.kernel / 2;

  TensorT<S> x = config_.shuffle > 1 ? ops::pixel_unshuffle(frame, config_.shuffle) : frame;

  std::vector<TensorT<S>> skips;
  TensorT<S> t = x;
  for (int s = 1; s <= n; ++s) {
    for (int ci = 1; ci <= cps; ++ci) {
      const bool down = (s < n && ci == cps);
      if (down) skips.push_back(t);  // tap the full-width activation pre-downsample
      const std::string nm = "enc.s" + std::to_string(s) + ".c" + std::to_string(ci);
      t = ops::relu(ops::conv2d(t, P(nm + ".weight"), P(nm + ".bias"), down ? 2 : 1, p));
    }
  }
  if (n > 0) skips.push_back(t);

  if (n == 0) t = ops::relu(ops::conv2d(t, P("head.in_proj.weight"), P("head.in_proj.bias"), 1, 0));

  if (config_.lstm_layers > 0) {
    if (state.layers.empty()) {
      state.layers.resize(config_.lstm_layers);
    } else if (static_cast<int>(state.layers.size()) != config_.lstm_layers) {
      throw ShapeError("model: recurrent state has " + std::to_string(state.layers.size()) +
                       " layers, model has " + std::to_string(config_.lstm_layers));
    }
    int li = 0;
    for (const LayerPlan& lp : plan_.layers) {
      if (lp.kind != LayerPlan::Kind::Lstm) continue;
      t = lstm_cell(lp, t, state.layers[li++]);
    }
    // The skip around the recurrence: the decoder sees latent + LSTM output.
    if (n > 0) t = ops::add(t, skips.back());
  }

  for (int d = 1; d <= n; ++d) {
    for (int ci = 1; ci <= cps; ++ci) {
      const std::string nm = "dec.s" + std::to_string(d) + ".c" + std::to_string(ci);
      if (d > 1 && ci == 1) {
        t = ops::relu(ops::conv2d_transpose(t, P(nm + ".weight"), P(nm + ".bias"), 2, p, 1));
        t = ops::add(t, skips[n - d]);
      } else if (d == n && ci == cps) {
        t = ops::conv2d(t, P(nm + ".weight"), P(nm + ".bias"), 1, p);  // stays linear
      } else {
        t = ops::relu(ops::conv2d(t, P(nm + ".weight"), P(nm + ".bias"), 1, p));
      }
    }
  }
  if (n == 0) t = ops::conv2d(t, P("head.out_proj.weight"), P("head.out_proj.bias"), 1, 0);

  auto res = ops::conv2d(x, P("residual.proj.weight"), P("residual.proj.bias"), 1, 0);
  auto out = ops::sigmoid(ops::add(t, res));
  return config_.shuffle > 1 ? ops::pixel_shuffle(out, config_.shuffle) : out;
}

template <typename S>
std::vector<TensorT<S>> ModelT<S>::run_sequence(const std::vector<TensorT<S>>& frames) const {
  RecurrentStateT<S> state;
  std::vector<TensorT<S>> out;
  out.reserve(frames.size());
  for (const TensorT<S>& f : frames) {
    if (f.rank() != 3) throw ShapeError("run_sequence: frames must be [C,H,W]");
    auto batched = stack_batch(std::vector<TensorT<S>>{f});
    auto denoised = step(batched, state);
    out.push_back(unstack_batch(denoised).front());
  }
  return out;
}

template class ModelT<float>;
template class ModelT<double>;

}  // namespace llvd
