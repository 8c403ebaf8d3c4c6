#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "llvd/tape.hpp"
#include "llvd/tensor.hpp"

// The recurrent video denoiser. The network is a three-part trunk:
//
//   encoder    N stages of k x k convolutions; every stage except the last
//              ends in a stride-2 convolution, so the latent runs at
//              1/2^(stages-1) of the trunk resolution.
//   recurrence a stack of convolutional LSTM layers on the latent. The
//              cell state carries denoising context between frames.
//   decoder    the encoder mirrored: later stages open with a stride-2
//              transposed convolution, and each upsampled tensor receives
//              the matching encoder activation as an additive skip.
//
// The trunk output is joined by a learned 1x1 projection of the trunk
// input (a global residual) and squashed with a sigmoid. With shuffle > 1
// the whole trunk runs on a space-to-depth repacking of the input, which
// shrinks the spatial extent and most of the arithmetic; the output is
// repacked to full resolution at the end.
//
// With no stages configured the trunk degenerates to 1x1 projections
// around the LSTM stack, a variant used to price the recurrence on its
// own.

namespace llvd {

struct ModelConfig {
  std::vector<int64_t> stage_widths = {20, 40, 80};  // conv width per encoder stage
  int64_t lstm_hidden = 80;   // LSTM state width; must match the last stage width
  int lstm_layers = 2;
  int kernel = 3;             // odd; shared by all non-1x1 layers
  int64_t in_channels = 3;
  int shuffle = 1;            // space-to-depth factor wrapped around the trunk
  int conv_per_stage = 5;

  /// Throws ConfigError when the fields are not a usable architecture.
  void validate() const;

  /// Input H and W must be multiples of this for a forward step.
  int64_t spatial_multiple() const;
};

/// One parameterized layer of the architecture, in construction order.
/// area_depth prices the layer: its arithmetic is proportional to
/// (trunk H * trunk W) / 4^area_depth. Convolutions scale with their
/// output area, transposed convolutions with their input area; bias adds
/// always happen at bias_depth (the output).
struct LayerPlan {
  enum class Kind { Conv, TConv, Lstm };
  Kind kind = Kind::Conv;
  std::string name;           // parameter prefix, e.g. "enc.s1.c2"
  int64_t cin = 0;
  int64_t cout = 0;           // Lstm: hidden width
  int k = 3;
  int stride = 1;
  int padding = 1;
  int output_padding = 0;
  bool relu = false;
  int area_depth = 0;
  int bias_depth = 0;
};

struct ArchPlan {
  int64_t trunk_in = 0;  // channels entering the trunk (in_channels * shuffle^2)
  std::vector<LayerPlan> layers;
};

/// Expands a config into the full layer list. Parameter naming, weight
/// initialization order, the forward pass, and cost accounting all follow
/// this one plan, so they cannot drift apart.
ArchPlan build_plan(const ModelConfig& cfg);

/// Per-layer recurrent state: hidden and cell tensors. Empty until the
/// first forward step, which sizes it from the latent.
template <typename S>
struct RecurrentStateT {
  struct Layer {
    TensorT<S> h, c;
  };
  std::vector<Layer> layers;
  bool empty() const { return layers.empty(); }
};

using RecurrentState = RecurrentStateT<float>;

/// The denoiser itself: a parameter store plus the forward step. Scalar
/// type S is float in production; the double instantiation exists so
/// finite-difference gradient checks run above float round-off.
template <typename S>
class ModelT {
 public:
  ModelT() = default;
  explicit ModelT(ModelConfig cfg);

  /// Xavier-uniform weights from one deterministic stream in plan order;
  /// zero biases except the LSTM forget-gate block, which starts at 1 so
  /// early training does not dump the cell state.
  void init_params(uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ArchPlan& plan() const { return plan_; }

  std::vector<std::pair<std::string, TensorT<S>>>& params() { return params_; }
  const std::vector<std::pair<std::string, TensorT<S>>>& params() const { return params_; }
  TensorT<S>& param(const std::string& name);
  const TensorT<S>& param(const std::string& name) const;
  int64_t param_count() const;  // total scalars

  /// Registers every parameter as a tape leaf.
  void watch_params(Tape<S>& tape);

  /// Denoises one frame [N, in_channels, H, W] and advances the recurrent
  /// state. H and W must be multiples of spatial_multiple(). When the
  /// parameters are bound to a tape the whole step is recorded, including
  /// the state handoff, so backward spans every frame of a clip.
  TensorT<S> step(const TensorT<S>& frame, RecurrentStateT<S>& state) const;

  /// Runs a clip of [C,H,W] frames from a fresh zero state.
  std::vector<TensorT<S>> run_sequence(const std::vector<TensorT<S>>& frames) const;

 private:
  TensorT<S> lstm_cell(const LayerPlan& lp, const TensorT<S>& x,
                       typename RecurrentStateT<S>::Layer& state) const;

  ModelConfig config_;
  ArchPlan plan_;
  std::vector<std::pair<std::string, TensorT<S>>> params_;
};

using Model = ModelT<float>;

extern template class ModelT<float>;
extern template class ModelT<double>;

}  // namespace llvd
