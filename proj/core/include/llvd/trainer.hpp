#pragma once

#include <functional>
#include <map>
#include <vector>

#include "llvd/config_file.hpp"
#include "llvd/metrics.hpp"
#include "llvd/model.hpp"

// Training: Adam over gradients from full backpropagation through the
// clip (the tape spans every frame, so the recurrence is trained through
// time, not truncated). Each step draws one noise level, crops one window
// per clip, and optimizes the composite loss averaged over the frames.

namespace llvd {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient L2 cap; 0 disables clipping
  int64_t steps = 1000;
  int64_t batch = 4;
  int64_t crop = 128;   // square crop edge; 0 trains on full frames
  int64_t frames = 25;  // clip length after mirror extension
  std::vector<double> sigmas = {10, 20, 30, 40, 50};  // 8-bit-scale noise levels
  uint64_t seed = 1;
  int64_t log_every = 50;
  int64_t checkpoint_every = 0;  // 0 disables the periodic hook
  bool bayer = false;            // even crop offsets to preserve a 2x2 CFA tiling
  double lambda_l1 = 0.1;
  double lambda_ssim = 0.01;

  void validate() const;
};

/// train.* keys <-> TrainConfig; absent keys keep the defaults.
TrainConfig train_config_from(const KeyValues& kv);
KeyValues train_config_to_kv(const TrainConfig& cfg);

/// Adam with bias correction. Moment buffers are double precision and
/// keyed by parameter name, so they survive across tape epochs.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps);

  struct StepInfo {
    double grad_norm = 0;  // global L2 norm before clipping
    double scale = 1;      // factor applied to satisfy clip_norm
  };

  /// One update over every parameter that received a gradient. When
  /// clip_norm > 0 and the global norm exceeds it, all gradients are
  /// scaled by clip_norm / norm first.
  StepInfo step(Model& model, const GradientMap<float>& grads, double clip_norm = 0);

  int64_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

struct TrainLogEntry {
  int64_t step = 0;   // 0-based
  double loss = 0;
  double grad_norm = 0;
  double sigma = 0;
  double wall_ms = 0;  // duration of this step
};

using TrainLogger = std::function<void(const TrainLogEntry&)>;
using CheckpointHook = std::function<void(const Model&, int64_t step)>;

struct TrainResult {
  int64_t steps_run = 0;
  double first_loss = 0;
  double final_loss = 0;
  std::vector<double> loss_history;
  // Set when a non-finite loss stopped training. The parameters are left
  // at the last finite update, never at the poisoned one.
  bool aborted_non_finite = false;
  int64_t abort_step = -1;
};

/// Optimizes `model` on clean clips (lists of [C,H,W] frames in [0,1]).
/// Noise is synthesized on the fly; everything is deterministic in
/// cfg.seed. The logger fires every log_every steps and on the last step;
/// the hook fires every checkpoint_every steps when configured.
TrainResult train(Model& model, const std::vector<std::vector<Tensor>>& clips,
                  const TrainConfig& cfg, const TrainLogger& log = nullptr,
                  const CheckpointHook& checkpoint = nullptr);

}  // namespace llvd
