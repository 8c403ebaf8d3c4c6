#include "llvd/trainer.hpp"

#include <chrono>
#include <cmath>

#include "llvd/data.hpp"
#include "llvd/ops.hpp"

namespace llvd {

void TrainConfig::validate() const {
  if (lr <= 0) throw ConfigError("train: lr must be > 0");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (eps <= 0) throw ConfigError("train: eps must be > 0");
  if (clip_norm < 0) throw ConfigError("train: clip_norm must be >= 0");
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (crop < 0) throw ConfigError("train: crop must be >= 0");
  if (frames < 1) throw ConfigError("train: frames must be >= 1");
  if (sigmas.empty()) throw ConfigError("train: sigmas must not be empty");
  for (double s : sigmas) {
    if (s < 0) throw ConfigError("train: sigmas must be >= 0");
  }
  if (log_every < 1) throw ConfigError("train: log_every must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
}

TrainConfig train_config_from(const KeyValues& kv) {
  TrainConfig cfg;
  cfg.lr = kv.get_double("train.lr", cfg.lr);
  cfg.beta1 = kv.get_double("train.beta1", cfg.beta1);
  cfg.beta2 = kv.get_double("train.beta2", cfg.beta2);
  cfg.eps = kv.get_double("train.eps", cfg.eps);
  cfg.clip_norm = kv.get_double("train.clip_norm", cfg.clip_norm);
  cfg.steps = kv.get_int("train.steps", cfg.steps);
  cfg.batch = kv.get_int("train.batch", cfg.batch);
  cfg.crop = kv.get_int("train.crop", cfg.crop);
  cfg.frames = kv.get_int("train.frames", cfg.frames);
  cfg.sigmas = kv.get_double_list("train.sigmas", cfg.sigmas);
  cfg.seed = static_cast<uint64_t>(kv.get_int("train.seed", static_cast<int64_t>(cfg.seed)));
  cfg.log_every = kv.get_int("train.log_every", cfg.log_every);
  cfg.checkpoint_every = kv.get_int("train.checkpoint_every", cfg.checkpoint_every);
  cfg.bayer = kv.get_bool("train.bayer", cfg.bayer);
  cfg.lambda_l1 = kv.get_double("train.lambda_l1", cfg.lambda_l1);
  cfg.lambda_ssim = kv.get_double("train.lambda_ssim", cfg.lambda_ssim);
  cfg.validate();
  return cfg;
}

KeyValues train_config_to_kv(const TrainConfig& cfg) {
  KeyValues kv;
  // %.17g round-trips every double; std::to_string would flatten small
  // values like eps to "0.000000".
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  kv.set("train.lr", num(cfg.lr));
  kv.set("train.beta1", num(cfg.beta1));
  kv.set("train.beta2", num(cfg.beta2));
  kv.set("train.eps", num(cfg.eps));
  kv.set("train.clip_norm", num(cfg.clip_norm));
  kv.set("train.steps", std::to_string(cfg.steps));
  kv.set("train.batch", std::to_string(cfg.batch));
  kv.set("train.crop", std::to_string(cfg.crop));
  kv.set("train.frames", std::to_string(cfg.frames));
  std::string sig;
  for (size_t i = 0; i < cfg.sigmas.size(); ++i) {
    if (i) sig += ",";
    sig += num(cfg.sigmas[i]);
  }
  kv.set("train.sigmas", sig);
  kv.set("train.seed", std::to_string(cfg.seed));
  kv.set("train.log_every", std::to_string(cfg.log_every));
  kv.set("train.checkpoint_every", std::to_string(cfg.checkpoint_every));
  kv.set("train.bayer", cfg.bayer ? "true" : "false");
  kv.set("train.lambda_l1", num(cfg.lambda_l1));
  kv.set("train.lambda_ssim", num(cfg.lambda_ssim));
  return kv;
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

Adam::StepInfo Adam::step(Model& model, const GradientMap<float>& grads, double clip_norm) {
  StepInfo info;
  double norm_sq = 0;
  for (auto& [name, p] : model.params()) {
    if (!grads.contains(p)) continue;
    const Tensor& g = grads.at(p);
    const float* gp = g.data();
    for (int64_t i = 0; i < g.numel(); ++i) {
      norm_sq += static_cast<double>(gp[i]) * static_cast<double>(gp[i]);
    }
  }
  info.grad_norm = std::sqrt(norm_sq);
  if (clip_norm > 0 && info.grad_norm > clip_norm) info.scale = clip_norm / info.grad_norm;

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  for (auto& [name, p] : model.params()) {
    if (!grads.contains(p)) continue;
    const Tensor& g = grads.at(p);
    auto& [m, v] = moments_[name];
    if (m.empty()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    float* pp = p.data();
    const float* gp = g.data();
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double gi = static_cast<double>(gp[i]) * info.scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      pp[i] = static_cast<float>(pp[i] - lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
  return info;
}

TrainResult train(Model& model, const std::vector<std::vector<Tensor>>& clips,
                  const TrainConfig& cfg, const TrainLogger& log,
                  const CheckpointHook& checkpoint) {
  cfg.validate();
  if (clips.empty()) throw ValueError("train: no clips");
  for (const auto& clip : clips) {
    if (clip.empty()) throw ValueError("train: empty clip");
  }
  const int64_t mult = model.config().spatial_multiple();
  if (cfg.crop > 0 && cfg.crop % mult != 0) {
    throw ConfigError("train: crop " + std::to_string(cfg.crop) +
                      " is not a multiple of the model's spatial multiple " + std::to_string(mult));
  }

  Adam adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
  Tape<float> tape;
  TrainResult result;
  LossOptions loss_opt;
  loss_opt.lambda_l1 = cfg.lambda_l1;
  loss_opt.lambda_ssim = cfg.lambda_ssim;

  for (int64_t step = 0; step < cfg.steps; ++step) {
    const auto t_start = std::chrono::steady_clock::now();

    // Stream 0 belongs to weight init; step s draws from stream s+1.
    NoiseStream rng(cfg.seed, static_cast<uint64_t>(step) + 1);
    const double sigma = cfg.sigmas[rng.uniform_int(static_cast<int64_t>(cfg.sigmas.size()))];

    std::vector<std::vector<Tensor>> clean(cfg.batch);
    std::vector<std::vector<Tensor>> noisy(cfg.batch);
    for (int64_t b = 0; b < cfg.batch; ++b) {
      const auto& clip = clips[rng.uniform_int(static_cast<int64_t>(clips.size()))];
      auto frames = mirror_extend(clip, static_cast<size_t>(cfg.frames));
      if (cfg.crop > 0) {
        const CropRect rect = choose_crop(frames[0].dims[1], frames[0].dims[2], cfg.crop,
                                          cfg.crop, cfg.bayer, rng);
        frames = crop_sequence(frames, rect);
      }
      noisy[b].reserve(frames.size());
      for (const Tensor& f : frames) noisy[b].push_back(add_awgn(f, sigma, rng));
      clean[b] = std::move(frames);
    }

    model.watch_params(tape);
    RecurrentState state;
    Tensor total;
    for (int64_t t = 0; t < cfg.frames; ++t) {
      std::vector<Tensor> nb, cb;
      nb.reserve(cfg.batch);
      cb.reserve(cfg.batch);
      for (int64_t b = 0; b < cfg.batch; ++b) {
        nb.push_back(noisy[b][t]);
        cb.push_back(clean[b][t]);
      }
      Tensor pred = model.step(stack_batch(nb), state);
      Tensor frame_loss = composite_loss(pred, stack_batch(cb), loss_opt);
      total = (t == 0) ? frame_loss : ops::add(total, frame_loss);
    }
    Tensor loss = ops::scale(total, 1.0f / static_cast<float>(cfg.frames));
    const double loss_value = static_cast<double>((*loss.values)[0]);

    if (!std::isfinite(loss_value)) {
      result.aborted_non_finite = true;
      result.abort_step = step;
      tape.reset();  // drop the poisoned graph; parameters are untouched
      break;
    }

    GradientMap<float> grads = tape.backward(loss);
    const Adam::StepInfo info = adam.step(model, grads, cfg.clip_norm);

    const auto t_end = std::chrono::steady_clock::now();
    result.loss_history.push_back(loss_value);
    if (step == 0) result.first_loss = loss_value;
    result.final_loss = loss_value;
    result.steps_run = step + 1;

    if (log && (step % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      TrainLogEntry e;
      e.step = step;
      e.loss = loss_value;
      e.grad_norm = info.grad_norm;
      e.sigma = sigma;
      e.wall_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
      log(e);
    }
    if (checkpoint && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
      checkpoint(model, step);
    }
  }
  return result;
}

}  // namespace llvd
