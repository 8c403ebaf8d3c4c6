// Command-line front end: noise synthesis, training, denoising, quality
// evaluation, cost accounting, and a quick self-check. Exit codes: 0 on
// success, 1 on runtime failure (one-line cause on stderr), 2 on bad
// arguments.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llvd/checkpoint.hpp"
#include "llvd/config_file.hpp"
#include "llvd/data.hpp"
#include "llvd/flops.hpp"
#include "llvd/metrics.hpp"
#include "llvd/model.hpp"
#include "llvd/ops.hpp"
#include "llvd/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw llvd::IoError(dir.string() + ": no .ppm/.pgm frames");
  return files;
}

std::vector<llvd::Tensor> load_frames(const std::string& input) {
  if (fs::is_directory(input)) {
    std::vector<llvd::Tensor> frames;
    for (const auto& f : list_images(input)) frames.push_back(llvd::load_image(f.string()));
    return frames;
  }
  return {llvd::load_image(input)};
}

// Output naming: directory inputs keep their frame basenames; a file
// input writes exactly to --output.
std::vector<std::string> output_paths(const std::string& input, const std::string& output) {
  if (!fs::is_directory(input)) return {output};
  fs::create_directories(output);
  std::vector<std::string> out;
  for (const auto& f : list_images(input)) out.push_back((fs::path(output) / f.filename()).string());
  return out;
}

std::string fmt_db(double v) {
  if (std::isinf(v)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

json json_db(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

struct NoiseArgs {
  std::string input, output;
  double sigma = 25.0;
  uint64_t seed = 1;
  uint64_t sequence = 0;
  int bits = 8;
};

int run_noise(const NoiseArgs& a) {
  const auto frames = load_frames(a.input);
  const auto noised = llvd::add_awgn_sequence(frames, a.sigma, a.seed, a.sequence);
  const auto paths = output_paths(a.input, a.output);
  for (size_t i = 0; i < noised.size(); ++i) llvd::save_image(paths[i], noised[i], a.bits);
  std::printf("wrote %zu frame%s (sigma %g, seed %" PRIu64 ")\n", noised.size(),
              noised.size() == 1 ? "" : "s", a.sigma, a.seed);
  return 0;
}

struct TrainArgs {
  std::string config, data, output, init;
};

int run_train(const TrainArgs& a) {
  const llvd::KeyValues kv = llvd::KeyValues::load(a.config);
  const llvd::TrainConfig tc = llvd::train_config_from(kv);

  llvd::Model model = a.init.empty() ? llvd::Model(llvd::model_config_from(kv))
                                     : llvd::load_checkpoint(a.init);
  if (a.init.empty()) model.init_params(tc.seed);

  const auto clips = llvd::load_clip_tree(a.data);
  std::printf("training on %zu clip%s, %" PRId64 " steps, %" PRId64 " parameters\n",
              clips.size(), clips.size() == 1 ? "" : "s", tc.steps, model.param_count());

  const auto logger = [](const llvd::TrainLogEntry& e) {
    std::printf("step %" PRId64 " loss %.6f wall_ms %.1f\n", e.step, e.loss, e.wall_ms);
    std::fflush(stdout);
  };
  const auto hook = [&](const llvd::Model& m, int64_t) { llvd::save_checkpoint(a.output, m); };

  const llvd::TrainResult res = llvd::train(model, clips, tc, logger, hook);
  llvd::save_checkpoint(a.output, model);
  if (res.aborted_non_finite) {
    std::cerr << "error: non-finite loss at step " << res.abort_step
              << "; kept the last finite parameters\n";
    return 1;
  }
  std::printf("done: %" PRId64 " steps, final loss %.6f, checkpoint %s\n", res.steps_run,
              res.final_loss, a.output.c_str());
  return 0;
}

struct DenoiseArgs {
  std::string checkpoint, input, output, state_in, state_out;
  int bits = 8;
};

int run_denoise(const DenoiseArgs& a) {
  const llvd::Model model = llvd::load_checkpoint(a.checkpoint);
  llvd::RecurrentState state;
  if (!a.state_in.empty()) state = llvd::load_recurrent_state(a.state_in);

  const auto frames = load_frames(a.input);
  const auto paths = output_paths(a.input, a.output);
  for (size_t i = 0; i < frames.size(); ++i) {
    auto batched = llvd::stack_batch(std::vector<llvd::Tensor>{frames[i]});
    auto denoised = llvd::unstack_batch(model.step(batched, state)).front();
    llvd::save_image(paths[i], denoised, a.bits);
  }
  if (!a.state_out.empty()) llvd::save_recurrent_state(a.state_out, state);
  std::printf("denoised %zu frame%s\n", frames.size(), frames.size() == 1 ? "" : "s");
  return 0;
}

struct EvalArgs {
  std::string checkpoint, noisy, clean;
  bool as_json = false;
};

int run_eval(const EvalArgs& a) {
  const auto noisy = load_frames(a.noisy);
  const auto clean = load_frames(a.clean);
  if (noisy.size() != clean.size()) {
    throw llvd::ShapeError("eval: " + std::to_string(noisy.size()) + " noisy frames vs " +
                           std::to_string(clean.size()) + " clean frames");
  }

  std::vector<llvd::Tensor> restored = noisy;
  if (!a.checkpoint.empty()) {
    const llvd::Model model = llvd::load_checkpoint(a.checkpoint);
    restored = model.run_sequence(noisy);
  }

  const std::vector<double> per_frame = llvd::psnr_per_frame(restored, clean);
  const double pooled = llvd::psnr_sequence(restored, clean);

  // Mean per-frame SSIM; skipped when frames are smaller than the window.
  const llvd::SsimOptions sopt;
  double ssim_sum = 0;
  bool ssim_ok = clean[0].dims[1] >= sopt.window && clean[0].dims[2] >= sopt.window;
  if (ssim_ok) {
    for (size_t i = 0; i < restored.size(); ++i) {
      auto r = llvd::stack_batch(std::vector<llvd::Tensor>{restored[i]});
      auto c = llvd::stack_batch(std::vector<llvd::Tensor>{clean[i]});
      ssim_sum += static_cast<double>((*llvd::ssim(r, c, sopt).values)[0]);
    }
    ssim_sum /= static_cast<double>(restored.size());
  }

  if (a.as_json) {
    json j;
    j["frames"] = json::array();
    for (double v : per_frame) j["frames"].push_back(json_db(v));
    j["psnr"] = json_db(pooled);
    if (ssim_ok) j["ssim"] = ssim_sum;
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    for (size_t i = 0; i < per_frame.size(); ++i) {
      std::printf("frame %zu psnr %s\n", i, fmt_db(per_frame[i]).c_str());
    }
    std::printf("sequence psnr %s", fmt_db(pooled).c_str());
    if (ssim_ok) std::printf(" ssim %.4f", ssim_sum);
    std::printf("\n");
  }
  return 0;
}

struct FlopsArgs {
  std::string config;
  int64_t width = 854;
  int64_t height = 480;
  bool as_json = false;
  bool probe = false;
  bool per_layer = false;
};

int run_flops(const FlopsArgs& a) {
  const llvd::ModelConfig cfg = llvd::model_config_from(llvd::KeyValues::load(a.config));
  const llvd::CostReport rep = llvd::count_flops(cfg, a.height, a.width);

  uint64_t probed = 0;
  if (a.probe) probed = llvd::empirical_mac_probe(cfg, a.height, a.width);

  if (a.as_json) {
    json j;
    j["height"] = rep.height;
    j["width"] = rep.width;
    j["macs"] = rep.macs;
    j["bias_adds"] = rep.bias_adds;
    j["pointwise"] = rep.pointwise;
    j["flops"] = rep.flops();
    j["gflops"] = rep.gflops();
    if (a.per_layer) {
      j["layers"] = json::array();
      for (const auto& lc : rep.layers) {
        j["layers"].push_back({{"name", lc.name},
                               {"macs", lc.macs},
                               {"bias_adds", lc.bias_adds},
                               {"pointwise", lc.pointwise}});
      }
    }
    if (a.probe) j["probed_macs"] = probed;
    std::printf("%s\n", j.dump(2).c_str());
  } else {
    if (a.per_layer) {
      for (const auto& lc : rep.layers) {
        std::printf("%-16s macs %.0f bias_adds %.0f pointwise %.0f\n", lc.name.c_str(), lc.macs,
                    lc.bias_adds, lc.pointwise);
      }
    }
    std::printf("resolution %" PRId64 "x%" PRId64 "\n", rep.width, rep.height);
    std::printf("macs %.0f\nbias_adds %.0f\npointwise %.0f\nflops %.0f\ngflops %.3f\n", rep.macs,
                rep.bias_adds, rep.pointwise, rep.flops(), rep.gflops());
    if (a.probe) std::printf("probed_macs %" PRIu64 "\n", probed);
  }
  if (a.probe && static_cast<double>(probed) != rep.macs) {
    std::cerr << "error: instrumented count " << probed << " != analytic count " << rep.macs
              << "\n";
    return 1;
  }
  return 0;
}

bool check(const char* name, bool ok) {
  std::printf("[%s] %s\n", ok ? "ok" : "fail", name);
  return ok;
}

int run_selfcheck() {
  using llvd::Tensor;
  bool all = true;

  {  // 3x3 mean filter over 1..9 hits the center average exactly
    Tensor img = Tensor::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f / 9.0f);
    Tensor out = llvd::ops::conv2d(img, w, Tensor{}, 1, 0);
    all &= check("conv2d mean filter", std::fabs((*out.values)[0] - 5.0f) < 1e-6f);
  }
  {  // unit transposed conv scatters a 2x2 grid onto even positions
    Tensor in = Tensor::full({1, 1, 2, 2}, 1.0f);
    Tensor w = Tensor::full({1, 1, 1, 1}, 1.0f);
    Tensor out = llvd::ops::conv2d_transpose(in, w, Tensor{}, 2, 0, 0);
    bool ok = out.dims == std::vector<int64_t>{1, 1, 3, 3};
    if (ok) {
      const std::vector<float> want = {1, 0, 1, 0, 0, 0, 1, 0, 1};
      for (int i = 0; i < 9; ++i) ok &= (*out.values)[i] == want[i];
    }
    all &= check("conv2d_transpose scatter", ok);
  }
  {  // d(sum x^2)/dx = 2x
    llvd::Tape<float> tape;
    Tensor x = Tensor::from({4}, {1, -2, 3, 0.5f});
    tape.watch(x);
    auto grads = tape.backward(llvd::ops::sum(llvd::ops::mul(x, x)));
    const Tensor& g = grads.at(x);
    bool ok = true;
    for (int i = 0; i < 4; ++i) ok &= std::fabs((*g.values)[i] - 2 * (*x.values)[i]) < 1e-6f;
    all &= check("autodiff sum of squares", ok);
  }
  {  // a uniform error of 25.5 against an 8-bit peak is exactly 20 dB;
     // 25.5 is exactly representable, so no float rounding creeps in
    Tensor a = Tensor::zeros({2, 3, 4});
    Tensor b = Tensor::full({2, 3, 4}, 25.5f);
    all &= check("psnr uniform error", std::fabs(llvd::psnr(a, b, 255.0) - 20.0) < 1e-9);
  }
  {  // shuffle then unshuffle is the identity
    Tensor t = Tensor::zeros({1, 4, 3, 5});
    for (int64_t i = 0; i < t.numel(); ++i) (*t.values)[i] = static_cast<float>(i);
    Tensor rt = llvd::ops::pixel_unshuffle(llvd::ops::pixel_shuffle(t, 2), 2);
    all &= check("pixel shuffle round trip", *rt.values == *t.values);
  }
  {  // reflection indexing never repeats the endpoints
    const size_t want[5] = {0, 1, 2, 1, 0};
    bool ok = true;
    for (size_t i = 0; i < 5; ++i) ok &= llvd::mirror_index(i, 3) == want[i];
    all &= check("mirror indexing", ok);
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"recurrent video denoiser toolkit"};
  app.require_subcommand(1);

  NoiseArgs na;
  auto* noise = app.add_subcommand("noise", "Add Gaussian sensor noise to frames");
  noise->add_option("--input", na.input, "frame file or directory of frames")->required();
  noise->add_option("--output", na.output, "output file or directory")->required();
  noise->add_option("--sigma", na.sigma, "noise level on the 8-bit scale")
      ->check(CLI::NonNegativeNumber);
  noise->add_option("--seed", na.seed, "random seed");
  noise->add_option("--sequence", na.sequence, "stream id, one per clip");
  noise->add_option("--bits", na.bits, "output bit depth")->check(CLI::IsMember({8, 16}));

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a denoiser");
  train->add_option("--config", ta.config, "model.* / train.* config file")->required();
  train->add_option("--data", ta.data, "directory of clip directories")->required();
  train->add_option("--output", ta.output, "checkpoint to write")->required();
  train->add_option("--init", ta.init, "checkpoint to fine-tune from");

  DenoiseArgs da;
  auto* denoise = app.add_subcommand("denoise", "Denoise frames with a checkpoint");
  denoise->add_option("--checkpoint", da.checkpoint, "trained checkpoint")->required();
  denoise->add_option("--input", da.input, "frame file or directory")->required();
  denoise->add_option("--output", da.output, "output file or directory")->required();
  denoise->add_option("--state-in", da.state_in, "recurrent state to resume from");
  denoise->add_option("--state-out", da.state_out, "write recurrent state here");
  denoise->add_option("--bits", da.bits, "output bit depth")->check(CLI::IsMember({8, 16}));

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Measure restoration quality");
  eval->add_option("--noisy", ea.noisy, "noisy frames (file or directory)")->required();
  eval->add_option("--clean", ea.clean, "reference frames")->required();
  eval->add_option("--checkpoint", ea.checkpoint, "denoise with this checkpoint first");
  eval->add_flag("--json", ea.as_json, "machine-readable output");

  FlopsArgs fa;
  auto* flops = app.add_subcommand("flops", "Price one forward step");
  flops->add_option("--config", fa.config, "model.* config file")->required();
  flops->add_option("--width", fa.width, "frame width")->check(CLI::PositiveNumber);
  flops->add_option("--height", fa.height, "frame height")->check(CLI::PositiveNumber);
  flops->add_flag("--json", fa.as_json, "machine-readable output");
  flops->add_flag("--probe", fa.probe, "also run the instrumented forward step");
  flops->add_flag("--per-layer", fa.per_layer, "include the per-layer breakdown");

  auto* selfcheck = app.add_subcommand("selfcheck", "Run quick built-in sanity checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the parse error and usage hint
    return 2;
  }

  try {
    if (*noise) return run_noise(na);
    if (*train) return run_train(ta);
    if (*denoise) return run_denoise(da);
    if (*eval) return run_eval(ea);
    if (*flops) return run_flops(fa);
    if (*selfcheck) return run_selfcheck();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
