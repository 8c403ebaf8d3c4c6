#include <doctest.h>

#include <vector>

#include "llvd/model.hpp"
#include "test_support.hpp"

using namespace llvd;
using llvd::test::random_tensor;
using llvd::test::tiny_config;
using llvd::test::tiny_config_full_res;

namespace {

bool identical(const Tensor& a, const Tensor& b) {
  if (a.dims != b.dims) return false;
  for (int64_t i = 0; i < a.numel(); ++i) {
    if ((*a.values)[i] != (*b.values)[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config validation rejects unusable architectures") {
  ModelConfig cfg = tiny_config();
  cfg.validate();  // the fixture itself must be valid

  SUBCASE("even kernel") {
    cfg.kernel = 4;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("hidden width must match the last stage") {
    cfg.lstm_hidden = 12;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("no stages and no recurrence") {
    cfg.stage_widths.clear();
    cfg.lstm_layers = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("conv_per_stage below two") {
    cfg.conv_per_stage = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("zero shuffle") {
    cfg.shuffle = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("spatial multiple combines shuffle and downsampling") {
  CHECK(tiny_config().spatial_multiple() == 8);          // shuffle 2, two downsamples
  CHECK(tiny_config_full_res().spatial_multiple() == 4);  // two downsamples only
  ModelConfig lstm_only;
  lstm_only.stage_widths.clear();
  lstm_only.lstm_hidden = 4;
  lstm_only.shuffle = 2;
  CHECK(lstm_only.spatial_multiple() == 2);
}

TEST_CASE("parameters carry the planned names and shapes") {
  Model model(tiny_config());  // trunk input is 3 * 2 * 2 = 12 channels

  CHECK(model.param("enc.s1.c1.weight").dims == std::vector<int64_t>{4, 12, 3, 3});
  CHECK(model.param("enc.s1.c2.weight").dims == std::vector<int64_t>{4, 4, 3, 3});
  CHECK(model.param("enc.s2.c1.weight").dims == std::vector<int64_t>{6, 4, 3, 3});
  CHECK(model.param("enc.s3.c2.weight").dims == std::vector<int64_t>{8, 8, 3, 3});
  // Gate stack: four gates of hidden width 8 over input 8 + hidden 8.
  CHECK(model.param("lstm.l1.gates.weight").dims == std::vector<int64_t>{32, 16, 3, 3});
  CHECK(model.param("lstm.l2.gates.bias").dims == std::vector<int64_t>{32});
  // Transposed convs store [Cin, Cout, k, k].
  CHECK(model.param("dec.s2.c1.weight").dims == std::vector<int64_t>{6, 6, 3, 3});
  CHECK(model.param("dec.s3.c2.weight").dims == std::vector<int64_t>{12, 4, 3, 3});
  CHECK(model.param("residual.proj.weight").dims == std::vector<int64_t>{12, 12, 1, 1});

  CHECK_THROWS_AS(model.param("enc.s9.c1.weight"), ValueError);
  CHECK(model.param_count() > 0);
}

TEST_CASE("initialization is deterministic in the seed") {
  Model a(tiny_config()), b(tiny_config()), c(tiny_config());
  a.init_params(5);
  b.init_params(5);
  c.init_params(6);
  bool same = true, differ = false;
  for (size_t i = 0; i < a.params().size(); ++i) {
    if (!identical(a.params()[i].second, b.params()[i].second)) same = false;
    if (!identical(a.params()[i].second, c.params()[i].second)) differ = true;
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("forget-gate bias block opens at one") {
  Model model(tiny_config());
  model.init_params(1);
  const Tensor& b = model.param("lstm.l1.gates.bias");
  REQUIRE(b.numel() == 32);
  for (int64_t i = 0; i < 32; ++i) {
    const float want = (i >= 8 && i < 16) ? 1.0f : 0.0f;
    CHECK((*b.values)[i] == want);
  }
}

TEST_CASE("latent and recurrent state sit at a quarter of the input resolution") {
  Model model(tiny_config_full_res());
  model.init_params(2);
  NoiseStream rng(50, 0);
  Tensor frame = random_tensor<float>({1, 3, 16, 24}, rng, 0, 1);
  RecurrentState state;
  Tensor out = model.step(frame, state);
  CHECK(out.dims == frame.dims);
  REQUIRE(state.layers.size() == 2);
  CHECK(state.layers[0].h.dims == std::vector<int64_t>{1, 8, 4, 6});
  CHECK(state.layers[1].c.dims == std::vector<int64_t>{1, 8, 4, 6});
}

TEST_CASE("a fresh stream starts from an all-zero recurrent state") {
  Model model(tiny_config());
  model.init_params(3);
  NoiseStream rng(51, 0);
  Tensor frame = random_tensor<float>({1, 3, 16, 16}, rng, 0, 1);

  RecurrentState lazy;
  Tensor out_lazy = model.step(frame, lazy);

  // Explicit zero tensors of the latent shape must reproduce it exactly.
  RecurrentState zeros;
  zeros.layers.resize(2);
  for (auto& l : zeros.layers) {
    l.h = Tensor::zeros({1, 8, 2, 2});
    l.c = Tensor::zeros({1, 8, 2, 2});
  }
  Tensor out_zeros = model.step(frame, zeros);
  CHECK(identical(out_lazy, out_zeros));
}

TEST_CASE("outputs stay strictly inside the unit interval") {
  Model model(tiny_config());
  model.init_params(4);
  NoiseStream rng(52, 0);
  Tensor frame = random_tensor<float>({2, 3, 16, 16}, rng, -0.5, 1.5);
  RecurrentState state;
  Tensor out = model.step(frame, state);
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK((*out.values)[i] > 0.0f);
    CHECK((*out.values)[i] < 1.0f);
  }
}

TEST_CASE("forward steps are deterministic") {
  Model a(tiny_config()), b(tiny_config());
  a.init_params(7);
  b.init_params(7);
  NoiseStream rng(53, 0);
  Tensor frame = random_tensor<float>({1, 3, 16, 16}, rng, 0, 1);
  RecurrentState sa, sb;
  CHECK(identical(a.step(frame, sa), b.step(frame, sb)));
  CHECK(identical(a.step(frame, sa), b.step(frame, sb)));  // second frame too
}

TEST_CASE("the recurrent state carries information between frames") {
  Model model(tiny_config());
  model.init_params(8);
  NoiseStream rng(54, 0);
  Tensor frame = random_tensor<float>({1, 3, 16, 16}, rng, 0, 1);
  RecurrentState state;
  Tensor first = model.step(frame, state);
  Tensor second = model.step(frame, state);
  CHECK_FALSE(identical(first, second));  // same input, evolved state
}

TEST_CASE("step validates rank, channels, and spatial multiples") {
  Model model(tiny_config());
  model.init_params(9);
  RecurrentState state;
  CHECK_THROWS_AS(model.step(Tensor::zeros({3, 16, 16}), state), ShapeError);
  CHECK_THROWS_AS(model.step(Tensor::zeros({1, 4, 16, 16}), state), ShapeError);
  CHECK_THROWS_AS(model.step(Tensor::zeros({1, 3, 12, 16}), state), ShapeError);
}

TEST_CASE("state bound to one resolution rejects another") {
  Model model(tiny_config());
  model.init_params(10);
  RecurrentState state;
  (void)model.step(Tensor::zeros({1, 3, 16, 16}), state);
  CHECK_THROWS_AS(model.step(Tensor::zeros({1, 3, 24, 24}), state), ShapeError);
}

TEST_CASE("run_sequence equals manual stepping from a fresh state") {
  Model model(tiny_config());
  model.init_params(11);
  NoiseStream rng(55, 0);
  std::vector<Tensor> frames;
  for (int t = 0; t < 4; ++t) frames.push_back(random_tensor<float>({3, 16, 16}, rng, 0, 1));

  auto seq = model.run_sequence(frames);
  REQUIRE(seq.size() == 4);

  RecurrentState state;
  for (int t = 0; t < 4; ++t) {
    Tensor manual = unstack_batch(model.step(stack_batch(std::vector<Tensor>{frames[t]}), state)).front();
    CHECK(identical(seq[t], manual));
  }
}

TEST_CASE("a model without recurrence is stateless") {
  ModelConfig cfg = tiny_config();
  cfg.lstm_layers = 0;
  Model model(cfg);
  model.init_params(12);
  for (const auto& [name, p] : model.params()) {
    CHECK(name.find("lstm") == std::string::npos);
  }
  NoiseStream rng(56, 0);
  Tensor frame = random_tensor<float>({1, 3, 16, 16}, rng, 0, 1);
  RecurrentState state;
  Tensor a = model.step(frame, state);
  Tensor b = model.step(frame, state);
  CHECK(state.layers.empty());
  CHECK(identical(a, b));  // no state, no change
}

TEST_CASE("carrying the state across a split reproduces the unbroken run") {
  Model model(tiny_config());
  model.init_params(14);
  NoiseStream rng(58, 0);
  std::vector<Tensor> frames;
  for (int t = 0; t < 6; ++t) frames.push_back(random_tensor<float>({3, 16, 16}, rng, 0, 1));
  const auto whole = model.run_sequence(frames);

  for (size_t cut = 1; cut < frames.size(); ++cut) {
    CAPTURE(cut);
    std::vector<Tensor> split;
    RecurrentState first_half;
    for (size_t t = 0; t < cut; ++t) {
      split.push_back(unstack_batch(model.step(stack_batch(std::vector<Tensor>{frames[t]}), first_half)).front());
    }
    // The state object is the only thing handed across the split.
    RecurrentState second_half = std::move(first_half);
    for (size_t t = cut; t < frames.size(); ++t) {
      split.push_back(unstack_batch(model.step(stack_batch(std::vector<Tensor>{frames[t]}), second_half)).front());
    }
    for (size_t t = 0; t < frames.size(); ++t) CHECK(identical(split[t], whole[t]));
  }
}

TEST_CASE("future frames cannot influence past outputs") {
  Model model(tiny_config());
  model.init_params(15);
  NoiseStream rng(59, 0);
  std::vector<Tensor> frames;
  for (int t = 0; t < 5; ++t) frames.push_back(random_tensor<float>({3, 16, 16}, rng, 0, 1));

  const auto base = model.run_sequence(frames);

  auto perturbed = frames;
  perturbed[3] = random_tensor<float>({3, 16, 16}, rng, 0, 1);
  const auto out = model.run_sequence(perturbed);

  for (int t = 0; t < 3; ++t) CHECK(identical(out[t], base[t]));  // strictly before the change
  CHECK_FALSE(identical(out[3], base[3]));  // the change itself is visible
  CHECK_FALSE(identical(out[4], base[4]));  // and propagates forward
}

TEST_CASE("the recurrence-only variant runs through 1x1 projections") {
  ModelConfig cfg;
  cfg.stage_widths.clear();
  cfg.lstm_hidden = 4;
  cfg.lstm_layers = 2;
  cfg.in_channels = 3;
  cfg.shuffle = 2;
  Model model(cfg);
  model.init_params(13);
  CHECK(model.param("head.in_proj.weight").dims == std::vector<int64_t>{4, 12, 1, 1});
  CHECK(model.param("head.out_proj.weight").dims == std::vector<int64_t>{12, 4, 1, 1});

  NoiseStream rng(57, 0);
  Tensor frame = random_tensor<float>({1, 3, 8, 8}, rng, 0, 1);
  RecurrentState state;
  Tensor out = model.step(frame, state);
  CHECK(out.dims == frame.dims);
  CHECK(state.layers[0].h.dims == std::vector<int64_t>{1, 4, 4, 4});
}
