#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "llvd/mac_counter.hpp"
#include "llvd/ops.hpp"
#include "test_support.hpp"

using namespace llvd;

namespace {

// Plain inner product of two equally sized tensors, accumulated in double.
template <typename S>
double dot(const TensorT<S>& a, const TensorT<S>& b) {
  REQUIRE(a.numel() == b.numel());
  double acc = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) acc += double((*a.values)[i]) * double((*b.values)[i]);
  return acc;
}

}  // namespace

TEST_CASE("conv2d: 3x3 mean filter preserves a constant image") {
  Tensor x = Tensor::full({1, 1, 4, 4}, 5.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f / 9.0f);
  Tensor out = ops::conv2d(x, w, Tensor{}, 1, 0);
  REQUIRE(out.dims == std::vector<int64_t>{1, 1, 2, 2});
  for (int64_t i = 0; i < out.numel(); ++i) {
    CHECK((*out.values)[i] == doctest::Approx(5.0f).epsilon(1e-6));
  }
}

TEST_CASE("conv2d: 1x1 kernel is an affine map per pixel") {
  Tensor x = Tensor::from({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor w = Tensor::full({1, 1, 1, 1}, 2.0f);
  Tensor b = Tensor::full({1}, 0.5f);
  Tensor out = ops::conv2d(x, w, b, 1, 0);
  const std::vector<float> want = {2.5f, 4.5f, 6.5f, 8.5f};
  for (int i = 0; i < 4; ++i) CHECK((*out.values)[i] == want[i]);
}

TEST_CASE("conv2d: centered delta kernel with padding 1 is the identity") {
  NoiseStream rng(5, 0);
  Tensor x = test::random_tensor<float>({2, 3, 5, 7}, rng);
  Tensor w = Tensor::zeros({3, 3, 3, 3});
  for (int64_t c = 0; c < 3; ++c) w.at4(c, c, 1, 1) = 1.0f;
  Tensor out = ops::conv2d(x, w, Tensor{}, 1, 1);
  REQUIRE(out.dims == x.dims);
  for (int64_t i = 0; i < x.numel(); ++i) CHECK((*out.values)[i] == (*x.values)[i]);
}

TEST_CASE("conv2d: output extents follow the stride/padding formula") {
  Tensor x = Tensor::zeros({1, 2, 8, 9});
  Tensor w = Tensor::zeros({4, 2, 3, 3});
  CHECK(ops::conv2d(x, w, Tensor{}, 2, 1).dims == std::vector<int64_t>{1, 4, 4, 5});
  CHECK(ops::conv2d(x, w, Tensor{}, 1, 0).dims == std::vector<int64_t>{1, 4, 6, 7});
}

TEST_CASE("conv2d: shape violations are rejected with ShapeError") {
  Tensor x = Tensor::zeros({1, 2, 8, 8});
  CHECK_THROWS_AS(ops::conv2d(x, Tensor::zeros({4, 3, 3, 3}), Tensor{}, 1, 1), ShapeError);
  CHECK_THROWS_AS(ops::conv2d(x, Tensor::zeros({4, 2, 3, 3}), Tensor::zeros({5}), 1, 1),
                  ShapeError);
  CHECK_THROWS_AS(ops::conv2d(Tensor::zeros({8, 8}), Tensor::zeros({4, 2, 3, 3}), Tensor{}, 1, 1),
                  ShapeError);
  CHECK_THROWS_AS(ops::conv2d(x, Tensor::zeros({4, 2, 9, 9}), Tensor{}, 1, 0), ShapeError);
}

TEST_CASE("conv2d_transpose: 2x2 ones kernel at stride 2 tiles exactly") {
  Tensor x = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor out = ops::conv2d_transpose(x, w, Tensor{}, 2, 0);
  REQUIRE(out.dims == std::vector<int64_t>{1, 1, 4, 4});
  for (int64_t i = 0; i < out.numel(); ++i) CHECK((*out.values)[i] == 1.0f);
}

TEST_CASE("conv2d_transpose: output_padding 1 gives an exact 2x upsample shape") {
  Tensor x = Tensor::zeros({1, 2, 5, 6});
  Tensor w = Tensor::zeros({2, 3, 3, 3});
  Tensor out = ops::conv2d_transpose(x, w, Tensor{}, 2, 1, 1);
  CHECK(out.dims == std::vector<int64_t>{1, 3, 10, 12});
}

TEST_CASE("conv2d_transpose: bias fills every output cell including padded edge") {
  Tensor x = Tensor::zeros({1, 1, 2, 2});
  Tensor w = Tensor::zeros({1, 1, 3, 3});
  Tensor b = Tensor::full({1}, 7.0f);
  Tensor out = ops::conv2d_transpose(x, w, b, 2, 1, 1);
  REQUIRE(out.dims == std::vector<int64_t>{1, 1, 4, 4});
  for (int64_t i = 0; i < out.numel(); ++i) CHECK((*out.values)[i] == 7.0f);
}

TEST_CASE("conv2d_transpose is the exact adjoint of conv2d") {
  NoiseStream rng(11, 0);
  struct Case {
    std::vector<int64_t> in;
    int64_t cout;
    int64_t k;
    int stride, padding;
    // Restores the forward input size when the strided output rounds down.
    int output_padding;
  };
  const std::vector<Case> cases = {
      {{1, 1, 6, 6}, 1, 3, 1, 1, 0},
      {{2, 3, 8, 8}, 5, 3, 2, 1, 1},
      {{1, 4, 7, 9}, 2, 5, 1, 2, 0},
      {{1, 2, 9, 9}, 3, 3, 2, 0, 0},
  };
  for (const Case& c : cases) {
    CAPTURE(c.in[2]);
    CAPTURE(c.stride);
    TensorT<double> x = test::random_tensor<double>(c.in, rng);
    TensorT<double> w = test::random_tensor<double>({c.cout, c.in[1], c.k, c.k}, rng);
    TensorT<double> fwd = ops::conv2d(x, w, TensorT<double>{}, c.stride, c.padding);
    TensorT<double> y = test::random_tensor<double>(fwd.dims, rng);
    // conv2d_transpose takes [Cin, Cout, k, k]: the conv weight reinterpreted
    // with its first two extents swapped in meaning, no data movement.
    TensorT<double> back =
        ops::conv2d_transpose(y, w, TensorT<double>{}, c.stride, c.padding, c.output_padding);
    REQUIRE(back.dims == x.dims);
    const double lhs = dot(fwd, y);
    const double rhs = dot(x, back);
    CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max({std::abs(lhs), std::abs(rhs), 1e-12}));
  }
}

TEST_CASE("pixel_unshuffle: 4x4 plane splits into the four parities") {
  std::vector<float> seq(16);
  for (int i = 0; i < 16; ++i) seq[i] = float(i);
  Tensor x = Tensor::from({1, 1, 4, 4}, seq);
  Tensor out = ops::pixel_unshuffle(x, 2);
  REQUIRE(out.dims == std::vector<int64_t>{1, 4, 2, 2});
  const std::vector<std::vector<float>> planes = {
      {0, 2, 8, 10}, {1, 3, 9, 11}, {4, 6, 12, 14}, {5, 7, 13, 15}};
  for (int c = 0; c < 4; ++c) {
    for (int i = 0; i < 4; ++i) CHECK((*out.values)[c * 4 + i] == planes[c][i]);
  }
}

TEST_CASE("pixel_shuffle: four 1x1 channels interleave into one 2x2 plane") {
  Tensor x = Tensor::from({1, 4, 1, 1}, {10, 20, 30, 40});
  Tensor out = ops::pixel_shuffle(x, 2);
  REQUIRE(out.dims == std::vector<int64_t>{1, 1, 2, 2});
  CHECK((*out.values)[0] == 10);
  CHECK((*out.values)[1] == 20);
  CHECK((*out.values)[2] == 30);
  CHECK((*out.values)[3] == 40);
}

TEST_CASE("pixel shuffle and unshuffle invert each other") {
  NoiseStream rng(17, 0);
  for (int r : {1, 2, 4}) {
    CAPTURE(r);
    Tensor x = test::random_tensor<float>({2, 3, int64_t(4) * r, int64_t(2) * r}, rng);
    Tensor round = ops::pixel_shuffle(ops::pixel_unshuffle(x, r), r);
    REQUIRE(round.dims == x.dims);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK((*round.values)[i] == (*x.values)[i]);

    Tensor y = test::random_tensor<float>({1, 3 * r * r, 4, 5}, rng);
    Tensor round2 = ops::pixel_unshuffle(ops::pixel_shuffle(y, r), r);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK((*round2.values)[i] == (*y.values)[i]);
  }
}

TEST_CASE("pixel ops reject indivisible extents") {
  CHECK_THROWS_AS(ops::pixel_unshuffle(Tensor::zeros({1, 1, 5, 4}), 2), ShapeError);
  CHECK_THROWS_AS(ops::pixel_shuffle(Tensor::zeros({1, 3, 4, 4}), 2), ShapeError);
}

TEST_CASE("concat_channels stacks in argument order; slice_channels takes it apart") {
  NoiseStream rng(23, 0);
  Tensor a = test::random_tensor<float>({1, 2, 3, 3}, rng);
  Tensor b = test::random_tensor<float>({1, 5, 3, 3}, rng);
  Tensor cat = ops::concat_channels(a, b);
  REQUIRE(cat.dims == std::vector<int64_t>{1, 7, 3, 3});
  Tensor a2 = ops::slice_channels(cat, 0, 2);
  Tensor b2 = ops::slice_channels(cat, 2, 5);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK((*a2.values)[i] == (*a.values)[i]);
  for (int64_t i = 0; i < b.numel(); ++i) CHECK((*b2.values)[i] == (*b.values)[i]);

  CHECK_THROWS_AS(ops::concat_channels(a, Tensor::zeros({1, 2, 4, 3})), ShapeError);
  CHECK_THROWS_AS(ops::slice_channels(cat, 5, 3), ShapeError);
}

TEST_CASE("scale and add_scalar are elementwise affine maps") {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  Tensor s = ops::scale(x, 2.0f);
  Tensor t = ops::add_scalar(x, -1.0f);
  CHECK((*s.values)[2] == 6.0f);
  CHECK((*t.values)[0] == 0.0f);
}

TEST_CASE("MAC counting: 3x3 conv over one 8x8 plane executes 576 multiplies") {
  Tensor x = Tensor::full({1, 1, 8, 8}, 1.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  MacCountingScope scope;
  Tensor out = ops::conv2d(x, w, Tensor{}, 1, 1);
  CHECK(scope.total() == 576);  // 3*3 * 1*1 * 8*8
  (void)out;
}

TEST_CASE("MAC counting: transpose conv tallies k*k*Cin*Cout per input cell") {
  Tensor x = Tensor::full({1, 2, 4, 5}, 1.0f);
  Tensor w = Tensor::full({2, 3, 3, 3}, 1.0f);
  MacCountingScope scope;
  (void)ops::conv2d_transpose(x, w, Tensor{}, 2, 1, 1);
  CHECK(scope.total() == uint64_t(3 * 3) * 2 * 3 * 4 * 5);
}

TEST_CASE("MAC counting scopes do not nest") {
  MacCountingScope outer;
  CHECK(MacCountingScope::active());
  CHECK_THROWS_AS(MacCountingScope{}, std::logic_error);
}

TEST_CASE("counted and fast convolution paths agree bit for bit") {
  NoiseStream rng(31, 0);
  Tensor x = test::random_tensor<float>({2, 3, 9, 7}, rng);
  Tensor w = test::random_tensor<float>({4, 3, 3, 3}, rng);
  Tensor b = test::random_tensor<float>({4}, rng);
  Tensor fast = ops::conv2d(x, w, b, 2, 1);
  Tensor counted;
  {
    MacCountingScope scope;
    counted = ops::conv2d(x, w, b, 2, 1);
    CHECK(scope.total() > 0);
  }
  REQUIRE(counted.dims == fast.dims);
  for (int64_t i = 0; i < fast.numel(); ++i) CHECK((*counted.values)[i] == (*fast.values)[i]);

  Tensor wt = test::random_tensor<float>({3, 2, 3, 3}, rng);
  Tensor fast_t = ops::conv2d_transpose(x, wt, Tensor{}, 2, 1, 1);
  Tensor counted_t;
  {
    MacCountingScope scope;
    counted_t = ops::conv2d_transpose(x, wt, Tensor{}, 2, 1, 1);
  }
  for (int64_t i = 0; i < fast_t.numel(); ++i) {
    CHECK((*counted_t.values)[i] == (*fast_t.values)[i]);
  }
}

TEST_CASE("reductions accumulate in double") {
  // 1e8 + 1 repeated: float accumulation would lose the +1 terms entirely.
  std::vector<float> vals(64, 1.0f);
  vals[0] = 1e8f;
  Tensor x = Tensor::from({64}, vals);
  CHECK((*ops::sum(x).values)[0] == doctest::Approx(1e8f + 63.0f));
}
