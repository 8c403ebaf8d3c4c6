#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llvd/model.hpp"

// Arithmetic cost accounting for one forward step. Two views exist on
// purpose: an analytic model priced straight from the layer plan, and an
// instrumented execution that tallies real multiplies. Tests pin them to
// each other so the published numbers cannot drift from the code.

namespace llvd {

struct LayerCost {
  std::string name;
  double macs = 0;
  double bias_adds = 0;
  double pointwise = 0;
};

struct CostReport {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<LayerCost> layers;

  double macs = 0;       // multiply-accumulates in conv / tconv / LSTM gates
  double bias_adds = 0;  // one add per biased output element
  double pointwise = 0;  // LSTM state arithmetic (elementwise mul/add)

  /// Headline figure: two flops per MAC plus the extra additions. Cheap
  /// elementwise activations and skip additions are excluded; they sit
  /// orders of magnitude below the convolutions.
  double flops() const { return 2.0 * macs + bias_adds + pointwise; }
  double gflops() const { return flops() * 1e-9; }
};

/// Prices one forward step at input resolution h x w from the layer plan
/// alone; nothing is executed. Layer areas are exact fractions of h*w, so
/// any resolution is accepted and the total scales exactly with pixel
/// count: count_flops(a*h, a*w) = a^2 * count_flops(h, w).
CostReport count_flops(const ModelConfig& cfg, int64_t h, int64_t w);

/// Runs one instrumented forward step on a zero frame and returns the
/// executed multiply count. h and w must be valid model input sizes
/// (multiples of cfg.spatial_multiple()), where this agrees exactly with
/// count_flops(cfg, h, w).macs.
uint64_t empirical_mac_probe(const ModelConfig& cfg, int64_t h, int64_t w);

}  // namespace llvd
