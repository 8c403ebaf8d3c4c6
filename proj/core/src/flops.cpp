#include "llvd/flops.hpp"

#include "llvd/mac_counter.hpp"

namespace llvd {

CostReport count_flops(const ModelConfig& cfg, int64_t h, int64_t w) {
  if (h < 1 || w < 1) throw ValueError("count_flops: resolution must be positive");
  const ArchPlan plan = build_plan(cfg);

  const double trunk_area = static_cast<double>(h) * static_cast<double>(w) /
                            (static_cast<double>(cfg.shuffle) * cfg.shuffle);
  auto area = [&](int depth) { return trunk_area / static_cast<double>(int64_t(1) << (2 * depth)); };

  CostReport rep;
  rep.height = h;
  rep.width = w;
  for (const LayerPlan& lp : plan.layers) {
    LayerCost lc;
    lc.name = lp.name;
    const double kk = static_cast<double>(lp.k) * lp.k;
    switch (lp.kind) {
      case LayerPlan::Kind::Conv:
      case LayerPlan::Kind::TConv:
        lc.macs = kk * static_cast<double>(lp.cin) * static_cast<double>(lp.cout) *
                  area(lp.area_depth);
        lc.bias_adds = static_cast<double>(lp.cout) * area(lp.bias_depth);
        break;
      case LayerPlan::Kind::Lstm: {
        const double a = area(lp.area_depth);
        const double hid = static_cast<double>(lp.cout);
        lc.macs = kk * static_cast<double>(lp.cin + lp.cout) * 4.0 * hid * a;
        lc.bias_adds = 4.0 * hid * a;
        // Cell update per hidden element: f*c + i*g is two multiplies and
        // one add, o*tanh(c') one more multiply.
        lc.pointwise = 4.0 * hid * a;
        break;
      }
    }
    rep.macs += lc.macs;
    rep.bias_adds += lc.bias_adds;
    rep.pointwise += lc.pointwise;
    rep.layers.push_back(std::move(lc));
  }
  return rep;
}

uint64_t empirical_mac_probe(const ModelConfig& cfg, int64_t h, int64_t w) {
  Model model(cfg);  // zero weights; the multiply count does not depend on values
  RecurrentState state;
  Tensor frame = Tensor::zeros({1, cfg.in_channels, h, w});
  MacCountingScope scope;
  model.step(frame, state);
  return scope.total();
}

}  // namespace llvd
