#pragma once

#include <cstdint>

namespace llvd {

/// Instrumentation hook for the convolution kernels. While a scope is
/// active the kernels switch to a reference path that tallies every
/// executed multiply-accumulate; with no scope active the fast path runs
/// with zero overhead. Scopes do not nest.
class MacCountingScope {
 public:
  MacCountingScope();
  ~MacCountingScope();
  MacCountingScope(const MacCountingScope&) = delete;
  MacCountingScope& operator=(const MacCountingScope&) = delete;

  uint64_t total() const;

  static bool active();
  static void add(uint64_t macs);
};

}  // namespace llvd
