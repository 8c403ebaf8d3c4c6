#include "llvd/mac_counter.hpp"

#include <stdexcept>

namespace llvd {

namespace {
thread_local bool g_active = false;
thread_local uint64_t g_total = 0;
}  // namespace

MacCountingScope::MacCountingScope() {
  if (g_active) throw std::logic_error("MacCountingScope does not nest");
  g_active = true;
  g_total = 0;
}

MacCountingScope::~MacCountingScope() { g_active = false; }

uint64_t MacCountingScope::total() const { return g_total; }

bool MacCountingScope::active() { return g_active; }

void MacCountingScope::add(uint64_t macs) { g_total += macs; }

}  // namespace llvd
