#pragma once

#include <string>

#include "llvd/model.hpp"

// Model checkpoints and recurrent-state snapshots. A checkpoint is fully
// self-describing: it embeds the model configuration as config text, so
// loading needs no side files. Every parameter is shape-checked against
// the architecture rebuilt from that configuration.

namespace llvd {

/// Format: magic "LLVC", version byte, u32 config-text length + text,
/// u32 parameter count, then per parameter a u16 name length, the name,
/// and a tensor record.
void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

/// Format: magic "LLVS", version byte, u32 layer count, then per layer
/// the hidden and cell tensor records. Lets a denoiser resume a stream
/// across process boundaries.
void save_recurrent_state(const std::string& path, const RecurrentState& state);
RecurrentState load_recurrent_state(const std::string& path);

}  // namespace llvd
