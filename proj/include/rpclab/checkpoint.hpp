#pragma once

#include <string>

#include "rpclab/agent.hpp"

namespace rpclab::cli {

// Binary checkpoint: magic "RPCCKPT1", then u32 latent_dim, u32 variant,
// u32 tensor count; per tensor u32 name length, name bytes, u32 rank,
// u32 shape entries, then little-endian f64 values. log_lambda travels as a
// named rank-0 tensor.
inline constexpr char kCheckpointMagic[8] = {'R', 'P', 'C', 'C', 'K', 'P', 'T', '1'};

void save_checkpoint(const agent::AgentParams& params, const std::string& path);
agent::AgentParams load_checkpoint(const std::string& path);

}  // namespace rpclab::cli
