#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rpclab/agent.hpp"
#include "rpclab/envs.hpp"

namespace rpclab::cli {

// Flat key=value experiment description. Unknown keys are rejected and every
// field is validated with documented bounds.
struct RunConfig {
    std::string env = "pointmass";
    std::string variant = "rpc";
    double bitrate = 1.0;  // bits per observation
    int latent_dim = 8;
    std::vector<int> hidden = {64, 64};
    double lr = 3e-4;
    double dual_lr = 3e-4;
    int batch = 256;
    int64_t total_steps = 100000;
    int64_t replay_capacity = 100000;
    double gamma = 0.99;
    double tau = 0.005;
    uint64_t seed = 0;
    std::string out_dir = "run_out";
    int64_t eval_every = 1000;
    int eval_episodes = 5;
    std::optional<double> env_mass_scale;
    std::optional<double> env_friction_scale;
    std::optional<double> env_noise_scale;

    void validate() const;
};

// Keys understood by parse/override, in canonical order.
const std::vector<std::string>& config_keys();

RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text);
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Fully-resolved key=value text, suitable for echoing into the output dir.
std::string resolved_text(const RunConfig& cfg);

envs::EnvSpec env_spec_of(const RunConfig& cfg);
agent::AgentConfig to_agent_config(const RunConfig& cfg);

// Output root: $RPC_LAB_OUT when set, else the current directory.
std::string resolve_out_dir(const RunConfig& cfg);

}  // namespace rpclab::cli
