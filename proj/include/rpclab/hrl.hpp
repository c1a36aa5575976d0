#pragma once

#include <cstdint>
#include <vector>

#include "rpclab/agent.hpp"
#include "rpclab/envs.hpp"

namespace rpclab::hrl {

// A short program of latent behaviors, each unrolled open-loop through the
// prior for a fixed number of steps.
struct BehaviorPlan {
    std::vector<std::vector<double>> z_list;
    int segment_horizon = 0;
};

struct CemConfig {
    int population = 64;
    double elite_frac = 0.125;
    int iterations = 20;
    double init_stddev = 10.0;
    uint64_t seed = 0;

    void validate() const;
    int elite_count() const;
};

// Fully open-loop execution: the encoder is never consulted. Each segment
// starts from its commanded z; within a segment the latent advances through
// the prior mean after every action.
double plan_return(const agent::AgentParams& params, envs::Env& env, const BehaviorPlan& plan, uint64_t seed);

struct CemResult {
    BehaviorPlan best;
    double best_return = 0.0;
    std::vector<double> curve;  // best-so-far per iteration, non-decreasing
};

CemResult cem_optimize(const agent::AgentParams& params, envs::Env& env, int k, int segment_horizon,
                       const CemConfig& cem);

}  // namespace rpclab::hrl
