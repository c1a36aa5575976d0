#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rpclab/agent.hpp"
#include "rpclab/envs.hpp"

namespace rpclab::evalh {

using Vec = std::vector<double>;

struct EvalReport {
    std::string mode;             // condition descriptor
    double dropout_p = 0.0;
    double epsilon = 0.0;
    double mass_scale = 1.0;
    double friction_scale = 1.0;
    int episodes = 0;
    double mean_return = 0.0;
    double return_std = 0.0;
    double mean_info_bits = 0.0;
    std::map<std::string, double> extra;
};

// PGD settings for the observation attack (three steps of size 0.1) and the
// dynamics attack (step count left open by the paper; 10 here, reported).
inline constexpr double kPgdStepSize = 0.1;
inline constexpr int kPgdObsSteps = 3;
inline constexpr int kPgdDynSteps = 10;

// Deterministic policy evaluation with per-step observation dropout: with
// probability dropout_p the observation is withheld and the latent advances
// through the prior. The first step of an episode always reads the real
// observation.
EvalReport rollout(const agent::AgentParams& params, const envs::EnvSpec& spec, double dropout_p, int episodes,
                   uint64_t seed);

// Adversary perturbs the observation fed to the policy at every step within
// an L-inf ball (the true state is untouched).
EvalReport pgd_obs_attack(const agent::AgentParams& params, const envs::EnvSpec& spec, double epsilon, int episodes,
                          uint64_t seed);

struct DynAttackEntry {
    Vec state;
    Vec adv_state;
    double v_clean = 0.0;
    double v_adv = 0.0;
    double return_clean = 0.0;
    double return_adv = 0.0;
};

struct DynAttackReport {
    double epsilon = 0.0;
    int pgd_steps = kPgdDynSteps;
    std::vector<DynAttackEntry> entries;
    double mean_value_drop = 0.0;
    double mean_return_drop = 0.0;
};

// Perturbs the true state within the ball to minimize the critic's value;
// the environment is reset to the perturbed state to measure realized return.
// States are sampled from the policy's own rollouts.
DynAttackReport pgd_dyn_attack(const agent::AgentParams& params, const envs::EnvSpec& spec, double epsilon,
                               int n_states, uint64_t seed);

struct VoiResult {
    double voi = 0.0;       // value of observing z' instead of predicting it
    double coi_nats = 0.0;  // analytic information cost
};
inline constexpr int kVoiSamples = 32;
VoiResult value_of_info(const agent::AgentParams& params, const agent::Transition& t, uint64_t seed);

// Mean per-coordinate KL between encoder and prior over the given
// transitions, sorted descending, in bits.
std::vector<double> coord_kl_sparsity(const agent::AgentParams& params, const std::vector<agent::Transition>& batch);

std::vector<EvalReport> robust_sweep(const agent::AgentParams& params, const envs::EnvSpec& spec,
                                     const std::vector<double>& mass_scales,
                                     const std::vector<double>& friction_scales, int episodes, uint64_t seed);

struct GapStats {
    double mean_gap = 0.0;
    double mean_return = 0.0;
    std::vector<double> bin_edges;      // bins + 1 entries
    std::vector<double> bin_mean_bits;  // mean per-step bits per gap bin
    std::vector<int64_t> bin_counts;
};
GapStats gap_statistics(const agent::AgentParams& params, const envs::EnvSpec& spec, int episodes, uint64_t seed,
                        int bins = 6);

// Transitions collected by rolling out the deterministic policy.
std::vector<agent::Transition> collect_transitions(const agent::AgentParams& params, const envs::EnvSpec& spec,
                                                   int count, uint64_t seed);

struct SweepCell {
    double budget_bits = 0.0;
    agent::Variant variant = agent::Variant::Rpc;
    int seeds = 0;
    double median_return = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
};

// Trains each (variant, budget, seed) combination and aggregates the final
// return (median of the last 10% of evaluations) across seeds. Runs share
// nothing and may execute on parallel threads.
std::vector<SweepCell> bitrate_sweep(const agent::AgentConfig& base, const std::vector<double>& budgets_bits,
                                     const std::vector<agent::Variant>& variants, int n_seeds, int parallelism = 1);

double run_score(const std::vector<agent::TrainMetricsRow>& rows);  // median of last-10% evaluations
double quantile(std::vector<double> values, double q);

}  // namespace rpclab::evalh
