#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rpclab/adam.hpp"
#include "rpclab/distrib.hpp"
#include "rpclab/envs.hpp"
#include "rpclab/graph.hpp"
#include "rpclab/mlp.hpp"
#include "rpclab/replay.hpp"

namespace rpclab::agent {

using Vec = std::vector<double>;

// Which pieces of the information machinery are active:
//   rpc        predicted prior, cost subtracted from the critic reward
//   vib        unit-Gaussian prior, critic sees the raw reward
//   vib_reward unit-Gaussian prior, cost subtracted from the critic reward
//   sac        no information terms at all (lambda pinned to 0)
enum class Variant { Rpc, Vib, VibReward, Sac };

Variant variant_from_name(const std::string& name);
std::string variant_name(Variant v);
uint32_t variant_code(Variant v);
Variant variant_from_code(uint32_t code);

struct Arch {
    int obs_dim = 0;
    int act_dim = 0;
    int latent_dim = 8;
    std::vector<int> hidden = {64, 64};

    MlpSpec encoder_spec(uint64_t seed = 0) const;
    MlpSpec prior_spec(uint64_t seed = 0) const;
    MlpSpec policy_spec(uint64_t seed = 0) const;
    MlpSpec critic_spec(uint64_t seed = 0) const;
};

struct AgentParams {
    Arch arch;
    Variant variant = Variant::Rpc;
    ParamStore store;  // enc.*, prior.*, policy.*, q1.*, q2.*, tq1.*, tq2.*, log_lambda

    double log_lambda() const;
    void set_log_lambda(double v);
    // exp(log_lambda); exactly 0 for the sac variant
    double lambda() const;
};

AgentParams init_agent_params(const Arch& arch, Variant variant, uint64_t seed);

// ---- tape-free network heads (used for acting and evaluation) -------------

dist::DiagGaussian encoder_dist(const AgentParams& p, const Vec& obs);
dist::DiagGaussian prior_predict(const AgentParams& p, const Vec& z, const Vec& action);
dist::DiagGaussian initial_prior(int latent_dim);
dist::DiagGaussian policy_dist(const AgentParams& p, const Vec& z);
// prior actually used by the variant: predicted for rpc/sac, N(0,I) for vib*
dist::DiagGaussian step_prior(const AgentParams& p, const Vec& z, const Vec& action);
double critic_value(const AgentParams& p, const std::string& prefix, const Vec& obs, const Vec& action);
double min_critic_value(const AgentParams& p, const Vec& obs, const Vec& action);

struct EncodeResult {
    Vec z;
    dist::DiagGaussian dist;
};
EncodeResult encode(const AgentParams& p, const Vec& obs, const Vec& noise);

// Analytic KL cost of one transition in nats, given the latent sampled for
// transition.obs. Adds the initial-state term on episode-first transitions.
double info_cost(const AgentParams& p, const Transition& t, const Vec& z_t);
double augmented_reward(double reward, double info_cost_nats, double lambda);

// One Adam step on log_lambda against gradient (budget - measured).
double dual_update(AdamState& state, double log_lambda, double measured_cost_nats, double budget_nats);

// TD target: augmented reward plus discounted target value; terminal
// transitions do not bootstrap, truncated ones do.
double td_target(double reward, double cost_nats, double lambda_reward, double gamma, bool terminal,
                 double min_target_q);

// ---- acting ----------------------------------------------------------------

enum class ActMode { Reactive, OpenLoop };

struct CarriedState {
    bool has = false;
    Vec z;
    Vec action;
};

struct ActResult {
    Vec action;
    CarriedState carried;
    double cost_nats = 0.0;
};

// rng may be null for deterministic (mean) acting.
ActResult act(const AgentParams& p, const Vec& obs, ActMode mode, const CarriedState& carried, Rng* rng);

// Deterministic reactive episode; returns (undiscounted return, mean cost bits).
struct EpisodeStats {
    double episode_return = 0.0;
    double mean_cost_bits = 0.0;
    int steps = 0;
};
EpisodeStats run_episode(const AgentParams& p, envs::Env& env, uint64_t env_seed);

// ---- loss graphs -----------------------------------------------------------

// Actor graph inputs: obs, next_obs, action, noise_z, noise_znext, noise_a,
// first (0/1 mask [B,1]), lambda [1,1]. Outputs: "loss", "cost" [B,1],
// "a_next" [B,act]. Encoder/prior/policy params are trainable; critics are
// frozen constants.
std::unique_ptr<Graph> build_actor_graph(const Arch& arch, Variant variant, int batch);
// Critic graph inputs: obs, action, y [B,1]. Outputs: "loss", "q1", "q2".
std::unique_ptr<Graph> build_critic_graph(const Arch& arch, int batch);

struct BatchInputs {
    TensorMap actor;   // everything the actor graph needs
    Tensor rewards;    // [B,1]
    Tensor terminal;   // [B,1] 0/1
};
BatchInputs assemble_batch(const Arch& arch, const std::vector<const Transition*>& batch, double lambda,
                           Rng& noise_rng);

// ---- training --------------------------------------------------------------

struct AgentConfig {
    envs::EnvSpec env;
    Variant variant = Variant::Rpc;
    double budget_bits = 1.0;
    int latent_dim = 8;
    std::vector<int> hidden = {64, 64};
    double lr = 3e-4;
    double dual_lr = 3e-4;
    double gamma = 0.99;
    double tau = 0.005;
    int batch_size = 256;
    int64_t replay_capacity = 100000;
    int64_t total_steps = 100000;
    int64_t eval_every = 1000;
    int eval_episodes = 5;
    uint64_t seed = 0;
};

struct StepMetrics {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double mean_cost_bits = 0.0;
    double lambda = 0.0;
};

struct TrainMetricsRow {
    int64_t step = 0;
    double episode_return = 0.0;
    double info_bits_per_step = 0.0;
    double lambda = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    uint64_t seed = 0;
};

class Agent {
public:
    explicit Agent(AgentConfig cfg);
    Agent(AgentConfig cfg, AgentParams params);  // resume from a snapshot

    // One gradient update on a sampled batch. Throws while the buffer holds
    // fewer than batch_size transitions.
    StepMetrics train_step();
    // Full loop: one environment step per gradient step, periodic evaluation.
    std::vector<TrainMetricsRow> train();

    const AgentParams& params() const { return params_; }
    AgentParams& mutable_params() { return params_; }
    ReplayBuffer& replay() { return *buffer_; }
    const AgentConfig& config() const { return cfg_; }

    Graph& actor_graph() { return *actor_graph_; }
    Graph& critic_graph() { return *critic_graph_; }

private:
    void polyak_targets();
    void apply_grads(const TensorMap& grads, std::map<std::string, AdamState>& states);
    double evaluate_mean_return();

    AgentConfig cfg_;
    AgentParams params_;
    std::unique_ptr<ReplayBuffer> buffer_;
    std::unique_ptr<Graph> actor_graph_;
    std::unique_ptr<Graph> critic_graph_;
    std::map<std::string, AdamState> actor_adam_;
    std::map<std::string, AdamState> critic_adam_;
    AdamState dual_adam_;
    Rng noise_rng_;
};

}  // namespace rpclab::agent
