#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rpclab/tensor.hpp"

namespace rpclab::envs {

using Vec = std::vector<double>;

enum class EnvKind { Pointmass, Lanedrive, Pendulum };

struct EnvSpec {
    EnvKind kind = EnvKind::Pointmass;
    int obs_dim = 0;
    int act_dim = 0;
    int horizon = 0;
    double dt = 0.0;
    double mass_scale = 1.0;
    double friction_scale = 1.0;
    double noise_scale = 0.0;
};

struct StepResult {
    Vec next_obs;
    double reward = 0.0;
    bool terminal = false;   // crash; TD target does not bootstrap
    bool truncated = false;  // horizon exhausted; TD target bootstraps
};

EnvKind env_kind_from_name(const std::string& name);
std::string env_name(EnvKind kind);
EnvSpec make_env_spec(const std::string& name);
EnvSpec perturb_params(const EnvSpec& spec, double mass_scale, double friction_scale);

// Rewards on non-crash steps are strictly positive (floored at kRewardFloor);
// only the lanedrive crash emits kCrashPenalty and terminates.
inline constexpr double kRewardFloor = 1e-3;
inline constexpr double kCrashPenalty = -50.0;

class Env {
public:
    explicit Env(EnvSpec spec) : spec_(spec) {}
    virtual ~Env() = default;

    Vec reset(uint64_t seed);
    StepResult step(const Vec& action);

    const EnvSpec& spec() const { return spec_; }
    int step_count() const { return step_count_; }
    bool done() const { return done_; }
    int64_t clipped_action_count() const { return clipped_actions_; }

    virtual Vec observe() const = 0;
    // Adopts the state encoded by an observation-space vector (used by the
    // dynamics attack); resets the step counter.
    virtual void set_state_from_obs(const Vec& obs) = 0;

protected:
    virtual void do_reset(Rng& rng) = 0;
    virtual StepResult do_step(const Vec& action) = 0;

    EnvSpec spec_;
    std::unique_ptr<Rng> rng_;
    int step_count_ = 0;
    bool done_ = false;
    int64_t clipped_actions_ = 0;
};

std::unique_ptr<Env> make_env(const EnvSpec& spec);
std::unique_ptr<Env> make_env(const std::string& name);

}  // namespace rpclab::envs
