#include "rpclab/envs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rpclab::envs {

namespace {

double clip(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

double wrap_pi(double x) {
    while (x <= -M_PI) x += 2.0 * M_PI;
    while (x > M_PI) x -= 2.0 * M_PI;
    return x;
}

}  // namespace

EnvKind env_kind_from_name(const std::string& name) {
    if (name == "pointmass") return EnvKind::Pointmass;
    if (name == "lanedrive") return EnvKind::Lanedrive;
    if (name == "pendulum") return EnvKind::Pendulum;
    throw std::invalid_argument("unknown env name '" + name + "' (pointmass|lanedrive|pendulum)");
}

std::string env_name(EnvKind kind) {
    switch (kind) {
        case EnvKind::Pointmass: return "pointmass";
        case EnvKind::Lanedrive: return "lanedrive";
        case EnvKind::Pendulum: return "pendulum";
    }
    return "?";
}

EnvSpec make_env_spec(const std::string& name) {
    EnvSpec s;
    s.kind = env_kind_from_name(name);
    switch (s.kind) {
        case EnvKind::Pointmass:
            s.obs_dim = 6;  // position 2, velocity 2, goal 2
            s.act_dim = 2;
            s.horizon = 100;
            s.dt = 0.1;
            s.noise_scale = 0.0;
            break;
        case EnvKind::Lanedrive:
            s.obs_dim = 3;  // ego speed, gap, relative speed
            s.act_dim = 1;
            s.horizon = 200;
            s.dt = 0.5;
            s.noise_scale = 0.5;
            break;
        case EnvKind::Pendulum:
            s.obs_dim = 3;  // cos, sin, angular velocity
            s.act_dim = 1;
            s.horizon = 200;
            s.dt = 0.05;
            s.noise_scale = 0.0;
            break;
    }
    return s;
}

EnvSpec perturb_params(const EnvSpec& spec, double mass_scale, double friction_scale) {
    if (!(mass_scale > 0.0) || !(friction_scale > 0.0)) {
        throw std::invalid_argument("perturb_params: scales must be positive");
    }
    EnvSpec out = spec;
    out.mass_scale = spec.mass_scale * mass_scale;
    out.friction_scale = spec.friction_scale * friction_scale;
    return out;
}

Vec Env::reset(uint64_t seed) {
    rng_ = std::make_unique<Rng>(Rng::mix(seed, 0x656e76ULL));
    step_count_ = 0;
    done_ = false;
    clipped_actions_ = 0;
    do_reset(*rng_);
    return observe();
}

StepResult Env::step(const Vec& action) {
    if (!rng_) throw std::logic_error("env: step before reset");
    if (done_) throw std::logic_error("env: step after episode end");
    if (static_cast<int>(action.size()) != spec_.act_dim) {
        throw std::invalid_argument("env: action dim " + std::to_string(action.size()) + ", expected " +
                                    std::to_string(spec_.act_dim));
    }
    Vec a = action;
    for (double& v : a) {
        if (!std::isfinite(v)) throw std::invalid_argument("env: non-finite action");
        if (v < -1.0 || v > 1.0) {
            v = clip(v, -1.0, 1.0);
            ++clipped_actions_;
        }
    }
    StepResult res = do_step(a);
    ++step_count_;
    if (!res.terminal && step_count_ >= spec_.horizon) res.truncated = true;
    done_ = res.terminal || res.truncated;
    return res;
}

namespace {

class PointmassEnv final : public Env {
public:
    using Env::Env;

    Vec observe() const override { return {pos_[0], pos_[1], vel_[0], vel_[1], goal_[0], goal_[1]}; }

    void set_state_from_obs(const Vec& obs) override {
        pos_ = {clip(obs[0], -1.0, 1.0), clip(obs[1], -1.0, 1.0)};
        vel_ = {obs[2], obs[3]};
        goal_ = {clip(obs[4], -1.0, 1.0), clip(obs[5], -1.0, 1.0)};
        step_count_ = 0;
        done_ = false;
    }

protected:
    void do_reset(Rng& rng) override {
        pos_ = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
        vel_ = {0.0, 0.0};
        goal_ = {rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    }

    StepResult do_step(const Vec& a) override {
        const double drag = 0.1 * spec_.friction_scale;
        const double mass = spec_.mass_scale;
        for (int i = 0; i < 2; ++i) {
            vel_[i] = (1.0 - drag) * vel_[i] + (a[i] / mass) * spec_.dt;
            const double raw = pos_[i] + vel_[i] * spec_.dt;
            pos_[i] = clip(raw, -1.0, 1.0);
            if (raw != pos_[i]) vel_[i] = 0.0;  // wall contact
        }
        const double dx = pos_[0] - goal_[0], dy = pos_[1] - goal_[1];
        StepResult res;
        res.reward = std::exp(-4.0 * std::sqrt(dx * dx + dy * dy));
        res.next_obs = observe();
        return res;
    }

private:
    Vec pos_{0, 0}, vel_{0, 0}, goal_{0, 0};
};

class LanedriveEnv final : public Env {
public:
    using Env::Env;

    Vec observe() const override { return {v_ego_ / 30.0, gap_ / 100.0, (v_lead_ - v_ego_) / 30.0}; }

    void set_state_from_obs(const Vec& obs) override {
        v_ego_ = clip(30.0 * obs[0], 0.0, 30.0);
        gap_ = std::max(100.0 * obs[1], 0.0);
        v_lead_ = clip(v_ego_ + 30.0 * obs[2], 5.0, 25.0);
        step_count_ = 0;
        done_ = false;
    }

protected:
    void do_reset(Rng& rng) override {
        v_ego_ = rng.uniform(5.0, 15.0);
        gap_ = rng.uniform(20.0, 80.0);
        v_lead_ = rng.uniform(10.0, 20.0);
    }

    StepResult do_step(const Vec& a) override {
        const double accel = 3.0 * a[0] / spec_.mass_scale;
        v_ego_ = clip(v_ego_ + accel * spec_.dt, 0.0, 30.0);
        const double xi = rng_->normal();
        v_lead_ = clip(v_lead_ + xi * spec_.noise_scale, 5.0, 25.0);
        gap_ += (v_lead_ - v_ego_) * spec_.dt;
        StepResult res;
        if (gap_ <= 0.0) {
            gap_ = 0.0;
            res.reward = kCrashPenalty;
            res.terminal = true;
        } else {
            res.reward = std::max(v_ego_ / 30.0, kRewardFloor);
        }
        res.next_obs = observe();
        return res;
    }

private:
    double v_ego_ = 0.0, gap_ = 0.0, v_lead_ = 0.0;
};

class PendulumEnv final : public Env {
public:
    using Env::Env;

    // theta = 0 is upright
    Vec observe() const override { return {std::cos(theta_), std::sin(theta_), omega_ / 8.0}; }

    void set_state_from_obs(const Vec& obs) override {
        theta_ = std::atan2(obs[1], obs[0]);
        omega_ = clip(8.0 * obs[2], -8.0, 8.0);
        step_count_ = 0;
        done_ = false;
    }

protected:
    void do_reset(Rng& rng) override {
        theta_ = rng.uniform(-M_PI, M_PI);
        omega_ = rng.uniform(-1.0, 1.0);
    }

    StepResult do_step(const Vec& a) override {
        const double g = 9.8, length = 1.0;
        const double mass = spec_.mass_scale;
        const double damping = 0.1 * spec_.friction_scale;
        const double torque = 2.0 * a[0];
        const double accel = (g / length) * std::sin(theta_) + (torque - damping * omega_) / (mass * length * length);
        omega_ = clip(omega_ + accel * spec_.dt, -8.0, 8.0);
        theta_ = wrap_pi(theta_ + omega_ * spec_.dt);
        StepResult res;
        res.reward = std::max((1.0 + std::cos(theta_)) / 2.0, kRewardFloor);
        res.next_obs = observe();
        return res;
    }

private:
    double theta_ = 0.0, omega_ = 0.0;
};

}  // namespace

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
    switch (spec.kind) {
        case EnvKind::Pointmass: return std::make_unique<PointmassEnv>(spec);
        case EnvKind::Lanedrive: return std::make_unique<LanedriveEnv>(spec);
        case EnvKind::Pendulum: return std::make_unique<PendulumEnv>(spec);
    }
    throw std::invalid_argument("make_env: bad kind");
}

std::unique_ptr<Env> make_env(const std::string& name) { return make_env(make_env_spec(name)); }

}  // namespace rpclab::envs
