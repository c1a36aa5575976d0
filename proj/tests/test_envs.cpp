#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rpclab/envs.hpp"

using namespace rpclab;
using namespace rpclab::envs;

namespace {

// fixed-action rollout used by the determinism and positivity properties
std::vector<double> trajectory_signature(Env& env, uint64_t seed, int steps, double action_scale) {
    std::vector<double> sig;
    Rng rng(seed + 1);
    auto obs = env.reset(seed);
    sig.insert(sig.end(), obs.begin(), obs.end());
    for (int i = 0; i < steps && !env.done(); ++i) {
        Vec a(static_cast<size_t>(env.spec().act_dim));
        for (double& v : a) v = action_scale * (2.0 * rng.uniform() - 1.0);
        const auto sr = env.step(a);
        sig.push_back(sr.reward);
        sig.insert(sig.end(), sr.next_obs.begin(), sr.next_obs.end());
    }
    return sig;
}

}  // namespace

TEST_CASE("reset: unknown env name is rejected") {
    CHECK_THROWS(make_env("mujoco"));
    CHECK_THROWS(make_env_spec("walker"));
}

TEST_CASE("reset: determinism and observation dimensions") {
    for (const char* name : {"pointmass", "lanedrive", "pendulum"}) {
        auto env = make_env(name);
        const auto a = env->reset(0);
        const auto b = env->reset(0);
        CHECK(a == b);
        CHECK(static_cast<int>(a.size()) == env->spec().obs_dim);
    }
    CHECK(make_env_spec("pointmass").obs_dim == 6);
    CHECK(make_env_spec("pointmass").act_dim == 2);
    CHECK(make_env_spec("lanedrive").obs_dim == 3);
    CHECK(make_env_spec("pendulum").obs_dim == 3);
}

TEST_CASE("determinism: identical seed and action sequence give bit-identical trajectories") {
    for (const char* name : {"pointmass", "lanedrive", "pendulum"}) {
        auto e1 = make_env(name);
        auto e2 = make_env(name);
        CHECK(trajectory_signature(*e1, 7, 50, 0.8) == trajectory_signature(*e2, 7, 50, 0.8));
    }
}

TEST_CASE("pointmass: at rest with zero action and zero drag the position is unchanged") {
    EnvSpec spec = make_env_spec("pointmass");
    spec.friction_scale = 0.0;  // constructed directly; perturb_params would reject 0
    auto env = make_env(spec);
    const auto obs0 = env->reset(3);
    // velocity starts at zero
    CHECK(obs0[2] == 0.0);
    CHECK(obs0[3] == 0.0);
    const auto sr = env->step({0.0, 0.0});
    CHECK(sr.next_obs[0] == obs0[0]);
    CHECK(sr.next_obs[1] == obs0[1]);
}

TEST_CASE("pointmass: positions stay in the unit box and rewards in (0,1]") {
    auto env = make_env("pointmass");
    Rng rng(5);
    for (int ep = 0; ep < 3; ++ep) {
        env->reset(100 + ep);
        while (!env->done()) {
            const auto sr = env->step({2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0});
            CHECK(sr.reward > 0.0);
            CHECK(sr.reward <= 1.0);
            CHECK(std::fabs(sr.next_obs[0]) <= 1.0);
            CHECK(std::fabs(sr.next_obs[1]) <= 1.0);
        }
    }
}

TEST_CASE("pointmass: doubling the mass halves the acceleration from the same action") {
    EnvSpec spec = make_env_spec("pointmass");
    auto base = make_env(spec);
    auto heavy = make_env(perturb_params(spec, 2.0, 1.0));
    base->reset(11);
    heavy->reset(11);
    const auto v1 = base->step({1.0, 0.0}).next_obs[2];
    const auto v2 = heavy->step({1.0, 0.0}).next_obs[2];
    CHECK(v1 == doctest::Approx(2.0 * v2));
}

TEST_CASE("lanedrive: forcing the gap to zero crashes with reward -50 and terminal") {
    auto env = make_env("lanedrive");
    env->reset(1);
    // place the ego right behind the leader at high closing speed
    env->set_state_from_obs({30.0 / 30.0, 0.3 / 100.0, (5.0 - 30.0) / 30.0});
    const auto sr = env->step({1.0});
    CHECK(sr.reward == -50.0);
    CHECK(sr.terminal);
    CHECK_THROWS(env->step({0.0}));  // step after terminal
}

TEST_CASE("lanedrive: non-crash rewards positive, ego speed within [0,30]") {
    auto env = make_env("lanedrive");
    Rng rng(9);
    for (int ep = 0; ep < 3; ++ep) {
        env->reset(40 + ep);
        while (!env->done()) {
            const auto sr = env->step({2.0 * rng.uniform() - 1.0});
            if (!sr.terminal) {
                CHECK(sr.reward > 0.0);
                CHECK(sr.reward <= 1.0);
            } else {
                CHECK(sr.reward == -50.0);
            }
            CHECK(sr.next_obs[0] >= 0.0);
            CHECK(sr.next_obs[0] <= 1.0);
            for (double v : sr.next_obs) CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("pendulum: hanging down yields the floored reward") {
    auto env = make_env("pendulum");
    env->reset(2);
    env->set_state_from_obs({std::cos(M_PI), std::sin(M_PI), 0.0});
    const auto sr = env->step({0.0});
    // (1 + cos(pi)) / 2 = 0, floored at 1e-3; one Euler step of gravity moves
    // theta only a hair away from straight down
    CHECK(sr.reward == doctest::Approx(1e-3).epsilon(0.5));
    CHECK(sr.reward >= 1e-3);
}

TEST_CASE("pendulum: upright is worth about 1 per step") {
    auto env = make_env("pendulum");
    env->reset(2);
    env->set_state_from_obs({1.0, 0.0, 0.0});
    const auto sr = env->step({0.0});
    CHECK(sr.reward == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("episodes truncate at the horizon with the truncated flag") {
    for (const char* name : {"pointmass", "lanedrive", "pendulum"}) {
        auto env = make_env(name);
        env->reset(77);
        StepResult last;
        int steps = 0;
        while (!env->done()) {
            last = env->step(Vec(static_cast<size_t>(env->spec().act_dim), 0.1));
            ++steps;
        }
        if (!last.terminal) {
            CHECK(steps == env->spec().horizon);
            CHECK(last.truncated);
        }
        CHECK_THROWS(env->step(Vec(static_cast<size_t>(env->spec().act_dim), 0.0)));
    }
}

TEST_CASE("perturb_params: identity, multiplication, purity") {
    const EnvSpec spec = make_env_spec("pointmass");
    const EnvSpec same = perturb_params(spec, 1.0, 1.0);
    CHECK(same.mass_scale == spec.mass_scale);
    CHECK(same.friction_scale == spec.friction_scale);
    const EnvSpec scaled = perturb_params(spec, 2.0, 0.2);
    CHECK(scaled.mass_scale == doctest::Approx(2.0));
    CHECK(scaled.friction_scale == doctest::Approx(0.2));
    CHECK(spec.mass_scale == 1.0);  // original untouched
    CHECK_THROWS(perturb_params(spec, -1.0, 1.0));
    CHECK_THROWS(perturb_params(spec, 1.0, 0.0));
    // chained scaling multiplies
    const EnvSpec twice = perturb_params(scaled, 2.0, 1.0);
    CHECK(twice.mass_scale == doctest::Approx(4.0));
}

TEST_CASE("out-of-range actions are clipped and recorded") {
    auto env = make_env("pointmass");
    env->reset(0);
    env->step({5.0, -3.0});
    CHECK(env->clipped_action_count() == 2);
    env->step({0.5, 0.5});
    CHECK(env->clipped_action_count() == 2);
    CHECK_THROWS(env->step({std::nan(""), 0.0}));
}
