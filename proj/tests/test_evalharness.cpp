#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rpclab/evalharness.hpp"
#include "rpclab/report.hpp"

using namespace rpclab;
using namespace rpclab::agent;
using namespace rpclab::evalh;

namespace {

AgentParams toy_params(const std::string& env_name, uint64_t seed, double scale = 0.5) {
    const envs::EnvSpec spec = envs::make_env_spec(env_name);
    Arch arch{spec.obs_dim, spec.act_dim, 4, {16, 16}};
    AgentParams p = init_agent_params(arch, Variant::Rpc, seed);
    Rng rng(Rng::mix(seed, 0x71ULL));
    for (auto& [name, t] : p.store) {
        if (name == "log_lambda") continue;
        for (double& v : t.values) v = rng.uniform(-scale, scale);
    }
    return p;
}

}  // namespace

TEST_CASE("rollout: dropout 0 equals the agent-side reactive episode") {
    AgentParams p = toy_params("pointmass", 1);
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    const auto report = rollout(p, spec, 0.0, 3, 42);
    CHECK(report.episodes == 3);
    // reproduce with the agent's own episode runner
    auto env = envs::make_env(spec);
    double total = 0.0;
    for (int ep = 0; ep < 3; ++ep) {
        total += run_episode(p, *env, Rng::mix(42, 0xEE0000ULL + ep)).episode_return;
    }
    CHECK(report.mean_return == doctest::Approx(total / 3).epsilon(1e-14));
}

TEST_CASE("rollout: full dropout reports only the first-step bits") {
    AgentParams p = toy_params("pointmass", 2);
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    const auto full = rollout(p, spec, 1.0, 2, 7);
    // the only reactive step per episode is the first one
    auto env = envs::make_env(spec);
    double expected_nats = 0.0;
    int64_t steps = 0;
    for (int ep = 0; ep < 2; ++ep) {
        auto obs = env->reset(Rng::mix(7, 0xEE0000ULL + ep));
        auto first = act(p, obs, ActMode::Reactive, CarriedState{}, nullptr);
        expected_nats += first.cost_nats;
        auto carried = first.carried;
        env->step(first.action);
        ++steps;
        while (!env->done()) {
            auto ar = act(p, obs, ActMode::OpenLoop, carried, nullptr);
            env->step(ar.action);
            carried = ar.carried;
            ++steps;
        }
    }
    CHECK(full.mean_info_bits == doctest::Approx(dist::nats_to_bits(expected_nats / steps)).epsilon(1e-12));
    // repeated call is bit-identical
    const auto again = rollout(p, spec, 1.0, 2, 7);
    CHECK(again.mean_return == full.mean_return);
    CHECK(again.mean_info_bits == full.mean_info_bits);
}

TEST_CASE("rollout: dropout probability interpolates the bit usage") {
    AgentParams p = toy_params("pointmass", 3);
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    const auto none = rollout(p, spec, 0.0, 3, 5);
    const auto half = rollout(p, spec, 0.5, 3, 5);
    const auto full = rollout(p, spec, 1.0, 3, 5);
    CHECK(none.mean_info_bits > half.mean_info_bits);
    CHECK(half.mean_info_bits > full.mean_info_bits);
}

TEST_CASE("pgd_obs_attack: epsilon 0 equals the clean rollout exactly") {
    AgentParams p = toy_params("pointmass", 4);
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    const auto clean = rollout(p, spec, 0.0, 2, 9);
    const auto attacked = pgd_obs_attack(p, spec, 0.0, 2, 9);
    CHECK(attacked.mean_return == clean.mean_return);
    CHECK(attacked.mean_info_bits == clean.mean_info_bits);
    CHECK(attacked.extra.at("pgd_steps") == kPgdObsSteps);
    CHECK(attacked.extra.at("pgd_step_size") == kPgdStepSize);
}

TEST_CASE("pgd_obs_attack: perturbations hurt and reports are deterministic") {
    AgentParams p = toy_params("pointmass", 5);
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    const auto clean = rollout(p, spec, 0.0, 3, 11);
    const auto attacked = pgd_obs_attack(p, spec, 0.3, 3, 11);
    CHECK(attacked.mean_return <= clean.mean_return + 1e-9);
    const auto again = pgd_obs_attack(p, spec, 0.3, 3, 11);
    CHECK(again.mean_return == attacked.mean_return);
}

TEST_CASE("pgd_dyn_attack: zero epsilon means zero value drop; attacks reduce the value") {
    AgentParams p = toy_params("pointmass", 6);
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    const auto zero = pgd_dyn_attack(p, spec, 1e-12, 5, 13);
    CHECK(zero.mean_value_drop == doctest::Approx(0.0).epsilon(1e-9));
    const auto hit = pgd_dyn_attack(p, spec, 0.3, 5, 13);
    CHECK(hit.pgd_steps == kPgdDynSteps);
    CHECK(hit.entries.size() == 5);
    // the adversary minimizes the value estimate
    CHECK(hit.mean_value_drop >= -1e-9);
    for (const auto& e : hit.entries) {
        for (size_t i = 0; i < e.state.size(); ++i) {
            CHECK(std::fabs(e.adv_state[i] - e.state[i]) <= 0.3 + 1e-12);
        }
    }
}

TEST_CASE("value_of_info: coincident encoder and prior make the value difference vanish") {
    // zero weights: phi(s') and m(.|z,a) are identical distributions
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    Arch arch{spec.obs_dim, spec.act_dim, 4, {16, 16}};
    AgentParams p = init_agent_params(arch, Variant::Rpc, 0);
    for (auto& [name, t] : p.store) {
        if (name == "log_lambda") continue;
        for (double& v : t.values) v = 0.0;
    }
    Transition t;
    t.obs.assign(6, 0.2);
    t.next_obs.assign(6, -0.1);
    t.action.assign(2, 0.3);
    const auto res = value_of_info(p, t, 3);
    CHECK(res.coi_nats == doctest::Approx(0.0).epsilon(1e-12));
    // identical sampling distributions and a constant critic: exact zero
    CHECK(res.voi == doctest::Approx(0.0).epsilon(1e-9));

    AgentParams q = toy_params("pointmass", 7);
    const auto res2 = value_of_info(q, t, 3);
    CHECK(res2.coi_nats >= 0.0);
}

TEST_CASE("coord_kl_sparsity: zero for matched nets, sorted descending, length K") {
    const envs::EnvSpec spec = envs::make_env_spec("pointmass");
    Arch arch{spec.obs_dim, spec.act_dim, 4, {16, 16}};
    AgentParams zero = init_agent_params(arch, Variant::Rpc, 0);
    for (auto& [name, t] : zero.store) {
        if (name == "log_lambda") continue;
        for (double& v : t.values) v = 0.0;
    }
    std::vector<Transition> batch(3);
    for (auto& t : batch) {
        t.obs.assign(6, 0.1);
        t.next_obs.assign(6, 0.2);
        t.action.assign(2, 0.0);
    }
    const auto zeros = coord_kl_sparsity(zero, batch);
    CHECK(zeros.size() == 4);
    for (double v : zeros) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    AgentParams p = toy_params("pointmass", 8);
    const auto kls = coord_kl_sparsity(p, collect_transitions(p, spec, 50, 21));
    CHECK(kls.size() == 4);
    for (size_t i = 1; i < kls.size(); ++i) CHECK(kls[i] <= kls[i - 1]);
    for (double v : kls) CHECK(v >= 0.0);
}

TEST_CASE("robust_sweep: grid shape and the identity cell") {
    AgentParams p = toy_params("pendulum", 9);
    const envs::EnvSpec spec = envs::make_env_spec("pendulum");
    const auto grid = robust_sweep(p, spec, {1.0, 2.0}, {0.5, 1.0, 2.0}, 2, 17);
    CHECK(grid.size() == 6);
    const auto plain = rollout(p, spec, 0.0, 2, 17);
    bool found_identity = false;
    for (const auto& cell : grid) {
        if (cell.mass_scale == 1.0 && cell.friction_scale == 1.0) {
            found_identity = true;
            CHECK(cell.mean_return == plain.mean_return);
        }
    }
    CHECK(found_identity);
    CHECK_THROWS(robust_sweep(p, spec, {}, {1.0}, 1, 0));
}

TEST_CASE("gap_statistics: lanedrive only, bins cover the observed range") {
    AgentParams p = toy_params("lanedrive", 10);
    const envs::EnvSpec lane = envs::make_env_spec("lanedrive");
    const auto stats = gap_statistics(p, lane, 3, 23, 6);
    CHECK(stats.bin_edges.size() == 7);
    CHECK(stats.bin_mean_bits.size() == 6);
    int64_t total = 0;
    for (int64_t c : stats.bin_counts) total += c;
    CHECK(total > 0);
    CHECK(stats.mean_gap > 0.0);
    CHECK_THROWS(gap_statistics(p, envs::make_env_spec("pointmass"), 2, 23, 6));
    CHECK_THROWS(gap_statistics(p, lane, 2, 23, 3));
}

TEST_CASE("quantile and run_score") {
    CHECK(quantile({1, 2, 3, 4, 5}, 0.5) == doctest::Approx(3.0));
    CHECK(quantile({1, 2, 3, 4}, 0.25) == doctest::Approx(1.75));
    CHECK(quantile({7}, 0.75) == doctest::Approx(7.0));
    std::vector<TrainMetricsRow> rows(20);
    for (size_t i = 0; i < rows.size(); ++i) rows[i].episode_return = static_cast<double>(i);
    CHECK(run_score(rows) == doctest::Approx(18.5));  // median of the last 2
}

TEST_CASE("report rows serialize to jsonl and csv") {
    EvalReport r;
    r.mode = "dropout";
    r.dropout_p = 0.5;
    r.episodes = 3;
    r.mean_return = 12.25;
    r.extra["gap"] = 31.5;
    const auto row = cli::eval_report_row(r);
    const std::string dir = "build/test_reports/probe";
    cli::write_reports(dir, {row});
    std::ifstream jsonl(dir + ".jsonl");
    std::string line;
    REQUIRE(std::getline(jsonl, line));
    CHECK(line.find("\"mode\":\"dropout\"") != std::string::npos);
    CHECK(line.find("\"gap\":31.5") != std::string::npos);
    std::ifstream csv(dir + ".csv");
    std::string header, data;
    REQUIRE(std::getline(csv, header));
    REQUIRE(std::getline(csv, data));
    CHECK(header.find("mode,dropout_p") == 0);
    CHECK(data.find("dropout,0.5") == 0);
}
