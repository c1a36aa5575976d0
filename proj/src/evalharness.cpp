#include "rpclab/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "rpclab/gauss_graph.hpp"

namespace rpclab::evalh {

namespace gn = dist::gnodes;
using agent::ActMode;
using agent::AgentParams;
using agent::CarriedState;

namespace {

struct ReturnAccum {
    std::vector<double> returns;
    double total_cost_nats = 0.0;
    int64_t total_steps = 0;

    void finish(EvalReport& report) const {
        report.episodes = static_cast<int>(returns.size());
        double mean = 0.0;
        for (double r : returns) mean += r;
        mean /= returns.size();
        double var = 0.0;
        for (double r : returns) var += (r - mean) * (r - mean);
        report.mean_return = mean;
        report.return_std = returns.size() > 1 ? std::sqrt(var / (returns.size() - 1)) : 0.0;
        report.mean_info_bits = total_steps > 0 ? dist::nats_to_bits(total_cost_nats / total_steps) : 0.0;
    }
};

// Deterministic rollout from the environment's current state.
double episode_return_from_here(const AgentParams& params, envs::Env& env) {
    double total = 0.0;
    Vec obs = env.observe();
    CarriedState carried;
    while (!env.done()) {
        auto ar = agent::act(params, obs, ActMode::Reactive, carried, nullptr);
        const auto sr = env.step(ar.action);
        total += sr.reward;
        carried = ar.carried;
        obs = sr.next_obs;
    }
    return total;
}

// Graph computing min(Q1,Q2)(q_state, pi(phi_mean(policy_state))) with all
// parameters frozen; exposes the gradient w.r.t. "s_adv".
std::unique_ptr<Graph> build_attack_graph(const agent::Arch& arch, bool perturb_q_state) {
    auto graph = std::make_unique<Graph>();
    Graph& g = *graph;
    const int s_adv = g.input("s_adv", {1, arch.obs_dim});
    const int s_q = perturb_q_state ? s_adv : g.input("s_true", {1, arch.obs_dim});
    const auto enc = gn::gauss_head(g, mlp_apply(g, arch.encoder_spec(), "enc.", s_adv, false), arch.latent_dim);
    const auto pol = gn::gauss_head(g, mlp_apply(g, arch.policy_spec(), "policy.", enc.mean, false), arch.act_dim);
    const int action = g.tanh_(pol.mean);
    const int q_in = g.concat_cols(s_q, action);
    const int q1 = mlp_apply(g, arch.critic_spec(), "q1.", q_in, false);
    const int q2 = mlp_apply(g, arch.critic_spec(), "q2.", q_in, false);
    g.mark_output("q", g.mean_all(g.min_elem(q1, q2)));
    return graph;
}

void check_ball(const Vec& adv, const Vec& center, double epsilon) {
    for (size_t i = 0; i < adv.size(); ++i) {
        if (std::fabs(adv[i] - center[i]) > epsilon + 1e-12) {
            throw std::logic_error("pgd: perturbation left the epsilon ball");
        }
    }
}

// Projected sign-gradient descent minimizing the graph's "q" output.
Vec pgd_minimize(Graph& g, const AgentParams& params, const Vec& center, double epsilon, int steps,
                 const Vec* q_state) {
    Vec adv = center;
    for (int it = 0; it < steps; ++it) {
        TensorMap in;
        in["s_adv"] = Tensor({1, static_cast<int>(adv.size())}, adv);
        if (q_state) in["s_true"] = Tensor({1, static_cast<int>(q_state->size())}, *q_state);
        g.forward(in, params.store);
        g.backward(g.output_id("q"));
        const Tensor& grad = g.output_grad_of_input("s_adv");
        for (size_t i = 0; i < adv.size(); ++i) {
            const double sign = grad.values[i] > 0.0 ? 1.0 : (grad.values[i] < 0.0 ? -1.0 : 0.0);
            const double stepped = adv[i] - kPgdStepSize * sign;
            adv[i] = std::clamp(stepped, center[i] - epsilon, center[i] + epsilon);
        }
        check_ball(adv, center, epsilon);
    }
    return adv;
}

}  // namespace

EvalReport rollout(const AgentParams& params, const envs::EnvSpec& spec, double dropout_p, int episodes,
                   uint64_t seed) {
    if (!(dropout_p >= 0.0 && dropout_p <= 1.0)) throw std::invalid_argument("rollout: dropout_p in [0,1]");
    if (episodes < 1) throw std::invalid_argument("rollout: episodes must be >= 1");
    auto env = envs::make_env(spec);
    Rng drop_rng(Rng::mix(seed, 0x64726f70ULL));
    ReturnAccum accum;
    for (int ep = 0; ep < episodes; ++ep) {
        Vec obs = env->reset(Rng::mix(seed, 0xEE0000ULL + ep));
        CarriedState carried;
        double ep_return = 0.0;
        bool first = true;
        while (!env->done()) {
            const bool withhold = !first && drop_rng.uniform() < dropout_p;
            auto ar = agent::act(params, obs, withhold ? ActMode::OpenLoop : ActMode::Reactive, carried, nullptr);
            const auto sr = env->step(ar.action);
            ep_return += sr.reward;
            accum.total_cost_nats += ar.cost_nats;
            ++accum.total_steps;
            carried = ar.carried;
            obs = sr.next_obs;
            first = false;
        }
        accum.returns.push_back(ep_return);
    }
    EvalReport report;
    report.mode = "dropout";
    report.dropout_p = dropout_p;
    report.mass_scale = spec.mass_scale;
    report.friction_scale = spec.friction_scale;
    accum.finish(report);
    return report;
}

EvalReport pgd_obs_attack(const AgentParams& params, const envs::EnvSpec& spec, double epsilon, int episodes,
                          uint64_t seed) {
    if (epsilon < 0.0) throw std::invalid_argument("pgd_obs_attack: epsilon must be >= 0");
    if (episodes < 1) throw std::invalid_argument("pgd_obs_attack: episodes must be >= 1");
    auto env = envs::make_env(spec);
    auto graph = build_attack_graph(params.arch, /*perturb_q_state=*/false);
    ReturnAccum accum;
    for (int ep = 0; ep < episodes; ++ep) {
        Vec obs = env->reset(Rng::mix(seed, 0xEE0000ULL + ep));
        CarriedState carried;
        double ep_return = 0.0;
        while (!env->done()) {
            const Vec adv = pgd_minimize(*graph, params, obs, epsilon, kPgdObsSteps, &obs);
            auto ar = agent::act(params, adv, ActMode::Reactive, carried, nullptr);
            const auto sr = env->step(ar.action);
            ep_return += sr.reward;
            accum.total_cost_nats += ar.cost_nats;
            ++accum.total_steps;
            carried = ar.carried;
            obs = sr.next_obs;
        }
        accum.returns.push_back(ep_return);
    }
    EvalReport report;
    report.mode = "pgd_obs";
    report.epsilon = epsilon;
    report.mass_scale = spec.mass_scale;
    report.friction_scale = spec.friction_scale;
    accum.finish(report);
    report.extra["pgd_steps"] = kPgdObsSteps;
    report.extra["pgd_step_size"] = kPgdStepSize;
    return report;
}

DynAttackReport pgd_dyn_attack(const AgentParams& params, const envs::EnvSpec& spec, double epsilon, int n_states,
                               uint64_t seed) {
    if (epsilon < 0.0) throw std::invalid_argument("pgd_dyn_attack: epsilon must be >= 0");
    if (n_states < 1) throw std::invalid_argument("pgd_dyn_attack: n_states must be >= 1");

    // states sampled from the policy's own rollouts
    std::vector<Vec> pool;
    {
        auto env = envs::make_env(spec);
        int ep = 0;
        while (static_cast<int>(pool.size()) < std::max(4 * n_states, 64) && ep < 64) {
            Vec obs = env->reset(Rng::mix(seed, 0xDD0000ULL + ep));
            CarriedState carried;
            while (!env->done()) {
                pool.push_back(obs);
                auto ar = agent::act(params, obs, ActMode::Reactive, carried, nullptr);
                const auto sr = env->step(ar.action);
                carried = ar.carried;
                obs = sr.next_obs;
            }
            ++ep;
        }
    }
    Rng pick(Rng::mix(seed, 0x7069636bULL));
    auto graph = build_attack_graph(params.arch, /*perturb_q_state=*/true);

    DynAttackReport report;
    report.epsilon = epsilon;
    auto value_of = [&](const Vec& s) {
        auto ar = agent::act(params, s, ActMode::Reactive, CarriedState{}, nullptr);
        return agent::min_critic_value(params, s, ar.action);
    };
    auto env = envs::make_env(spec);
    for (int i = 0; i < n_states; ++i) {
        DynAttackEntry entry;
        entry.state = pool[static_cast<size_t>(pick.uniform_index(static_cast<int64_t>(pool.size())))];
        entry.v_clean = value_of(entry.state);
        entry.adv_state = pgd_minimize(*graph, params, entry.state, epsilon, kPgdDynSteps, nullptr);
        entry.v_adv = value_of(entry.adv_state);
        env->reset(Rng::mix(seed, 0xCC0000ULL + i));
        env->set_state_from_obs(entry.state);
        entry.return_clean = episode_return_from_here(params, *env);
        env->reset(Rng::mix(seed, 0xCC0000ULL + i));
        env->set_state_from_obs(entry.adv_state);
        entry.return_adv = episode_return_from_here(params, *env);
        report.mean_value_drop += entry.v_clean - entry.v_adv;
        report.mean_return_drop += entry.return_clean - entry.return_adv;
        report.entries.push_back(std::move(entry));
    }
    report.mean_value_drop /= n_states;
    report.mean_return_drop /= n_states;
    return report;
}

VoiResult value_of_info(const AgentParams& params, const agent::Transition& t, uint64_t seed) {
    const int k = params.arch.latent_dim;
    Rng rng(Rng::mix(seed, 0x766f69ULL));
    const Vec z = agent::encoder_dist(params, t.obs).mean;
    const auto enc_next = agent::encoder_dist(params, t.next_obs);
    const auto prior = agent::step_prior(params, z, t.action);

    auto expected_value = [&](const dist::DiagGaussian& d) {
        double total = 0.0;
        for (int i = 0; i < kVoiSamples; ++i) {
            const Vec z_next = dist::sample_reparam(d, rng.normal_vec(k));
            const auto pd = agent::policy_dist(params, z_next);
            const Vec pre = dist::sample_reparam(pd, rng.normal_vec(params.arch.act_dim));
            Vec action(pre.size());
            for (size_t j = 0; j < pre.size(); ++j) action[j] = std::tanh(pre[j]);
            total += agent::min_critic_value(params, t.next_obs, action);
        }
        return total / kVoiSamples;
    };

    VoiResult out;
    out.voi = expected_value(enc_next) - expected_value(prior);
    out.coi_nats = agent::info_cost(params, t, z);
    return out;
}

std::vector<double> coord_kl_sparsity(const AgentParams& params, const std::vector<agent::Transition>& batch) {
    if (batch.empty()) throw std::invalid_argument("coord_kl_sparsity: need at least one transition");
    const int k = params.arch.latent_dim;
    std::vector<double> mean_kl(static_cast<size_t>(k), 0.0);
    for (const auto& t : batch) {
        const Vec z = agent::encoder_dist(params, t.obs).mean;
        const auto enc_next = agent::encoder_dist(params, t.next_obs);
        const auto prior = agent::step_prior(params, z, t.action);
        const auto per_coord = dist::kl_per_coordinate(enc_next, prior);
        for (int i = 0; i < k; ++i) mean_kl[static_cast<size_t>(i)] += per_coord[static_cast<size_t>(i)];
    }
    for (double& v : mean_kl) v = dist::nats_to_bits(v / static_cast<double>(batch.size()));
    std::sort(mean_kl.begin(), mean_kl.end(), std::greater<double>());
    return mean_kl;
}

std::vector<EvalReport> robust_sweep(const AgentParams& params, const envs::EnvSpec& spec,
                                     const std::vector<double>& mass_scales,
                                     const std::vector<double>& friction_scales, int episodes, uint64_t seed) {
    if (mass_scales.empty() || friction_scales.empty()) {
        throw std::invalid_argument("robust_sweep: scale lists must be nonempty");
    }
    std::vector<EvalReport> grid;
    for (double m : mass_scales) {
        for (double f : friction_scales) {
            const envs::EnvSpec perturbed = envs::perturb_params(spec, m, f);
            EvalReport r = rollout(params, perturbed, 0.0, episodes, seed);
            r.mode = "robust";
            grid.push_back(std::move(r));
        }
    }
    return grid;
}

GapStats gap_statistics(const AgentParams& params, const envs::EnvSpec& spec, int episodes, uint64_t seed, int bins) {
    if (spec.kind != envs::EnvKind::Lanedrive) throw std::invalid_argument("gap_statistics: lanedrive only");
    if (bins < 5) throw std::invalid_argument("gap_statistics: need at least 5 bins");
    auto env = envs::make_env(spec);
    std::vector<double> gaps;
    std::vector<double> bits;
    GapStats stats;
    for (int ep = 0; ep < episodes; ++ep) {
        Vec obs = env->reset(Rng::mix(seed, 0xEE0000ULL + ep));
        CarriedState carried;
        while (!env->done()) {
            auto ar = agent::act(params, obs, ActMode::Reactive, carried, nullptr);
            gaps.push_back(obs[1] * 100.0);
            bits.push_back(dist::nats_to_bits(ar.cost_nats));
            const auto sr = env->step(ar.action);
            stats.mean_return += sr.reward;
            carried = ar.carried;
            obs = sr.next_obs;
        }
    }
    stats.mean_return /= episodes;
    double mean_gap = 0.0;
    double lo = gaps[0], hi = gaps[0];
    for (double g : gaps) {
        mean_gap += g;
        lo = std::min(lo, g);
        hi = std::max(hi, g);
    }
    stats.mean_gap = mean_gap / static_cast<double>(gaps.size());
    if (hi <= lo) hi = lo + 1.0;
    stats.bin_edges.resize(static_cast<size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) {
        stats.bin_edges[static_cast<size_t>(i)] = lo + (hi - lo) * i / bins;
    }
    stats.bin_mean_bits.assign(static_cast<size_t>(bins), 0.0);
    stats.bin_counts.assign(static_cast<size_t>(bins), 0);
    for (size_t i = 0; i < gaps.size(); ++i) {
        int b = static_cast<int>((gaps[i] - lo) / (hi - lo) * bins);
        b = std::clamp(b, 0, bins - 1);
        stats.bin_mean_bits[static_cast<size_t>(b)] += bits[i];
        ++stats.bin_counts[static_cast<size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
        if (stats.bin_counts[static_cast<size_t>(b)] > 0) {
            stats.bin_mean_bits[static_cast<size_t>(b)] /= static_cast<double>(stats.bin_counts[static_cast<size_t>(b)]);
        }
    }
    return stats;
}

std::vector<agent::Transition> collect_transitions(const AgentParams& params, const envs::EnvSpec& spec, int count,
                                                   uint64_t seed) {
    auto env = envs::make_env(spec);
    std::vector<agent::Transition> out;
    int ep = 0;
    while (static_cast<int>(out.size()) < count && ep < 1000) {
        Vec obs = env->reset(Rng::mix(seed, 0xAB0000ULL + ep));
        CarriedState carried;
        bool first = true;
        while (!env->done() && static_cast<int>(out.size()) < count) {
            auto ar = agent::act(params, obs, ActMode::Reactive, carried, nullptr);
            const auto sr = env->step(ar.action);
            out.push_back(agent::Transition{obs, ar.action, sr.reward, sr.next_obs, first, sr.terminal, sr.truncated});
            carried = ar.carried;
            obs = sr.next_obs;
            first = false;
        }
        ++ep;
    }
    return out;
}

double run_score(const std::vector<agent::TrainMetricsRow>& rows) {
    if (rows.empty()) throw std::invalid_argument("run_score: no metrics rows");
    const size_t tail = std::max<size_t>(1, rows.size() / 10);
    std::vector<double> last;
    for (size_t i = rows.size() - tail; i < rows.size(); ++i) last.push_back(rows[i].episode_return);
    return quantile(std::move(last), 0.5);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: empty");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = static_cast<size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<SweepCell> bitrate_sweep(const agent::AgentConfig& base, const std::vector<double>& budgets_bits,
                                     const std::vector<agent::Variant>& variants, int n_seeds, int parallelism) {
    if (budgets_bits.empty() || variants.empty() || n_seeds < 1) {
        throw std::invalid_argument("bitrate_sweep: need at least one budget, variant and seed");
    }
    struct Job {
        double budget;
        agent::Variant variant;
        int seed_idx;
        double score = 0.0;
    };
    std::vector<Job> jobs;
    for (agent::Variant v : variants) {
        for (double b : budgets_bits) {
            for (int s = 0; s < n_seeds; ++s) jobs.push_back(Job{b, v, s});
        }
    }

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= jobs.size()) break;
            agent::AgentConfig cfg = base;
            cfg.budget_bits = jobs[i].budget;
            cfg.variant = jobs[i].variant;
            cfg.seed = Rng::mix(base.seed, 0x5EED0000ULL + static_cast<uint64_t>(jobs[i].seed_idx));
            agent::Agent ag(cfg);
            jobs[i].score = run_score(ag.train());
        }
    };
    const int n_threads = std::max(1, std::min<int>(parallelism, static_cast<int>(jobs.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<SweepCell> cells;
    for (agent::Variant v : variants) {
        for (double b : budgets_bits) {
            std::vector<double> scores;
            for (const Job& j : jobs) {
                if (j.variant == v && j.budget == b) scores.push_back(j.score);
            }
            SweepCell cell;
            cell.budget_bits = b;
            cell.variant = v;
            cell.seeds = static_cast<int>(scores.size());
            cell.median_return = quantile(scores, 0.5);
            cell.q25 = quantile(scores, 0.25);
            cell.q75 = quantile(scores, 0.75);
            cells.push_back(cell);
        }
    }
    return cells;
}

}  // namespace rpclab::evalh
