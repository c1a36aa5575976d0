#include "rpclab/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rpclab/gauss_graph.hpp"

namespace rpclab::agent {

using dist::DiagGaussian;
namespace gn = dist::gnodes;

Variant variant_from_name(const std::string& name) {
    if (name == "rpc") return Variant::Rpc;
    if (name == "vib") return Variant::Vib;
    if (name == "vib_reward") return Variant::VibReward;
    if (name == "sac") return Variant::Sac;
    throw std::invalid_argument("unknown variant '" + name + "' (rpc|vib|vib_reward|sac)");
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Rpc: return "rpc";
        case Variant::Vib: return "vib";
        case Variant::VibReward: return "vib_reward";
        case Variant::Sac: return "sac";
    }
    return "?";
}

uint32_t variant_code(Variant v) { return static_cast<uint32_t>(v); }

Variant variant_from_code(uint32_t code) {
    if (code > 3) throw std::invalid_argument("bad variant code " + std::to_string(code));
    return static_cast<Variant>(code);
}

namespace {
constexpr double kInitLogLambda = -13.815510557964274;  // log(1e-6)

bool predicted_prior(Variant v) { return v == Variant::Rpc || v == Variant::Sac; }
bool reward_augmented(Variant v) { return v == Variant::Rpc || v == Variant::VibReward; }
}  // namespace

MlpSpec Arch::encoder_spec(uint64_t seed) const { return {obs_dim, hidden, 2 * latent_dim, seed}; }
MlpSpec Arch::prior_spec(uint64_t seed) const { return {latent_dim + act_dim, hidden, 2 * latent_dim, seed}; }
MlpSpec Arch::policy_spec(uint64_t seed) const { return {latent_dim, hidden, 2 * act_dim, seed}; }
MlpSpec Arch::critic_spec(uint64_t seed) const { return {obs_dim + act_dim, hidden, 1, seed}; }

double AgentParams::log_lambda() const { return store.at("log_lambda").values[0]; }

void AgentParams::set_log_lambda(double v) { store.at("log_lambda").values[0] = v; }

double AgentParams::lambda() const { return variant == Variant::Sac ? 0.0 : std::exp(log_lambda()); }

AgentParams init_agent_params(const Arch& arch, Variant variant, uint64_t seed) {
    if (arch.obs_dim < 1 || arch.act_dim < 1 || arch.latent_dim < 1) {
        throw std::invalid_argument("init_agent_params: dims must be >= 1");
    }
    AgentParams p;
    p.arch = arch;
    p.variant = variant;
    mlp_init_params(arch.encoder_spec(Rng::mix(seed, 1)), "enc.", p.store);
    mlp_init_params(arch.prior_spec(Rng::mix(seed, 2)), "prior.", p.store);
    mlp_init_params(arch.policy_spec(Rng::mix(seed, 3)), "policy.", p.store);
    mlp_init_params(arch.critic_spec(Rng::mix(seed, 4)), "q1.", p.store);
    mlp_init_params(arch.critic_spec(Rng::mix(seed, 5)), "q2.", p.store);
    // target nets start as copies of the critics
    std::vector<std::pair<std::string, Tensor>> targets;
    for (const auto& [name, t] : p.store) {
        if (name.rfind("q1.", 0) == 0) targets.emplace_back("tq1." + name.substr(3), t);
        if (name.rfind("q2.", 0) == 0) targets.emplace_back("tq2." + name.substr(3), t);
    }
    for (auto& [name, t] : targets) p.store[name] = std::move(t);
    p.store["log_lambda"] = Tensor::scalar(kInitLogLambda);
    return p;
}

namespace {

Tensor row_tensor(const Vec& v) { return Tensor({1, static_cast<int>(v.size())}, v); }

DiagGaussian head_to_dist(const Tensor& raw, int k) {
    DiagGaussian d;
    d.mean.resize(k);
    d.std.resize(k);
    for (int i = 0; i < k; ++i) {
        d.mean[i] = dist::squash_to_range(raw.values[i], dist::kMeanLow, dist::kMeanHigh);
        d.std[i] = dist::squash_std(raw.values[k + i]);
    }
    return d;
}

}  // namespace

DiagGaussian encoder_dist(const AgentParams& p, const Vec& obs) {
    const Tensor raw = mlp_forward(p.arch.encoder_spec(), p.store, "enc.", row_tensor(obs));
    return head_to_dist(raw, p.arch.latent_dim);
}

DiagGaussian prior_predict(const AgentParams& p, const Vec& z, const Vec& action) {
    Vec in = z;
    in.insert(in.end(), action.begin(), action.end());
    const Tensor raw = mlp_forward(p.arch.prior_spec(), p.store, "prior.", row_tensor(in));
    const int k = p.arch.latent_dim;
    DiagGaussian d;
    d.mean.resize(k);
    d.std.resize(k);
    for (int i = 0; i < k; ++i) {
        d.mean[i] = dist::squash_to_range(z[i] + raw.values[i], dist::kMeanLow, dist::kMeanHigh);
        d.std[i] = dist::squash_std(raw.values[k + i]);
    }
    return d;
}

DiagGaussian initial_prior(int latent_dim) { return dist::unit_gaussian(latent_dim); }

DiagGaussian step_prior(const AgentParams& p, const Vec& z, const Vec& action) {
    if (predicted_prior(p.variant)) return prior_predict(p, z, action);
    return dist::unit_gaussian(p.arch.latent_dim);
}

DiagGaussian policy_dist(const AgentParams& p, const Vec& z) {
    const Tensor raw = mlp_forward(p.arch.policy_spec(), p.store, "policy.", row_tensor(z));
    return head_to_dist(raw, p.arch.act_dim);
}

double critic_value(const AgentParams& p, const std::string& prefix, const Vec& obs, const Vec& action) {
    Vec in = obs;
    in.insert(in.end(), action.begin(), action.end());
    return mlp_forward(p.arch.critic_spec(), p.store, prefix, row_tensor(in)).values[0];
}

double min_critic_value(const AgentParams& p, const Vec& obs, const Vec& action) {
    return std::min(critic_value(p, "q1.", obs, action), critic_value(p, "q2.", obs, action));
}

EncodeResult encode(const AgentParams& p, const Vec& obs, const Vec& noise) {
    for (double v : obs) {
        if (!std::isfinite(v)) throw std::invalid_argument("encode: non-finite observation");
    }
    EncodeResult r;
    r.dist = encoder_dist(p, obs);
    r.z = dist::sample_reparam(r.dist, noise);
    return r;
}

double info_cost(const AgentParams& p, const Transition& t, const Vec& z_t) {
    const DiagGaussian enc_next = encoder_dist(p, t.next_obs);
    const DiagGaussian prior = step_prior(p, z_t, t.action);
    double cost = dist::kl_diag(enc_next, prior);
    if (t.is_first) {
        cost += dist::kl_diag(encoder_dist(p, t.obs), dist::unit_gaussian(p.arch.latent_dim));
    }
    return cost;
}

double augmented_reward(double reward, double info_cost_nats, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("augmented_reward: lambda must be >= 0");
    return reward - lambda * info_cost_nats;
}

double dual_update(AdamState& state, double log_lambda, double measured_cost_nats, double budget_nats) {
    Tensor p({1}, {log_lambda});
    Tensor grad({1}, {budget_nats - measured_cost_nats});
    adam_step(state, p, grad);
    return p.values[0];
}

double td_target(double reward, double cost_nats, double lambda_reward, double gamma, bool terminal,
                 double min_target_q) {
    const double r_tilde = augmented_reward(reward, cost_nats, lambda_reward);
    return r_tilde + gamma * (terminal ? 0.0 : min_target_q);
}

ActResult act(const AgentParams& p, const Vec& obs, ActMode mode, const CarriedState& carried, Rng* rng) {
    const int k = p.arch.latent_dim;
    ActResult out;
    Vec z;
    if (mode == ActMode::Reactive) {
        const DiagGaussian enc = encoder_dist(p, obs);
        if (rng) {
            z = dist::sample_reparam(enc, rng->normal_vec(k));
        } else {
            z = enc.mean;
        }
        const DiagGaussian prior =
            carried.has ? step_prior(p, carried.z, carried.action) : dist::unit_gaussian(k);
        out.cost_nats = dist::kl_diag(enc, prior);
    } else {
        if (!carried.has) throw std::logic_error("act: open-loop step requires a carried latent from a real initial observation");
        // latent propagated through the prior mean; no bits observed
        z = step_prior(p, carried.z, carried.action).mean;
        out.cost_nats = 0.0;
    }
    const DiagGaussian pd = policy_dist(p, z);
    Vec pre = rng ? dist::sample_reparam(pd, rng->normal_vec(p.arch.act_dim)) : pd.mean;
    out.action.resize(pre.size());
    for (size_t i = 0; i < pre.size(); ++i) out.action[i] = std::tanh(pre[i]);
    out.carried = CarriedState{true, std::move(z), out.action};
    return out;
}

EpisodeStats run_episode(const AgentParams& p, envs::Env& env, uint64_t env_seed) {
    EpisodeStats stats;
    Vec obs = env.reset(env_seed);
    CarriedState carried;
    double cost_nats = 0.0;
    while (!env.done()) {
        ActResult ar = act(p, obs, ActMode::Reactive, carried, nullptr);
        const auto sr = env.step(ar.action);
        stats.episode_return += sr.reward;
        cost_nats += ar.cost_nats;
        ++stats.steps;
        carried = ar.carried;
        obs = sr.next_obs;
    }
    stats.mean_cost_bits = stats.steps > 0 ? dist::nats_to_bits(cost_nats / stats.steps) : 0.0;
    return stats;
}

std::unique_ptr<Graph> build_actor_graph(const Arch& arch, Variant variant, int batch) {
    auto graph = std::make_unique<Graph>();
    Graph& g = *graph;
    const int k = arch.latent_dim;

    const int obs = g.input("obs", {batch, arch.obs_dim});
    const int next_obs = g.input("next_obs", {batch, arch.obs_dim});
    const int action = g.input("action", {batch, arch.act_dim});
    const int noise_z = g.input("noise_z", {batch, k});
    const int noise_znext = g.input("noise_znext", {batch, k});
    const int noise_a = g.input("noise_a", {batch, arch.act_dim});
    const int first = g.input("first", {batch, 1});
    const int lambda = g.input("lambda", {1, 1});
    (void)noise_z;

    // phi(s') and the next action through the latent policy
    const auto enc_next = gn::gauss_head(g, mlp_apply(g, arch.encoder_spec(), "enc.", next_obs), k);
    const int z_next = gn::reparam(g, enc_next, noise_znext);
    const auto pol = gn::gauss_head(g, mlp_apply(g, arch.policy_spec(), "policy.", z_next), arch.act_dim);
    const int a_next = g.tanh_(gn::reparam(g, pol, noise_a));
    g.mark_output("a_next", a_next);

    // frozen critics evaluated at (s', a'); gradient reaches a' but not the
    // critic weights
    const int q_in = g.concat_cols(next_obs, a_next);
    const int q1 = mlp_apply(g, arch.critic_spec(), "q1.", q_in, /*trainable=*/false);
    const int q2 = mlp_apply(g, arch.critic_spec(), "q2.", q_in, /*trainable=*/false);
    const int min_q = g.min_elem(q1, q2);

    if (variant == Variant::Sac) {
        g.mark_output("loss", g.neg(g.mean_all(min_q)));
        g.mark_output("cost", gn::kl_to_unit(g, enc_next));
        return graph;
    }

    const auto enc_cur = gn::gauss_head(g, mlp_apply(g, arch.encoder_spec(), "enc.", obs, true), k);
    const int z_cur = gn::reparam(g, enc_cur, noise_z);

    int log_m = -1;
    int cost = -1;
    if (predicted_prior(variant)) {
        const int prior_raw = mlp_apply(g, arch.prior_spec(), "prior.", g.concat_cols(z_cur, action));
        const auto prior = gn::prior_head(g, prior_raw, z_cur, k);
        log_m = gn::log_prob(g, prior, z_next);
        cost = gn::kl_diag(g, enc_next, prior);
    } else {
        log_m = gn::log_prob_unit(g, z_next);
        cost = gn::kl_to_unit(g, enc_next);
    }
    const int info_term = g.sub(log_m, gn::log_prob(g, enc_next, z_next));
    const int first_term = g.mul(first, g.sub(gn::log_prob_unit(g, z_cur), gn::log_prob(g, enc_cur, z_cur)));
    const int objective = g.add(min_q, g.scalar_mul(g.add(info_term, first_term), lambda));
    g.mark_output("loss", g.neg(g.mean_all(objective)));
    g.mark_output("cost", g.add(cost, g.mul(first, gn::kl_to_unit(g, enc_cur))));
    return graph;
}

std::unique_ptr<Graph> build_critic_graph(const Arch& arch, int batch) {
    auto graph = std::make_unique<Graph>();
    Graph& g = *graph;
    const int obs = g.input("obs", {batch, arch.obs_dim});
    const int action = g.input("action", {batch, arch.act_dim});
    const int y = g.input("y", {batch, 1});
    const int q_in = g.concat_cols(obs, action);
    const int q1 = mlp_apply(g, arch.critic_spec(), "q1.", q_in);
    const int q2 = mlp_apply(g, arch.critic_spec(), "q2.", q_in);
    const int e1 = g.scale(g.square(g.sub(q1, y)), 0.5);
    const int e2 = g.scale(g.square(g.sub(q2, y)), 0.5);
    g.mark_output("loss", g.mean_all(g.add(e1, e2)));
    g.mark_output("q1", q1);
    g.mark_output("q2", q2);
    return graph;
}

BatchInputs assemble_batch(const Arch& arch, const std::vector<const Transition*>& batch, double lambda,
                           Rng& noise_rng) {
    const int b = static_cast<int>(batch.size());
    if (b < 1) throw std::invalid_argument("assemble_batch: empty batch");
    BatchInputs out;
    Tensor obs = Tensor::zeros({b, arch.obs_dim});
    Tensor next_obs = Tensor::zeros({b, arch.obs_dim});
    Tensor action = Tensor::zeros({b, arch.act_dim});
    Tensor first = Tensor::zeros({b, 1});
    out.rewards = Tensor::zeros({b, 1});
    out.terminal = Tensor::zeros({b, 1});
    for (int i = 0; i < b; ++i) {
        const Transition& t = *batch[static_cast<size_t>(i)];
        if (static_cast<int>(t.obs.size()) != arch.obs_dim || static_cast<int>(t.action.size()) != arch.act_dim) {
            throw std::invalid_argument("assemble_batch: transition dims do not match the architecture");
        }
        std::copy(t.obs.begin(), t.obs.end(), obs.values.begin() + static_cast<int64_t>(i) * arch.obs_dim);
        std::copy(t.next_obs.begin(), t.next_obs.end(),
                  next_obs.values.begin() + static_cast<int64_t>(i) * arch.obs_dim);
        std::copy(t.action.begin(), t.action.end(), action.values.begin() + static_cast<int64_t>(i) * arch.act_dim);
        first.values[static_cast<size_t>(i)] = t.is_first ? 1.0 : 0.0;
        out.rewards.values[static_cast<size_t>(i)] = t.reward;
        out.terminal.values[static_cast<size_t>(i)] = t.is_terminal ? 1.0 : 0.0;
    }
    Tensor noise_z = Tensor::zeros({b, arch.latent_dim});
    Tensor noise_znext = Tensor::zeros({b, arch.latent_dim});
    Tensor noise_a = Tensor::zeros({b, arch.act_dim});
    for (double& v : noise_z.values) v = noise_rng.normal();
    for (double& v : noise_znext.values) v = noise_rng.normal();
    for (double& v : noise_a.values) v = noise_rng.normal();
    out.actor["obs"] = std::move(obs);
    out.actor["next_obs"] = std::move(next_obs);
    out.actor["action"] = std::move(action);
    out.actor["noise_z"] = std::move(noise_z);
    out.actor["noise_znext"] = std::move(noise_znext);
    out.actor["noise_a"] = std::move(noise_a);
    out.actor["first"] = std::move(first);
    out.actor["lambda"] = Tensor({1, 1}, {lambda});
    return out;
}

Agent::Agent(AgentConfig cfg)
    : Agent(std::move(cfg), AgentParams{}) {}

Agent::Agent(AgentConfig cfg, AgentParams params)
    : cfg_(std::move(cfg)), noise_rng_(Rng::mix(cfg_.seed, 0x6e6f697365ULL)) {
    Arch arch{cfg_.env.obs_dim, cfg_.env.act_dim, cfg_.latent_dim, cfg_.hidden};
    if (params.store.empty()) {
        params_ = init_agent_params(arch, cfg_.variant, cfg_.seed);
    } else {
        if (params.arch.obs_dim != arch.obs_dim || params.arch.act_dim != arch.act_dim ||
            params.arch.latent_dim != arch.latent_dim || params.arch.hidden != arch.hidden) {
            throw std::invalid_argument("agent: checkpoint architecture does not match the configuration");
        }
        if (params.variant != cfg_.variant) {
            throw std::invalid_argument("agent: checkpoint variant " + variant_name(params.variant) +
                                        " does not match configured " + variant_name(cfg_.variant));
        }
        params_ = std::move(params);
    }
    buffer_ = std::make_unique<ReplayBuffer>(cfg_.replay_capacity, Rng::mix(cfg_.seed, 0x627566ULL));
    actor_graph_ = build_actor_graph(arch, cfg_.variant, cfg_.batch_size);
    critic_graph_ = build_critic_graph(arch, cfg_.batch_size);
    for (const auto& name : actor_graph_->param_names()) {
        actor_adam_.emplace(name, AdamState::for_size(params_.store.at(name).size(), cfg_.lr));
    }
    for (const auto& name : critic_graph_->param_names()) {
        critic_adam_.emplace(name, AdamState::for_size(params_.store.at(name).size(), cfg_.lr));
    }
    dual_adam_ = AdamState::for_size(1, cfg_.dual_lr);
}

void Agent::apply_grads(const TensorMap& grads, std::map<std::string, AdamState>& states) {
    for (const auto& [name, grad] : grads) {
        adam_step(states.at(name), params_.store.at(name), grad);
    }
}

void Agent::polyak_targets() {
    const double tau = cfg_.tau;
    for (auto& [name, target] : params_.store) {
        if (name.rfind("tq", 0) != 0) continue;
        const Tensor& src = params_.store.at("q" + name.substr(2));
        for (size_t i = 0; i < target.values.size(); ++i) {
            target.values[i] = (1.0 - tau) * target.values[i] + tau * src.values[i];
        }
    }
}

StepMetrics Agent::train_step() {
    if (buffer_->size() < cfg_.batch_size) {
        throw std::runtime_error("train_step: replay buffer underfull (" + std::to_string(buffer_->size()) + " < " +
                                 std::to_string(cfg_.batch_size) + ")");
    }
    const auto batch = buffer_->sample_batch(cfg_.batch_size);
    const double lambda = params_.lambda();
    BatchInputs in = assemble_batch(params_.arch, batch, lambda, noise_rng_);

    actor_graph_->forward(in.actor, params_.store);
    const Tensor cost = actor_graph_->output("cost");
    const Tensor a_next = actor_graph_->output("a_next");
    const double actor_loss = actor_graph_->output("loss").values[0];

    // TD target from the target critics; no gradient flows through it
    const int b = cfg_.batch_size;
    const double lambda_r = reward_augmented(cfg_.variant) ? lambda : 0.0;
    Tensor target_in = Tensor::zeros({b, params_.arch.obs_dim + params_.arch.act_dim});
    for (int i = 0; i < b; ++i) {
        double* row = target_in.values.data() + static_cast<int64_t>(i) * (params_.arch.obs_dim + params_.arch.act_dim);
        const double* nobs = in.actor.at("next_obs").values.data() + static_cast<int64_t>(i) * params_.arch.obs_dim;
        const double* an = a_next.values.data() + static_cast<int64_t>(i) * params_.arch.act_dim;
        std::copy(nobs, nobs + params_.arch.obs_dim, row);
        std::copy(an, an + params_.arch.act_dim, row + params_.arch.obs_dim);
    }
    const Tensor tq1 = mlp_forward(params_.arch.critic_spec(), params_.store, "tq1.", target_in);
    const Tensor tq2 = mlp_forward(params_.arch.critic_spec(), params_.store, "tq2.", target_in);
    Tensor y = Tensor::zeros({b, 1});
    double cost_sum = 0.0;
    for (int i = 0; i < b; ++i) {
        const double c = cost.values[static_cast<size_t>(i)];
        cost_sum += c;
        y.values[static_cast<size_t>(i)] =
            td_target(in.rewards.values[static_cast<size_t>(i)], c, lambda_r, cfg_.gamma,
                      in.terminal.values[static_cast<size_t>(i)] != 0.0,
                      std::min(tq1.values[static_cast<size_t>(i)], tq2.values[static_cast<size_t>(i)]));
    }

    TensorMap critic_in;
    critic_in["obs"] = in.actor.at("obs");
    critic_in["action"] = in.actor.at("action");
    critic_in["y"] = std::move(y);
    critic_graph_->forward(critic_in, params_.store);
    const double critic_loss = critic_graph_->output("loss").values[0];
    critic_graph_->backward(critic_graph_->output_id("loss"));
    apply_grads(critic_graph_->param_grads(), critic_adam_);

    actor_graph_->backward(actor_graph_->output_id("loss"));
    apply_grads(actor_graph_->param_grads(), actor_adam_);

    const double mean_cost_nats = cost_sum / b;
    if (cfg_.variant != Variant::Sac) {
        params_.set_log_lambda(dual_update(dual_adam_, params_.log_lambda(), mean_cost_nats,
                                           dist::bits_to_nats(cfg_.budget_bits)));
    }
    polyak_targets();

    StepMetrics m;
    m.critic_loss = critic_loss;
    m.actor_loss = actor_loss;
    m.mean_cost_bits = dist::nats_to_bits(mean_cost_nats);
    m.lambda = params_.lambda();
    return m;
}

double Agent::evaluate_mean_return() {
    auto env = envs::make_env(cfg_.env);
    double total = 0.0;
    for (int i = 0; i < cfg_.eval_episodes; ++i) {
        total += run_episode(params_, *env, Rng::mix(cfg_.seed, 0xE5A1000ULL + i)).episode_return;
    }
    return total / cfg_.eval_episodes;
}

std::vector<TrainMetricsRow> Agent::train() {
    auto env = envs::make_env(cfg_.env);
    int64_t episode_idx = 0;
    Vec obs = env->reset(Rng::mix(cfg_.seed, 0xE9150000ULL + episode_idx));
    CarriedState carried;
    bool is_first = true;

    std::vector<TrainMetricsRow> rows;
    double win_critic = 0.0, win_actor = 0.0, win_cost = 0.0;
    int64_t win_updates = 0;

    for (int64_t step = 1; step <= cfg_.total_steps; ++step) {
        ActResult ar = act(params_, obs, ActMode::Reactive, carried, &noise_rng_);
        const auto sr = env->step(ar.action);
        buffer_->push(Transition{obs, ar.action, sr.reward, sr.next_obs, is_first, sr.terminal, sr.truncated});
        is_first = false;
        if (env->done()) {
            ++episode_idx;
            obs = env->reset(Rng::mix(cfg_.seed, 0xE9150000ULL + episode_idx));
            carried = CarriedState{};
            is_first = true;
        } else {
            obs = sr.next_obs;
            carried = ar.carried;
        }

        if (buffer_->size() >= cfg_.batch_size) {
            const StepMetrics m = train_step();
            win_critic += m.critic_loss;
            win_actor += m.actor_loss;
            win_cost += m.mean_cost_bits;
            ++win_updates;
        }

        if (step % cfg_.eval_every == 0 || step == cfg_.total_steps) {
            TrainMetricsRow row;
            row.step = step;
            row.episode_return = evaluate_mean_return();
            row.info_bits_per_step = win_updates > 0 ? win_cost / win_updates : 0.0;
            row.lambda = params_.lambda();
            row.critic_loss = win_updates > 0 ? win_critic / win_updates : 0.0;
            row.actor_loss = win_updates > 0 ? win_actor / win_updates : 0.0;
            row.seed = cfg_.seed;
            rows.push_back(row);
            win_critic = win_actor = win_cost = 0.0;
            win_updates = 0;
            if (step == cfg_.total_steps) break;
        }
    }
    return rows;
}

}  // namespace rpclab::agent
