#include "rpclab/hrl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rpclab::hrl {

void CemConfig::validate() const {
    if (population < 2) throw std::invalid_argument("CemConfig: population must be >= 2");
    if (!(elite_frac > 0.0 && elite_frac <= 1.0)) throw std::invalid_argument("CemConfig: elite_frac in (0,1]");
    if (iterations < 1) throw std::invalid_argument("CemConfig: iterations must be >= 1");
    if (!(init_stddev > 0.0)) throw std::invalid_argument("CemConfig: init_stddev must be positive");
}

int CemConfig::elite_count() const {
    return std::max(1, static_cast<int>(std::floor(elite_frac * population)));
}

double plan_return(const agent::AgentParams& params, envs::Env& env, const BehaviorPlan& plan, uint64_t seed) {
    if (plan.z_list.empty()) throw std::invalid_argument("plan_return: plan needs at least one latent");
    env.reset(seed);
    double total = 0.0;
    for (const auto& commanded : plan.z_list) {
        std::vector<double> z = commanded;
        for (int i = 0; i < plan.segment_horizon; ++i) {
            const auto pd = agent::policy_dist(params, z);
            std::vector<double> action(pd.mean.size());
            for (size_t j = 0; j < action.size(); ++j) action[j] = std::tanh(pd.mean[j]);
            const auto sr = env.step(action);
            total += sr.reward;
            if (env.done()) return total;
            z = agent::prior_predict(params, z, action).mean;
        }
    }
    return total;
}

CemResult cem_optimize(const agent::AgentParams& params, envs::Env& env, int k, int segment_horizon,
                       const CemConfig& cem) {
    cem.validate();
    if (k < 1 || segment_horizon < 0) throw std::invalid_argument("cem_optimize: bad plan shape");
    const int latent = params.arch.latent_dim;
    const int dims = k * latent;
    const uint64_t plan_seed = Rng::mix(cem.seed, 0x706c616eULL);
    Rng rng(Rng::mix(cem.seed, 0x63656dULL));

    std::vector<double> mean(static_cast<size_t>(dims), 0.0);
    std::vector<double> stddev(static_cast<size_t>(dims), cem.init_stddev);

    auto to_plan = [&](const std::vector<double>& flat) {
        BehaviorPlan plan;
        plan.segment_horizon = segment_horizon;
        plan.z_list.resize(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) {
            plan.z_list[static_cast<size_t>(i)].assign(flat.begin() + static_cast<int64_t>(i) * latent,
                                                       flat.begin() + static_cast<int64_t>(i + 1) * latent);
        }
        return plan;
    };

    CemResult result;
    result.best_return = -std::numeric_limits<double>::infinity();
    const int n_elite = cem.elite_count();

    for (int it = 0; it < cem.iterations; ++it) {
        std::vector<std::vector<double>> pop(static_cast<size_t>(cem.population));
        std::vector<double> score(static_cast<size_t>(cem.population));
        for (int i = 0; i < cem.population; ++i) {
            auto& cand = pop[static_cast<size_t>(i)];
            cand.resize(static_cast<size_t>(dims));
            for (int d = 0; d < dims; ++d) {
                const double v = mean[static_cast<size_t>(d)] + stddev[static_cast<size_t>(d)] * rng.normal();
                cand[static_cast<size_t>(d)] = std::clamp(v, dist::kMeanLow, dist::kMeanHigh);
            }
            score[static_cast<size_t>(i)] = plan_return(params, env, to_plan(cand), plan_seed);
            if (score[static_cast<size_t>(i)] > result.best_return) {
                result.best_return = score[static_cast<size_t>(i)];
                result.best = to_plan(cand);
            }
        }
        // refit to the elite set
        std::vector<int> order(static_cast<size_t>(cem.population));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return score[static_cast<size_t>(a)] > score[static_cast<size_t>(b)];
        });
        for (int d = 0; d < dims; ++d) {
            double m = 0.0;
            for (int e = 0; e < n_elite; ++e) m += pop[static_cast<size_t>(order[static_cast<size_t>(e)])][static_cast<size_t>(d)];
            m /= n_elite;
            double var = 0.0;
            for (int e = 0; e < n_elite; ++e) {
                const double dv = pop[static_cast<size_t>(order[static_cast<size_t>(e)])][static_cast<size_t>(d)] - m;
                var += dv * dv;
            }
            var /= std::max(1, n_elite - 1);
            mean[static_cast<size_t>(d)] = m;
            stddev[static_cast<size_t>(d)] = std::max(std::sqrt(var), 1e-2);
        }
        result.curve.push_back(result.best_return);
    }
    return result;
}

}  // namespace rpclab::hrl
