#pragma once

#include <cstdint>
#include <vector>

#include "rpclab/tensor.hpp"

namespace rpclab::bounds {

// Finite MDP with everything needed for exact truncated enumeration.
// Rewards are strictly positive so log r is always defined.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;  // [s][a][s'], row-stochastic
    std::vector<double> reward;      // [s][a], > 0
    std::vector<double> initial;     // [s]
    double gamma = 0.5;
    int horizon = 6;

    double p(int s, int a, int s2) const {
        return transition[(static_cast<size_t>(s) * n_actions + a) * n_states + s2];
    }
    double r(int s, int a) const { return reward[static_cast<size_t>(s) * n_actions + a]; }
    double max_reward() const;
    void validate() const;
};

// Encoder/prior/decoder probability tables, all entries strictly positive.
struct PolicyTriple {
    int n_latents = 0;
    std::vector<double> encoder;  // [s][z]
    std::vector<double> prior1;   // [z], first-step prior
    std::vector<double> prior;    // [z_prev][a_prev][z]
    std::vector<double> decoder;  // [z][a]

    double enc(int s, int z) const { return encoder[static_cast<size_t>(s) * n_latents + z]; }
    double m1(int z) const { return prior1[static_cast<size_t>(z)]; }
    double m(int zp, int ap, int z, int n_actions) const {
        return prior[(static_cast<size_t>(zp) * n_actions + ap) * n_latents + z];
    }
    double dec(int z, int a, int n_actions) const { return decoder[static_cast<size_t>(z) * n_actions + a]; }
    void validate(const TabularMdp& mdp) const;
};

enum class RolloutMode { Reactive, OpenLoop };

int64_t enumeration_paths(const TabularMdp& mdp, int n_latents);
inline constexpr int64_t kEnumerationBudget = 10000000;

struct EnumResult {
    double value = 0.0;       // exact expected discounted return, truncated at H
    double tail_bound = 0.0;  // gamma^H * max(r) / (1 - gamma)
};

// Brute-force sum over every length-H trajectory. The oracle for the DP
// routes below; throws when the path budget would be exceeded.
EnumResult enumerate_return(const TabularMdp& mdp, const PolicyTriple& triple, RolloutMode mode);

struct TrajectoryKl {
    double direct = 0.0;         // sum_tau p_react log(p_react / p_open)
    double log_ratio_sum = 0.0;  // E_react[sum_t log enc - log m], same quantity
};
TrajectoryKl trajectory_kl(const TabularMdp& mdp, const PolicyTriple& triple);

// Exact forward-distribution recursions; no path explosion, so they work at
// horizons where enumeration cannot.
double dp_return(const TabularMdp& mdp, const PolicyTriple& triple, RolloutMode mode);
// E_react[sum_t gamma^t ((1-gamma) log r + log m - log enc)]
double dp_lemma1_objective(const TabularMdp& mdp, const PolicyTriple& triple);

struct LemmaCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;  // lhs - rhs (with slack applied)
    bool holds = false;
};

// open-loop return >= reactive return - R_max sqrt(KL/2) - 2 * tail
LemmaCheck check_lemma2(const TabularMdp& mdp, const PolicyTriple& triple);
// open-loop return + tail >= f(objective - tail), f(x) = gamma/(1-gamma) e^{x/gamma}
LemmaCheck check_lemma1(const TabularMdp& mdp, const PolicyTriple& triple);

double lemma1_f(double x, double gamma);

// phi*[z] = m[z] exp(Q[z]/lambda) / Z
std::vector<double> optimal_encoder_tilt(const std::vector<double>& prior_row, const std::vector<double>& q_values,
                                         double lambda);
// Independent oracle: projected gradient ascent on the simplex with
// backtracking line search.
std::vector<double> simplex_numerical_tilt(const std::vector<double>& prior_row, const std::vector<double>& q_values,
                                           double lambda, int steps);

double total_variation(const std::vector<double>& a, const std::vector<double>& b);

// Randomized instances for the property suites; probability rows are mixed
// with a uniform floor so every entry stays >= 1e-3.
TabularMdp random_mdp(Rng& rng, int n_states, int n_actions, double gamma, int horizon);
PolicyTriple random_triple(Rng& rng, const TabularMdp& mdp, int n_latents);

}  // namespace rpclab::bounds
