#include "rpclab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rpclab::bounds {

namespace {
constexpr double kRowTol = 1e-12;

void check_rows(const std::vector<double>& table, int rows, int cols, const char* what) {
    if (static_cast<int64_t>(table.size()) != static_cast<int64_t>(rows) * cols) {
        throw std::invalid_argument(std::string(what) + ": bad table size");
    }
    for (int i = 0; i < rows; ++i) {
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            const double v = table[static_cast<size_t>(i) * cols + j];
            if (!(v > 0.0)) throw std::invalid_argument(std::string(what) + ": entries must be strictly positive");
            sum += v;
        }
        if (std::fabs(sum - 1.0) > kRowTol) {
            throw std::invalid_argument(std::string(what) + ": row " + std::to_string(i) + " sums to " +
                                        std::to_string(sum));
        }
    }
}
}  // namespace

double TabularMdp::max_reward() const { return *std::max_element(reward.begin(), reward.end()); }

void TabularMdp::validate() const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("TabularMdp: empty state or action space");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMdp: gamma must be in (0,1)");
    if (horizon < 1) throw std::invalid_argument("TabularMdp: horizon must be >= 1");
    check_rows(transition, n_states * n_actions, n_states, "TabularMdp transition");
    check_rows(initial, 1, n_states, "TabularMdp initial");
    if (static_cast<int>(reward.size()) != n_states * n_actions) throw std::invalid_argument("TabularMdp: reward size");
    for (double v : reward) {
        if (!(v > 0.0)) throw std::invalid_argument("TabularMdp: rewards must be strictly positive");
    }
}

void PolicyTriple::validate(const TabularMdp& mdp) const {
    if (n_latents < 1) throw std::invalid_argument("PolicyTriple: need at least one latent");
    check_rows(encoder, mdp.n_states, n_latents, "PolicyTriple encoder");
    check_rows(prior1, 1, n_latents, "PolicyTriple prior1");
    check_rows(prior, n_latents * mdp.n_actions, n_latents, "PolicyTriple prior");
    check_rows(decoder, n_latents, mdp.n_actions, "PolicyTriple decoder");
}

int64_t enumeration_paths(const TabularMdp& mdp, int n_latents) {
    double paths = 1.0;
    for (int t = 0; t < mdp.horizon; ++t) {
        paths *= static_cast<double>(mdp.n_states) * mdp.n_actions * n_latents;
        if (paths > 1e18) return std::numeric_limits<int64_t>::max();
    }
    return static_cast<int64_t>(paths);
}

namespace {

// One traversal of the trajectory tree carrying both path probabilities.
struct EnumAccum {
    double ret_react = 0.0;
    double ret_open = 0.0;
    double kl_direct = 0.0;
    double kl_log_ratio = 0.0;
};

struct EnumCtx {
    const TabularMdp* mdp;
    const PolicyTriple* triple;
    EnumAccum acc;

    // state at depth t (1-based step); z_prev/a_prev = -1 on the first step
    void walk(int t, int s, int z_prev, int a_prev, double p_react, double p_open, double ret, double log_ratio,
              double discount) {
        const auto& m = *mdp;
        const auto& tr = *triple;
        for (int z = 0; z < tr.n_latents; ++z) {
            const double pe = tr.enc(s, z);
            const double pm = t == 1 ? tr.m1(z) : tr.m(z_prev, a_prev, z, m.n_actions);
            const double pr_z = p_react * pe;
            const double po_z = p_open * pm;
            const double lr_z = log_ratio + std::log(pe) - std::log(pm);
            for (int a = 0; a < m.n_actions; ++a) {
                const double pd = tr.dec(z, a, m.n_actions);
                const double pr = pr_z * pd;
                const double po = po_z * pd;
                const double ret2 = ret + discount * m.r(s, a);
                if (t == m.horizon) {
                    acc.ret_react += pr * ret2;
                    acc.ret_open += po * ret2;
                    acc.kl_direct += pr * (std::log(pr) - std::log(po));
                    acc.kl_log_ratio += pr * lr_z;
                    continue;
                }
                for (int s2 = 0; s2 < m.n_states; ++s2) {
                    const double pt = m.p(s, a, s2);
                    walk(t + 1, s2, z, a, pr * pt, po * pt, ret2, lr_z, discount * m.gamma);
                }
            }
        }
    }
};

EnumAccum enumerate_all(const TabularMdp& mdp, const PolicyTriple& triple) {
    mdp.validate();
    triple.validate(mdp);
    if (enumeration_paths(mdp, triple.n_latents) > kEnumerationBudget) {
        throw std::runtime_error("enumeration budget exceeded: (nS*nA*nZ)^H > 1e7");
    }
    EnumCtx ctx{&mdp, &triple, {}};
    for (int s = 0; s < mdp.n_states; ++s) {
        ctx.walk(1, s, -1, -1, mdp.initial[static_cast<size_t>(s)], mdp.initial[static_cast<size_t>(s)], 0.0, 0.0,
                 mdp.gamma);
    }
    return ctx.acc;
}

}  // namespace

EnumResult enumerate_return(const TabularMdp& mdp, const PolicyTriple& triple, RolloutMode mode) {
    const EnumAccum acc = enumerate_all(mdp, triple);
    EnumResult out;
    out.value = mode == RolloutMode::Reactive ? acc.ret_react : acc.ret_open;
    out.tail_bound = std::pow(mdp.gamma, mdp.horizon) * mdp.max_reward() / (1.0 - mdp.gamma);
    return out;
}

TrajectoryKl trajectory_kl(const TabularMdp& mdp, const PolicyTriple& triple) {
    const EnumAccum acc = enumerate_all(mdp, triple);
    return {acc.kl_direct, acc.kl_log_ratio};
}

double dp_return(const TabularMdp& mdp, const PolicyTriple& triple, RolloutMode mode) {
    mdp.validate();
    triple.validate(mdp);
    const int nS = mdp.n_states, nA = mdp.n_actions, nZ = triple.n_latents;
    double total = 0.0;
    double discount = mdp.gamma;

    if (mode == RolloutMode::Reactive) {
        // z depends only on the current state, so the state marginal suffices
        std::vector<double> ps = mdp.initial;
        for (int t = 1; t <= mdp.horizon; ++t) {
            double step_reward = 0.0;
            std::vector<double> next(static_cast<size_t>(nS), 0.0);
            for (int s = 0; s < nS; ++s) {
                if (ps[static_cast<size_t>(s)] == 0.0) continue;
                for (int z = 0; z < nZ; ++z) {
                    const double pz = ps[static_cast<size_t>(s)] * triple.enc(s, z);
                    for (int a = 0; a < nA; ++a) {
                        const double pa = pz * triple.dec(z, a, nA);
                        step_reward += pa * mdp.r(s, a);
                        for (int s2 = 0; s2 < nS; ++s2) next[static_cast<size_t>(s2)] += pa * mdp.p(s, a, s2);
                    }
                }
            }
            total += discount * step_reward;
            discount *= mdp.gamma;
            ps = std::move(next);
        }
        return total;
    }

    // open loop: track the joint over (state, latent)
    std::vector<double> joint(static_cast<size_t>(nS) * nZ, 0.0);
    for (int s = 0; s < nS; ++s) {
        for (int z = 0; z < nZ; ++z) {
            joint[static_cast<size_t>(s) * nZ + z] = mdp.initial[static_cast<size_t>(s)] * triple.m1(z);
        }
    }
    for (int t = 1; t <= mdp.horizon; ++t) {
        double step_reward = 0.0;
        std::vector<double> next(static_cast<size_t>(nS) * nZ, 0.0);
        for (int s = 0; s < nS; ++s) {
            for (int z = 0; z < nZ; ++z) {
                const double pj = joint[static_cast<size_t>(s) * nZ + z];
                if (pj == 0.0) continue;
                for (int a = 0; a < nA; ++a) {
                    const double pa = pj * triple.dec(z, a, nA);
                    step_reward += pa * mdp.r(s, a);
                    for (int s2 = 0; s2 < nS; ++s2) {
                        const double ps2 = pa * mdp.p(s, a, s2);
                        for (int z2 = 0; z2 < nZ; ++z2) {
                            next[static_cast<size_t>(s2) * nZ + z2] += ps2 * triple.m(z, a, z2, nA);
                        }
                    }
                }
            }
        }
        total += discount * step_reward;
        discount *= mdp.gamma;
        joint = std::move(next);
    }
    return total;
}

double dp_lemma1_objective(const TabularMdp& mdp, const PolicyTriple& triple) {
    mdp.validate();
    triple.validate(mdp);
    const int nS = mdp.n_states, nA = mdp.n_actions, nZ = triple.n_latents;
    double total = 0.0;
    double discount = mdp.gamma;

    std::vector<double> ps = mdp.initial;  // state marginal under the reactive policy
    // joint over (state_t, z_{t-1}, a_{t-1}); empty at t=1
    std::vector<double> hist;
    for (int t = 1; t <= mdp.horizon; ++t) {
        double reward_term = 0.0;
        double info_term = 0.0;
        for (int s = 0; s < nS; ++s) {
            const double p = ps[static_cast<size_t>(s)];
            if (p == 0.0) continue;
            for (int z = 0; z < nZ; ++z) {
                const double pz = p * triple.enc(s, z);
                for (int a = 0; a < nA; ++a) {
                    reward_term += pz * triple.dec(z, a, nA) * (1.0 - mdp.gamma) * std::log(mdp.r(s, a));
                }
            }
        }
        if (t == 1) {
            for (int s = 0; s < nS; ++s) {
                const double p = ps[static_cast<size_t>(s)];
                for (int z = 0; z < nZ; ++z) {
                    info_term += p * triple.enc(s, z) * (std::log(triple.m1(z)) - std::log(triple.enc(s, z)));
                }
            }
        } else {
            for (int s = 0; s < nS; ++s) {
                for (int zp = 0; zp < nZ; ++zp) {
                    for (int ap = 0; ap < nA; ++ap) {
                        const double pj = hist[(static_cast<size_t>(s) * nZ + zp) * nA + ap];
                        if (pj == 0.0) continue;
                        for (int z = 0; z < nZ; ++z) {
                            info_term += pj * triple.enc(s, z) *
                                         (std::log(triple.m(zp, ap, z, nA)) - std::log(triple.enc(s, z)));
                        }
                    }
                }
            }
        }
        total += discount * (reward_term + info_term);

        // advance: joint over (s_{t+1}, z_t, a_t) only needs the state marginal
        std::vector<double> next_hist(static_cast<size_t>(nS) * nZ * nA, 0.0);
        std::vector<double> next_ps(static_cast<size_t>(nS), 0.0);
        for (int s = 0; s < nS; ++s) {
            const double p = ps[static_cast<size_t>(s)];
            if (p == 0.0) continue;
            for (int z = 0; z < nZ; ++z) {
                const double pz = p * triple.enc(s, z);
                for (int a = 0; a < nA; ++a) {
                    const double pa = pz * triple.dec(z, a, nA);
                    for (int s2 = 0; s2 < nS; ++s2) {
                        const double q = pa * mdp.p(s, a, s2);
                        next_hist[(static_cast<size_t>(s2) * nZ + z) * nA + a] += q;
                        next_ps[static_cast<size_t>(s2)] += q;
                    }
                }
            }
        }
        hist = std::move(next_hist);
        ps = std::move(next_ps);
        discount *= mdp.gamma;
    }
    return total;
}

namespace {

// Largest truncated return over any trajectory (dynamic program over
// reachable states), plus the geometric tail, as an upper bound on R_max.
double max_return_upper(const TabularMdp& mdp) {
    const int nS = mdp.n_states, nA = mdp.n_actions;
    std::vector<double> w(static_cast<size_t>(nS), 0.0);
    for (int t = mdp.horizon; t >= 1; --t) {
        std::vector<double> w_prev(static_cast<size_t>(nS), 0.0);
        for (int s = 0; s < nS; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < nA; ++a) {
                double best_next = 0.0;
                if (t < mdp.horizon) {
                    best_next = -std::numeric_limits<double>::infinity();
                    for (int s2 = 0; s2 < nS; ++s2) {
                        if (mdp.p(s, a, s2) > 0.0) best_next = std::max(best_next, w[static_cast<size_t>(s2)]);
                    }
                }
                best = std::max(best, mdp.r(s, a) + mdp.gamma * best_next);
            }
            w_prev[static_cast<size_t>(s)] = best;
        }
        w = std::move(w_prev);
    }
    double best_start = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < nS; ++s) {
        if (mdp.initial[static_cast<size_t>(s)] > 0.0) best_start = std::max(best_start, w[static_cast<size_t>(s)]);
    }
    const double tail = std::pow(mdp.gamma, mdp.horizon + 1) * mdp.max_reward() / (1.0 - mdp.gamma);
    return mdp.gamma * best_start + tail;
}

}  // namespace

LemmaCheck check_lemma2(const TabularMdp& mdp, const PolicyTriple& triple) {
    const EnumAccum acc = enumerate_all(mdp, triple);
    const double tail = std::pow(mdp.gamma, mdp.horizon) * mdp.max_reward() / (1.0 - mdp.gamma);
    const double r_max = max_return_upper(mdp);
    LemmaCheck out;
    out.lhs = acc.ret_open;
    out.rhs = acc.ret_react - r_max * std::sqrt(std::max(acc.kl_direct, 0.0) / 2.0) - 2.0 * tail;
    out.margin = out.lhs - out.rhs;
    out.holds = out.lhs >= out.rhs;
    return out;
}

double lemma1_f(double x, double gamma) { return gamma / (1.0 - gamma) * std::exp(x / gamma); }

LemmaCheck check_lemma1(const TabularMdp& mdp, const PolicyTriple& triple) {
    mdp.validate();
    triple.validate(mdp);
    const double lhs = dp_return(mdp, triple, RolloutMode::OpenLoop);
    const double x = dp_lemma1_objective(mdp, triple);

    // magnitude bound on one step's integrand, for the truncation slack
    double max_abs_log_r = 0.0;
    for (double r : mdp.reward) max_abs_log_r = std::max(max_abs_log_r, std::fabs(std::log(r)));
    double max_abs_log_m = 0.0;
    for (double v : triple.prior) max_abs_log_m = std::max(max_abs_log_m, std::fabs(std::log(v)));
    for (double v : triple.prior1) max_abs_log_m = std::max(max_abs_log_m, std::fabs(std::log(v)));
    double max_abs_log_enc = 0.0;
    for (double v : triple.encoder) max_abs_log_enc = std::max(max_abs_log_enc, std::fabs(std::log(v)));
    const double step_bound = (1.0 - mdp.gamma) * max_abs_log_r + max_abs_log_m + max_abs_log_enc;
    const double geom_tail = std::pow(mdp.gamma, mdp.horizon + 1) / (1.0 - mdp.gamma);
    const double x_tail = geom_tail * step_bound;
    const double lhs_tail = geom_tail * mdp.max_reward();

    LemmaCheck out;
    out.lhs = lhs + lhs_tail;
    out.rhs = lemma1_f(x - x_tail, mdp.gamma);
    out.margin = out.lhs - out.rhs;
    out.holds = out.lhs >= out.rhs;
    return out;
}

std::vector<double> optimal_encoder_tilt(const std::vector<double>& prior_row, const std::vector<double>& q_values,
                                         double lambda) {
    if (prior_row.size() != q_values.size()) throw std::invalid_argument("optimal_encoder_tilt: size mismatch");
    if (!(lambda > 0.0)) throw std::invalid_argument("optimal_encoder_tilt: lambda must be positive");
    // shift by max for stable exponentials
    double max_arg = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < prior_row.size(); ++i) {
        max_arg = std::max(max_arg, q_values[i] / lambda);
    }
    std::vector<double> out(prior_row.size());
    double z = 0.0;
    for (size_t i = 0; i < prior_row.size(); ++i) {
        out[i] = prior_row[i] * std::exp(q_values[i] / lambda - max_arg);
        z += out[i];
    }
    for (double& v : out) v /= z;
    return out;
}

namespace {

std::vector<double> project_simplex(std::vector<double> v) {
    // Euclidean projection (sort-based), then a tiny floor to keep logs finite
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double theta = 0.0;
    double cum = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        cum += u[i];
        const double t = (cum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    double sum = 0.0;
    for (double& x : v) {
        x = std::max(x - theta, 0.0) + 1e-15;
        sum += x;
    }
    for (double& x : v) x /= sum;
    return v;
}

double tilt_objective(const std::vector<double>& phi, const std::vector<double>& m, const std::vector<double>& q,
                      double lambda) {
    double total = 0.0;
    for (size_t i = 0; i < phi.size(); ++i) {
        total += phi[i] * q[i] + lambda * phi[i] * (std::log(m[i]) - std::log(phi[i]));
    }
    return total;
}

}  // namespace

std::vector<double> simplex_numerical_tilt(const std::vector<double>& prior_row, const std::vector<double>& q_values,
                                           double lambda, int steps) {
    const size_t n = prior_row.size();
    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    double fx = tilt_objective(x, prior_row, q_values, lambda);
    for (int it = 0; it < steps; ++it) {
        std::vector<double> g(n);
        for (size_t i = 0; i < n; ++i) {
            g[i] = q_values[i] + lambda * (std::log(prior_row[i]) - std::log(x[i]) - 1.0);
        }
        double eta = 0.5;
        bool improved = false;
        for (int bt = 0; bt < 40 && !improved; ++bt) {
            std::vector<double> cand(n);
            for (size_t i = 0; i < n; ++i) cand[i] = x[i] + eta * g[i];
            cand = project_simplex(std::move(cand));
            const double fc = tilt_objective(cand, prior_row, q_values, lambda);
            if (fc > fx) {
                x = std::move(cand);
                fx = fc;
                improved = true;
            } else {
                eta *= 0.5;
            }
        }
        if (!improved) break;  // numerically converged
    }
    return x;
}

double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
    double tv = 0.0;
    for (size_t i = 0; i < a.size(); ++i) tv += std::fabs(a[i] - b[i]);
    return 0.5 * tv;
}

namespace {
// random stochastic row mixed with a uniform floor
void random_row(Rng& rng, double* row, int n, double floor_mix) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        row[i] = -std::log(1.0 - rng.uniform());  // Exp(1) weights
        sum += row[i];
    }
    for (int i = 0; i < n; ++i) {
        row[i] = (1.0 - floor_mix) * row[i] / sum + floor_mix / n;
    }
    // exact renormalization
    sum = 0.0;
    for (int i = 0; i < n; ++i) sum += row[i];
    for (int i = 0; i < n; ++i) row[i] /= sum;
}
}  // namespace

TabularMdp random_mdp(Rng& rng, int n_states, int n_actions, double gamma, int horizon) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.horizon = horizon;
    mdp.transition.resize(static_cast<size_t>(n_states) * n_actions * n_states);
    mdp.reward.resize(static_cast<size_t>(n_states) * n_actions);
    mdp.initial.resize(static_cast<size_t>(n_states));
    for (int i = 0; i < n_states * n_actions; ++i) {
        random_row(rng, mdp.transition.data() + static_cast<size_t>(i) * n_states, n_states, 0.05);
    }
    for (double& v : mdp.reward) v = rng.uniform(0.1, 1.0);
    random_row(rng, mdp.initial.data(), n_states, 0.05);
    mdp.validate();
    return mdp;
}

PolicyTriple random_triple(Rng& rng, const TabularMdp& mdp, int n_latents) {
    PolicyTriple t;
    t.n_latents = n_latents;
    t.encoder.resize(static_cast<size_t>(mdp.n_states) * n_latents);
    t.prior1.resize(static_cast<size_t>(n_latents));
    t.prior.resize(static_cast<size_t>(n_latents) * mdp.n_actions * n_latents);
    t.decoder.resize(static_cast<size_t>(n_latents) * mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        random_row(rng, t.encoder.data() + static_cast<size_t>(s) * n_latents, n_latents, 0.05);
    }
    random_row(rng, t.prior1.data(), n_latents, 0.05);
    for (int i = 0; i < n_latents * mdp.n_actions; ++i) {
        random_row(rng, t.prior.data() + static_cast<size_t>(i) * n_latents, n_latents, 0.05);
    }
    for (int z = 0; z < n_latents; ++z) {
        random_row(rng, t.decoder.data() + static_cast<size_t>(z) * mdp.n_actions, mdp.n_actions, 0.05);
    }
    t.validate(mdp);
    return t;
}

}  // namespace rpclab::bounds
