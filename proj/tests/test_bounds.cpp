#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "rpclab/bounds.hpp"

using namespace rpclab;
using namespace rpclab::bounds;

namespace {

TabularMdp single_state_mdp(double reward, double gamma, int horizon) {
    TabularMdp m;
    m.n_states = 1;
    m.n_actions = 1;
    m.transition = {1.0};
    m.reward = {reward};
    m.initial = {1.0};
    m.gamma = gamma;
    m.horizon = horizon;
    return m;
}

PolicyTriple trivial_triple() {
    PolicyTriple t;
    t.n_latents = 1;
    t.encoder = {1.0};
    t.prior1 = {1.0};
    t.prior = {1.0};
    t.decoder = {1.0};
    return t;
}

// state-independent encoder identical to the prior: reactive and open-loop
// trajectory distributions coincide
PolicyTriple matched_triple(Rng& rng, const TabularMdp& mdp, int n_latents) {
    PolicyTriple t = random_triple(rng, mdp, n_latents);
    std::vector<double> w(t.prior1);
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int z = 0; z < n_latents; ++z) t.encoder[static_cast<size_t>(s) * n_latents + z] = w[static_cast<size_t>(z)];
    }
    for (int zp = 0; zp < n_latents; ++zp) {
        for (int ap = 0; ap < mdp.n_actions; ++ap) {
            for (int z = 0; z < n_latents; ++z) {
                t.prior[(static_cast<size_t>(zp) * mdp.n_actions + ap) * n_latents + z] = w[static_cast<size_t>(z)];
            }
        }
    }
    return t;
}

// independent slow enumerator for the discounted lemma-1 objective
double lemma1_objective_brute(const TabularMdp& m, const PolicyTriple& tr) {
    double total = 0.0;
    struct Frame {
        int s, z_prev, a_prev;
    };
    std::function<void(int, int, int, int, double, double)> walk = [&](int t, int s, int z_prev, int a_prev,
                                                                       double prob, double partial) {
        for (int z = 0; z < tr.n_latents; ++z) {
            const double pe = tr.enc(s, z);
            const double pm = t == 1 ? tr.m1(z) : tr.m(z_prev, a_prev, z, m.n_actions);
            for (int a = 0; a < m.n_actions; ++a) {
                const double pd = tr.dec(z, a, m.n_actions);
                const double p = prob * pe * pd;
                const double term = partial + std::pow(m.gamma, t) * ((1.0 - m.gamma) * std::log(m.r(s, a)) +
                                                                      std::log(pm) - std::log(pe));
                if (t == m.horizon) {
                    total += p * term;
                    continue;
                }
                for (int s2 = 0; s2 < m.n_states; ++s2) {
                    walk(t + 1, s2, z, a, p * m.p(s, a, s2), term);
                }
            }
        }
    };
    for (int s = 0; s < m.n_states; ++s) walk(1, s, -1, -1, m.initial[static_cast<size_t>(s)], 0.0);
    return total;
}

}  // namespace

TEST_CASE("enumerate_return: geometric series on the single-state chain") {
    const TabularMdp m = single_state_mdp(1.0, 0.5, 20);
    const PolicyTriple t = trivial_triple();
    const double expect = 1.0 - std::pow(0.5, 20);  // sum_{t=1..20} 0.5^t
    CHECK(enumerate_return(m, t, RolloutMode::Reactive).value == doctest::Approx(expect).epsilon(1e-12));
    CHECK(enumerate_return(m, t, RolloutMode::OpenLoop).value == doctest::Approx(expect).epsilon(1e-12));
    CHECK(enumerate_return(m, t, RolloutMode::Reactive).value == doctest::Approx(0.99999905).epsilon(1e-7));
}

TEST_CASE("enumerate_return: state-independent encoder equal to the prior closes the gap") {
    Rng rng(3);
    const TabularMdp m = random_mdp(rng, 3, 2, 0.7, 5);
    const PolicyTriple t = matched_triple(rng, m, 2);
    const auto react = enumerate_return(m, t, RolloutMode::Reactive);
    const auto open = enumerate_return(m, t, RolloutMode::OpenLoop);
    CHECK(react.value == doctest::Approx(open.value).epsilon(1e-13));
    const auto kl = trajectory_kl(m, t);
    CHECK(kl.direct == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("enumerate_return: Monte-Carlo oracle agrees within 3 standard errors") {
    Rng rng(11);
    const TabularMdp m = random_mdp(rng, 3, 2, 0.8, 6);
    const PolicyTriple t = random_triple(rng, m, 2);
    const double exact = enumerate_return(m, t, RolloutMode::Reactive).value;

    Rng sim(123);
    auto draw = [&](const double* row, int n) {
        double u = sim.uniform();
        for (int i = 0; i < n - 1; ++i) {
            u -= row[i];
            if (u < 0.0) return i;
        }
        return n - 1;
    };
    const int episodes = 1000000;
    double mean = 0.0, m2 = 0.0;
    for (int ep = 0; ep < episodes; ++ep) {
        int s = draw(m.initial.data(), m.n_states);
        double ret = 0.0, disc = m.gamma;
        for (int step = 1; step <= m.horizon; ++step) {
            const int z = draw(t.encoder.data() + static_cast<size_t>(s) * t.n_latents, t.n_latents);
            const int a = draw(t.decoder.data() + static_cast<size_t>(z) * m.n_actions, m.n_actions);
            ret += disc * m.r(s, a);
            disc *= m.gamma;
            s = draw(m.transition.data() + (static_cast<size_t>(s) * m.n_actions + a) * m.n_states, m.n_states);
        }
        const double delta = ret - mean;
        mean += delta / (ep + 1);
        m2 += delta * (ret - mean);
    }
    const double se = std::sqrt(m2 / (episodes - 1) / episodes);
    CHECK(std::fabs(mean - exact) < 3.0 * se);
}

TEST_CASE("enumeration budget is enforced") {
    Rng rng(5);
    TabularMdp m = random_mdp(rng, 3, 2, 0.5, 25);
    const PolicyTriple t = random_triple(rng, m, 2);
    CHECK(enumeration_paths(m, 2) > kEnumerationBudget);
    CHECK_THROWS(enumerate_return(m, t, RolloutMode::Reactive));
}

TEST_CASE("trajectory_kl: nonnegative, and both computation routes agree to 1e-10") {
    Rng rng(17);
    for (int draw = 0; draw < 100; ++draw) {
        const TabularMdp m = random_mdp(rng, 2, 2, 0.6, 4);
        const PolicyTriple t = random_triple(rng, m, 2);
        const auto kl = trajectory_kl(m, t);
        CHECK(kl.direct >= -1e-12);
        CHECK(std::fabs(kl.direct - kl.log_ratio_sum) < 1e-10);
    }
}

TEST_CASE("dp_return matches the brute-force enumeration oracle") {
    Rng rng(23);
    for (int draw = 0; draw < 20; ++draw) {
        const TabularMdp m = random_mdp(rng, 3, 2, 0.55 + 0.01 * draw, 5);
        const PolicyTriple t = random_triple(rng, m, 2);
        CHECK(dp_return(m, t, RolloutMode::Reactive) ==
              doctest::Approx(enumerate_return(m, t, RolloutMode::Reactive).value).epsilon(1e-12));
        CHECK(dp_return(m, t, RolloutMode::OpenLoop) ==
              doctest::Approx(enumerate_return(m, t, RolloutMode::OpenLoop).value).epsilon(1e-12));
    }
}

TEST_CASE("dp_lemma1_objective matches a brute-force discounted enumeration") {
    Rng rng(29);
    for (int draw = 0; draw < 10; ++draw) {
        const TabularMdp m = random_mdp(rng, 2, 2, 0.5, 4);
        const PolicyTriple t = random_triple(rng, m, 2);
        CHECK(dp_lemma1_objective(m, t) == doctest::Approx(lemma1_objective_brute(m, t)).epsilon(1e-11));
    }
}

TEST_CASE("check_lemma2: identical trajectory distributions hold trivially") {
    Rng rng(31);
    const TabularMdp m = random_mdp(rng, 3, 2, 0.7, 5);
    const PolicyTriple t = matched_triple(rng, m, 2);
    const auto res = check_lemma2(m, t);
    CHECK(res.holds);
    // with zero KL the bound reduces to the truncation slack alone
    CHECK(res.lhs - res.rhs == doctest::Approx(2.0 * std::pow(0.7, 5) * m.max_reward() / 0.3).epsilon(1e-9));
}

TEST_CASE("check_lemma2 holds on 100 random draws (nS=3, nA=2, nZ=2, H=6)") {
    Rng rng(37);
    for (int draw = 0; draw < 100; ++draw) {
        const TabularMdp m = random_mdp(rng, 3, 2, rng.uniform(0.4, 0.9), 6);
        const PolicyTriple t = random_triple(rng, m, 2);
        const auto res = check_lemma2(m, t);
        CHECK(res.holds);
    }
}

TEST_CASE("check_lemma2: the sqrt penalty is monotone in the divergence") {
    Rng rng(41);
    const TabularMdp m = random_mdp(rng, 3, 2, 0.6, 5);
    const PolicyTriple loud = random_triple(rng, m, 2);
    const PolicyTriple quiet = matched_triple(rng, m, 2);
    const double kl_loud = trajectory_kl(m, loud).direct;
    const double kl_quiet = trajectory_kl(m, quiet).direct;
    CHECK(kl_quiet < kl_loud);
    CHECK(std::sqrt(kl_quiet / 2.0) < std::sqrt(kl_loud / 2.0));
}

TEST_CASE("lemma1_f values") {
    CHECK(lemma1_f(0.0, 0.99) == doctest::Approx(99.0).epsilon(1e-12));
    CHECK(lemma1_f(0.0, 0.5) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("check_lemma1 holds on 100 random draws (gamma=0.5, H=25)") {
    Rng rng(43);
    for (int draw = 0; draw < 100; ++draw) {
        const TabularMdp m = random_mdp(rng, 3, 2, 0.5, 25);
        const PolicyTriple t = random_triple(rng, m, 2);
        const auto res = check_lemma1(m, t);
        CHECK(res.holds);
    }
}

TEST_CASE("check_lemma1 is nearly tight for constant rewards with a matched encoder") {
    // constant reward c and encoder == prior: both sides approach c
    TabularMdp m = single_state_mdp(0.5, 0.5, 25);
    const PolicyTriple t = trivial_triple();
    const auto res = check_lemma1(m, t);
    CHECK(res.holds);
    CHECK(res.lhs == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(res.rhs == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("optimal_encoder_tilt: constant Q returns the prior; large lambda returns the prior") {
    const std::vector<double> m{0.4, 0.3, 0.2, 0.1};
    const std::vector<double> q_const{0.7, 0.7, 0.7, 0.7};
    const auto tilted = optimal_encoder_tilt(m, q_const, 1.0);
    CHECK(total_variation(tilted, m) < 1e-14);
    const std::vector<double> q{1.0, -0.5, 0.3, 0.0};
    const auto weak = optimal_encoder_tilt(m, q, 1e6);
    CHECK(total_variation(weak, m) < 1e-5);
    CHECK_THROWS(optimal_encoder_tilt(m, q, 0.0));
}

TEST_CASE("optimal_encoder_tilt outputs a valid simplex vector") {
    Rng rng(47);
    for (int draw = 0; draw < 50; ++draw) {
        std::vector<double> m(4), q(4);
        double sum = 0.0;
        for (double& v : m) {
            v = rng.uniform(0.1, 1.0);
            sum += v;
        }
        for (double& v : m) v /= sum;
        for (double& v : q) v = rng.uniform(-1.0, 1.0);
        const auto phi = optimal_encoder_tilt(m, q, rng.uniform(0.5, 2.0));
        double total = 0.0;
        for (double v : phi) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::fabs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("optimal_encoder_tilt matches projected gradient ascent within 1e-6 total variation") {
    Rng rng(53);
    for (int draw = 0; draw < 50; ++draw) {
        std::vector<double> m(4), q(4);
        double sum = 0.0;
        for (double& v : m) {
            v = rng.uniform(0.1, 1.0);
            sum += v;
        }
        for (double& v : m) v /= sum;
        for (double& v : q) v = rng.uniform(-1.0, 1.0);
        const double lambda = rng.uniform(0.5, 2.0);
        const auto closed = optimal_encoder_tilt(m, q, lambda);
        const auto numeric = simplex_numerical_tilt(m, q, lambda, 10000);
        CHECK(total_variation(closed, numeric) < 1e-6);
    }
}

TEST_CASE("random tables keep every entry at or above the strict positivity floor") {
    Rng rng(59);
    const TabularMdp m = random_mdp(rng, 3, 2, 0.5, 6);
    const PolicyTriple t = random_triple(rng, m, 2);
    for (double v : m.transition) CHECK(v >= 1e-3);
    for (double v : m.initial) CHECK(v >= 1e-3);
    for (double v : t.encoder) CHECK(v >= 1e-3);
    for (double v : t.prior) CHECK(v >= 1e-3);
    for (double v : t.prior1) CHECK(v >= 1e-3);
    for (double v : t.decoder) CHECK(v >= 1e-3);
}
