#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rpclab/distrib.hpp"
#include "rpclab/gauss_graph.hpp"

using namespace rpclab;
using namespace rpclab::dist;

namespace {

DiagGaussian random_gauss(Rng& rng, int dim) {
    DiagGaussian d;
    d.mean.resize(dim);
    d.std.resize(dim);
    for (int i = 0; i < dim; ++i) {
        d.mean[i] = rng.uniform(-3.0, 3.0);
        d.std[i] = rng.uniform(0.3, 2.5);
    }
    return d;
}

struct MeanSe {
    double mean;
    double se;
};

MeanSe mc_mean(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= xs.size();
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    var /= (xs.size() - 1);
    return {m, std::sqrt(var / xs.size())};
}

}  // namespace

TEST_CASE("squash_to_range: zero maps to zero, saturates at the bounds") {
    CHECK(squash_to_range(0.0, -30.0, 30.0) == 0.0);
    CHECK(squash_to_range(1e9, -30.0, 30.0) == doctest::Approx(30.0));
    CHECK(squash_to_range(-1e9, -30.0, 30.0) == doctest::Approx(-30.0));
    CHECK(squash_to_range(30.0, -30.0, 30.0) == doctest::Approx(30.0 * std::tanh(1.0)));
    CHECK(squash_to_range(30.0, -30.0, 30.0) == doctest::Approx(22.847824678672945).epsilon(1e-12));
}

TEST_CASE("squash_to_range: continuous at zero, strictly increasing, slope one at zero") {
    const double low = -30.0, high = 30.0;
    const double h = 1e-6;
    CHECK(std::fabs(squash_to_range(h, low, high) - squash_to_range(-h, low, high) - 2 * h) < 1e-12);
    const double slope = (squash_to_range(h, low, high) - squash_to_range(-h, low, high)) / (2 * h);
    CHECK(slope == doctest::Approx(1.0).epsilon(1e-6));
    Rng rng(3);
    double prev = squash_to_range(-40.0, low, high);
    for (double t = -39.5; t < 40.0; t += 0.5) {
        const double cur = squash_to_range(t, low, high);
        CHECK(cur > prev);
        prev = cur;
    }
    // asymmetric bounds keep the same structure
    CHECK(squash_to_range(-1e9, -5.0, 30.0) == doctest::Approx(-5.0));
}

TEST_CASE("kl_diag: identical distributions have zero divergence") {
    Rng rng(7);
    auto p = random_gauss(rng, 6);
    CHECK(kl_diag(p, p) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("kl_diag: unit-variance mean shift of 1 gives 0.5 nats") {
    DiagGaussian p{{0.0}, {1.0}};
    DiagGaussian q{{1.0}, {1.0}};
    CHECK(kl_diag(p, q) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("kl_diag: sigma 2 against sigma 1 gives -ln2 + 1.5") {
    DiagGaussian p{{0.0}, {2.0}};
    DiagGaussian q{{0.0}, {1.0}};
    CHECK(kl_diag(p, q) == doctest::Approx(-std::log(2.0) + 2.0 - 0.5).epsilon(1e-14));
}

TEST_CASE("kl_diag: nonnegative on random pairs, zero only on the diagonal") {
    Rng rng(11);
    for (int it = 0; it < 200; ++it) {
        auto p = random_gauss(rng, 4);
        auto q = random_gauss(rng, 4);
        CHECK(kl_diag(p, q) >= 0.0);
        CHECK(kl_diag(p, q) > 1e-6);  // random pairs essentially never coincide
    }
}

TEST_CASE("kl_diag matches the Monte-Carlo log-ratio within 3 standard errors") {
    Rng rng(17);
    for (int rep = 0; rep < 3; ++rep) {
        auto p = random_gauss(rng, 3);
        auto q = random_gauss(rng, 3);
        const double analytic = kl_diag(p, q);
        const int n = 100000;
        std::vector<double> ratios(n);
        for (int i = 0; i < n; ++i) {
            auto x = sample_reparam(p, rng.normal_vec(3));
            ratios[i] = log_prob(p, x) - log_prob(q, x);
        }
        auto [m, se] = mc_mean(ratios);
        CHECK(std::fabs(m - analytic) < 3.0 * se);
    }
}

TEST_CASE("kl_per_coordinate: zeros on equal inputs, one nonzero coordinate when one differs") {
    DiagGaussian p{{0.3, -0.4}, {1.0, 0.7}};
    auto same = kl_per_coordinate(p, p);
    CHECK(same[0] == 0.0);
    CHECK(same[1] == 0.0);
    DiagGaussian q = p;
    q.mean[1] += 2.0;
    auto one = kl_per_coordinate(p, q);
    CHECK(one[0] == 0.0);
    CHECK(one[1] > 0.0);
}

TEST_CASE("kl_per_coordinate sums to kl_diag within 1e-12") {
    Rng rng(23);
    for (int it = 0; it < 50; ++it) {
        auto p = random_gauss(rng, 5);
        auto q = random_gauss(rng, 5);
        double sum = 0.0;
        for (double v : kl_per_coordinate(p, q)) sum += v;
        CHECK(std::fabs(sum - kl_diag(p, q)) < 1e-12);
    }
}

TEST_CASE("log_prob: standard gaussian at zero") {
    DiagGaussian d{{0.0}, {1.0}};
    CHECK(log_prob(d, {0.0}) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
    DiagGaussian d4 = unit_gaussian(4);
    CHECK(log_prob(d4, {0, 0, 0, 0}) == doctest::Approx(-4 * 0.9189385332046727).epsilon(1e-14));
}

TEST_CASE("log_prob mean under its own samples equals negative entropy (MC)") {
    Rng rng(29);
    auto p = random_gauss(rng, 2);
    double entropy = 0.0;
    for (double s : p.std) entropy += 0.5 * std::log(2.0 * M_PI * M_E * s * s);
    const int n = 100000;
    std::vector<double> lps(n);
    for (int i = 0; i < n; ++i) lps[i] = log_prob(p, sample_reparam(p, rng.normal_vec(2)));
    auto [m, se] = mc_mean(lps);
    CHECK(std::fabs(m - (-entropy)) < 3.0 * se);
}

TEST_CASE("sample_reparam: zero noise returns the mean; clamped std shifts by 0.1") {
    DiagGaussian d{{1.5, -2.0}, {0.1, 0.7}};
    auto at_mean = sample_reparam(d, {0.0, 0.0});
    CHECK(at_mean == d.mean);
    auto shifted = sample_reparam(d, {1.0, 0.0});
    CHECK(shifted[0] == doctest::Approx(1.6));
}

TEST_CASE("sample_reparam: sample mean near mu (MC)") {
    Rng rng(31);
    DiagGaussian d{{0.7}, {1.3}};
    const int n = 100000;
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = sample_reparam(d, {rng.normal()})[0];
    auto [m, se] = mc_mean(xs);
    CHECK(std::fabs(m - 0.7) < 3.0 * 1.3 / std::sqrt(static_cast<double>(n)));
    (void)se;
}

TEST_CASE("tanh_policy_log_prob: at zero the correction is about zero") {
    DiagGaussian d{{0.0}, {1.0}};
    auto res = tanh_policy_log_prob(d, {0.0});
    CHECK(res.action[0] == 0.0);
    CHECK(res.log_prob == doctest::Approx(-0.9189385332046727 - std::log(1.0 + 1e-6)).epsilon(1e-12));
}

TEST_CASE("tanh_policy_log_prob: actions stay inside the action box") {
    Rng rng(37);
    DiagGaussian d{{2.0, -3.0}, {5.0, 9.0}};
    bool all_in_box = true, all_finite = true;
    for (int i = 0; i < 500; ++i) {
        auto pre = sample_reparam(d, rng.normal_vec(2));
        auto res = tanh_policy_log_prob(d, pre);
        for (double a : res.action) all_in_box = all_in_box && a >= -1.0 && a <= 1.0;
        all_finite = all_finite && std::isfinite(res.log_prob);
    }
    // tanh rounds to exactly +-1 for |pre| beyond ~19; the 1e-6 floor keeps
    // the log-prob finite even there
    CHECK(all_in_box);
    CHECK(all_finite);
    auto interior = tanh_policy_log_prob(d, {4.0, -6.0});
    CHECK(interior.action[0] > -1.0);
    CHECK(interior.action[0] < 1.0);
    CHECK(interior.action[1] > -1.0);
    CHECK(interior.action[1] < 1.0);
}

TEST_CASE("tanh policy density integrates to about one (1-D quadrature)") {
    DiagGaussian d{{0.3}, {0.8}};
    // integrate the squashed density over u (pre-squash) using the implemented
    // log-prob evaluated at u, with da = (1 - tanh(u)^2) du
    const int n = 200001;
    const double lo = -12.0, hi = 12.0;
    const double h = (hi - lo) / (n - 1);
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = lo + h * i;
        auto res = tanh_policy_log_prob(d, {u});
        const double a = std::tanh(u);
        const double fa = std::exp(res.log_prob);
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
        integral += w * fa * (1.0 - a * a) * h;
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("nats_to_bits") {
    CHECK(nats_to_bits(0.0) == 0.0);
    CHECK(nats_to_bits(std::log(2.0)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(nats_to_bits(1.0) == doctest::Approx(1.4426950408889634).epsilon(1e-12));
    CHECK(bits_to_nats(nats_to_bits(0.37)) == doctest::Approx(0.37).epsilon(1e-14));
}

TEST_CASE("graph-node gaussian helpers match the pure functions") {
    Rng rng(41);
    const int k = 4, batch = 3;
    Graph g;
    const int raw = g.input("raw", {batch, 2 * k});
    const int raw_q = g.input("raw_q", {batch, 2 * k});
    const int noise = g.input("noise", {batch, k});
    auto p = gnodes::gauss_head(g, raw, k);
    auto q = gnodes::gauss_head(g, raw_q, k);
    const int z = gnodes::reparam(g, p, noise);
    const int lp = gnodes::log_prob(g, p, z);
    const int kl = gnodes::kl_diag(g, p, q);
    const int klu = gnodes::kl_to_unit(g, p);
    auto tanh_nodes = gnodes::tanh_sample(g, p, noise);
    g.mark_output("z", z);
    g.mark_output("lp", lp);
    g.mark_output("kl", kl);
    g.mark_output("klu", klu);
    g.mark_output("tanh_lp", tanh_nodes.log_prob);
    g.mark_output("action", tanh_nodes.action);
    g.mark_output("p_mean", p.mean);
    g.mark_output("p_std", p.std);

    TensorMap in;
    in["raw"] = Tensor::zeros({batch, 2 * k});
    in["raw_q"] = Tensor::zeros({batch, 2 * k});
    in["noise"] = Tensor::zeros({batch, k});
    for (auto* t : {&in["raw"], &in["raw_q"]}) {
        for (double& v : t->values) v = rng.uniform(-4.0, 4.0);
    }
    for (double& v : in["noise"].values) v = rng.normal();
    g.forward(in);

    for (int b = 0; b < batch; ++b) {
        DiagGaussian dp, dq;
        for (int i = 0; i < k; ++i) {
            dp.mean.push_back(squash_to_range(in["raw"].at(b, i), kMeanLow, kMeanHigh));
            dp.std.push_back(squash_std(in["raw"].at(b, k + i)));
            dq.mean.push_back(squash_to_range(in["raw_q"].at(b, i), kMeanLow, kMeanHigh));
            dq.std.push_back(squash_std(in["raw_q"].at(b, k + i)));
        }
        CHECK(g.output("p_mean").at(b, 0) == doctest::Approx(dp.mean[0]).epsilon(1e-14));
        CHECK(g.output("p_std").at(b, 1) == doctest::Approx(dp.std[1]).epsilon(1e-14));
        Vec nz(k);
        for (int i = 0; i < k; ++i) nz[i] = in["noise"].at(b, i);
        const Vec zv = sample_reparam(dp, nz);
        for (int i = 0; i < k; ++i) CHECK(g.output("z").at(b, i) == doctest::Approx(zv[i]).epsilon(1e-14));
        CHECK(g.output("lp").at(b, 0) == doctest::Approx(log_prob(dp, zv)).epsilon(1e-12));
        CHECK(g.output("kl").at(b, 0) == doctest::Approx(kl_diag(dp, dq)).epsilon(1e-12));
        CHECK(g.output("klu").at(b, 0) == doctest::Approx(kl_diag(dp, unit_gaussian(k))).epsilon(1e-12));
        auto tanh_res = tanh_policy_log_prob(dp, zv);
        CHECK(g.output("tanh_lp").at(b, 0) == doctest::Approx(tanh_res.log_prob).epsilon(1e-12));
        CHECK(g.output("action").at(b, 2) == doctest::Approx(tanh_res.action[2]).epsilon(1e-14));
    }
}

TEST_CASE("graph-node gaussian helpers are differentiable (finite differences)") {
    const int k = 3, batch = 2;
    Graph g;
    const int raw_w = g.param("raw", {batch, 2 * k});
    const int raw_q = g.param("raw_q", {batch, 2 * k});
    const int noise = g.input("noise", {batch, k});
    auto p = gnodes::gauss_head(g, raw_w, k);
    auto q = gnodes::gauss_head(g, raw_q, k);
    auto tanh_nodes = gnodes::tanh_sample(g, p, noise);
    const int loss =
        g.mean_all(g.add(g.add(gnodes::kl_diag(g, p, q), tanh_nodes.log_prob), gnodes::kl_to_unit(g, p)));
    g.mark_output("loss", loss);
    Rng rng(43);
    ParamStore params;
    params["raw"] = Tensor::zeros({batch, 2 * k});
    params["raw_q"] = Tensor::zeros({batch, 2 * k});
    for (auto* t : {&params.at("raw"), &params.at("raw_q")}) {
        for (double& v : t->values) v = rng.uniform(-2.0, 2.0);
    }
    TensorMap in{{"noise", Tensor::zeros({batch, k})}};
    for (double& v : in["noise"].values) v = rng.normal();
    auto report = grad_check(g, in, params, "loss", 1e-6);
    CHECK(report.pass);
}
