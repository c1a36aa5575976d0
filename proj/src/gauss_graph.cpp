#include "rpclab/gauss_graph.hpp"

#include <cmath>

namespace rpclab::dist::gnodes {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;

int std_from_raw(Graph& g, int raw) {
    return g.add_const(g.scale(g.sigmoid(raw), kStdHigh - kStdLow), kStdLow);
}
}  // namespace

GaussNodes gauss_head(Graph& g, int raw, int k) {
    GaussNodes d;
    d.mean = g.squash_range(g.slice_cols(raw, 0, k), kMeanLow, kMeanHigh);
    d.std = std_from_raw(g, g.slice_cols(raw, k, k));
    return d;
}

GaussNodes prior_head(Graph& g, int raw, int z, int k) {
    GaussNodes d;
    d.mean = g.squash_range(g.add(z, g.slice_cols(raw, 0, k)), kMeanLow, kMeanHigh);
    d.std = std_from_raw(g, g.slice_cols(raw, k, k));
    return d;
}

int reparam(Graph& g, const GaussNodes& d, int noise) {
    return g.add(d.mean, g.mul(d.std, noise));
}

int log_prob(Graph& g, const GaussNodes& d, int x) {
    const int k = g.node_shape(x)[1];
    const int diff = g.sub(x, d.mean);
    const int quad = g.scale(g.divide(g.square(diff), g.square(d.std)), 0.5);
    const int elem = g.sub(g.neg(quad), g.log_(d.std));
    return g.add_const(g.row_sum(elem), -kHalfLog2Pi * k);
}

int log_prob_unit(Graph& g, int x) {
    const int k = g.node_shape(x)[1];
    return g.add_const(g.neg(g.scale(g.row_sum(g.square(x)), 0.5)), -kHalfLog2Pi * k);
}

int kl_diag(Graph& g, const GaussNodes& p, const GaussNodes& q) {
    // per coordinate: log(sq/sp) + (sp^2 + (mp-mq)^2) / (2 sq^2) - 1/2
    const int dm = g.sub(p.mean, q.mean);
    const int num = g.add(g.square(p.std), g.square(dm));
    const int quad = g.scale(g.divide(num, g.square(q.std)), 0.5);
    const int logs = g.sub(g.log_(q.std), g.log_(p.std));
    const int elem = g.add_const(g.add(logs, quad), -0.5);
    return g.row_sum(elem);
}

int kl_to_unit(Graph& g, const GaussNodes& p) {
    // KL(N(m,s) || N(0,1)) = sum -log s + (s^2 + m^2)/2 - 1/2
    const int num = g.add(g.square(p.std), g.square(p.mean));
    const int elem = g.add_const(g.sub(g.scale(num, 0.5), g.log_(p.std)), -0.5);
    return g.row_sum(elem);
}

TanhSampleNodes tanh_sample(Graph& g, const GaussNodes& d, int noise) {
    TanhSampleNodes out;
    out.pre_squash = reparam(g, d, noise);
    const int th = g.tanh_(out.pre_squash);
    out.action = th;
    const int gauss_lp = log_prob(g, d, out.pre_squash);
    const int correction = g.row_sum(g.log_(g.add_const(g.neg(g.square(th)), 1.0 + kTanhLogEps)));
    out.log_prob = g.sub(gauss_lp, correction);
    return out;
}

int tanh_mean_action(Graph& g, const GaussNodes& d) { return g.tanh_(d.mean); }

}  // namespace rpclab::dist::gnodes
