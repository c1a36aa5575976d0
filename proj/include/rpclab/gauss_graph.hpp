#pragma once

#include "rpclab/distrib.hpp"
#include "rpclab/graph.hpp"

// Graph-node counterparts of the distrib functions, used to assemble the
// differentiable losses. Shapes are [B,K] throughout; log-probs and KLs come
// back as [B,1] per-sample columns.
namespace rpclab::dist::gnodes {

struct GaussNodes {
    int mean = -1;
    int std = -1;
};

// Split a raw [B,2K] head into squashed mean / std.
GaussNodes gauss_head(Graph& g, int raw, int k);

// Prior head: mean = squash(z + raw_mean_delta), std squashed as usual.
GaussNodes prior_head(Graph& g, int raw, int z, int k);

int reparam(Graph& g, const GaussNodes& d, int noise);
int log_prob(Graph& g, const GaussNodes& d, int x);
int log_prob_unit(Graph& g, int x);  // density of N(0,I) at x
int kl_diag(Graph& g, const GaussNodes& p, const GaussNodes& q);
int kl_to_unit(Graph& g, const GaussNodes& p);  // KL(p || N(0,I))

struct TanhSampleNodes {
    int pre_squash = -1;
    int action = -1;
    int log_prob = -1;  // [B,1]
};
TanhSampleNodes tanh_sample(Graph& g, const GaussNodes& d, int noise);

// Deterministic heads used by evaluation/attack graphs.
int tanh_mean_action(Graph& g, const GaussNodes& d);

}  // namespace rpclab::dist::gnodes
