#pragma once

#include <vector>

#include "rpclab/graph.hpp"

namespace rpclab::dist {

using Vec = std::vector<double>;

// Encoder/prior outputs are squashed into these ranges.
inline constexpr double kMeanLow = -30.0;
inline constexpr double kMeanHigh = 30.0;
inline constexpr double kStdLow = 0.1;
inline constexpr double kStdHigh = 10.0;
// Floor inside the tanh change-of-variables log to avoid -inf at saturation.
inline constexpr double kTanhLogEps = 1e-6;

struct DiagGaussian {
    Vec mean;
    Vec std;

    int dim() const { return static_cast<int>(mean.size()); }
    void validate() const;  // std > 0, sizes match
};

struct TanhGaussianAction {
    Vec pre_squash;
    Vec action;      // tanh(pre_squash), elementwise in (-1,1)
    double log_prob; // nats, includes the change-of-variables correction
};

// Bounded odd squash: t<0 -> -low*tanh(t/(-low)), t>=0 -> high*tanh(t/high).
double squash_to_range(double t, double low, double high);

// Smooth map from a raw net output into [kStdLow, kStdHigh].
double squash_std(double raw);

double kl_diag(const DiagGaussian& p, const DiagGaussian& q);
Vec kl_per_coordinate(const DiagGaussian& p, const DiagGaussian& q);
double log_prob(const DiagGaussian& d, const Vec& x);
Vec sample_reparam(const DiagGaussian& d, const Vec& noise);
TanhGaussianAction tanh_policy_log_prob(const DiagGaussian& d, const Vec& pre_squash);

double nats_to_bits(double x);
double bits_to_nats(double x);

DiagGaussian unit_gaussian(int dim);

}  // namespace rpclab::dist
