#include "rpclab/distrib.hpp"

#include <cmath>
#include <stdexcept>

namespace rpclab::dist {

namespace {
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*log(2*pi)

void check_dims(const DiagGaussian& a, int n, const char* what) {
    if (a.dim() != n) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}
}  // namespace

void DiagGaussian::validate() const {
    if (mean.size() != std.size()) throw std::invalid_argument("DiagGaussian: mean/std size mismatch");
    for (double s : std) {
        if (!(s > 0.0)) throw std::invalid_argument("DiagGaussian: std must be strictly positive");
    }
}

double squash_to_range(double t, double low, double high) {
    return t < 0.0 ? -low * std::tanh(t / (-low)) : high * std::tanh(t / high);
}

double squash_std(double raw) {
    const double sig = 1.0 / (1.0 + std::exp(-raw));
    return kStdLow + (kStdHigh - kStdLow) * sig;
}

double kl_diag(const DiagGaussian& p, const DiagGaussian& q) {
    double total = 0.0;
    for (double v : kl_per_coordinate(p, q)) total += v;
    return total;
}

Vec kl_per_coordinate(const DiagGaussian& p, const DiagGaussian& q) {
    check_dims(q, p.dim(), "kl_per_coordinate");
    Vec out(p.mean.size());
    for (size_t i = 0; i < p.mean.size(); ++i) {
        const double sp = p.std[i], sq = q.std[i];
        const double dm = p.mean[i] - q.mean[i];
        out[i] = std::log(sq / sp) + (sp * sp + dm * dm) / (2.0 * sq * sq) - 0.5;
    }
    return out;
}

double log_prob(const DiagGaussian& d, const Vec& x) {
    if (x.size() != d.mean.size()) throw std::invalid_argument("log_prob: dimension mismatch");
    double total = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double z = (x[i] - d.mean[i]) / d.std[i];
        total += -kHalfLog2Pi - std::log(d.std[i]) - 0.5 * z * z;
    }
    return total;
}

Vec sample_reparam(const DiagGaussian& d, const Vec& noise) {
    if (noise.size() != d.mean.size()) throw std::invalid_argument("sample_reparam: dimension mismatch");
    Vec out(d.mean.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = d.mean[i] + d.std[i] * noise[i];
    return out;
}

TanhGaussianAction tanh_policy_log_prob(const DiagGaussian& d, const Vec& pre_squash) {
    if (pre_squash.size() != d.mean.size()) throw std::invalid_argument("tanh_policy_log_prob: dimension mismatch");
    TanhGaussianAction out;
    out.pre_squash = pre_squash;
    out.action.resize(pre_squash.size());
    double lp = log_prob(d, pre_squash);
    for (size_t i = 0; i < pre_squash.size(); ++i) {
        const double a = std::tanh(pre_squash[i]);
        out.action[i] = a;
        lp -= std::log((1.0 + kTanhLogEps) - a * a);
    }
    out.log_prob = lp;
    return out;
}

double nats_to_bits(double x) { return x / M_LN2; }
double bits_to_nats(double x) { return x * M_LN2; }

DiagGaussian unit_gaussian(int dim) {
    if (dim < 1) throw std::invalid_argument("unit_gaussian: dim must be >= 1");
    DiagGaussian d;
    d.mean.assign(static_cast<size_t>(dim), 0.0);
    d.std.assign(static_cast<size_t>(dim), 1.0);
    return d;
}

}  // namespace rpclab::dist
