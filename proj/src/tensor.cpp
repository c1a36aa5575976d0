#include "rpclab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rpclab {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream ss;
    ss << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) ss << ',';
        ss << shape[i];
    }
    ss << ']';
    return ss.str();
}

Tensor::Tensor(std::vector<int> s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(shape));
    }
    if (shape_numel(shape) != static_cast<int64_t>(values.size())) {
        throw std::invalid_argument("Tensor: shape " + shape_str(shape) + " does not match value count " +
                                    std::to_string(values.size()));
    }
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.values.assign(static_cast<size_t>(shape_numel(t.shape)), 0.0);
    return t;
}

// rank-1 tensors are treated as row vectors

Tensor Tensor::full(std::vector<int> shape, double fill) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.values) v = fill;
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t;
    t.shape = {};
    t.values = {v};
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    Tensor t;
    t.shape = {1, static_cast<int>(v.size())};
    t.values = std::move(v);
    return t;
}

int Tensor::rows() const {
    if (shape.size() < 2) return 1;
    return shape[0];
}

int Tensor::cols() const {
    if (shape.empty()) return 1;
    return shape.back();
}

bool Tensor::all_finite() const {
    double acc = 0.0;
    for (double v : values) acc += std::fabs(v);
    return std::isfinite(acc);
}

uint64_t Rng::splitmix() {
    state_ += 0x9E3779B97f4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t Rng::next_u64() { return splitmix(); }

uint64_t Rng::mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9E3779B97f4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::vector<double> Rng::normal_vec(int n) {
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = normal();
    return v;
}

int64_t Rng::uniform_index(int64_t n) {
    return static_cast<int64_t>(uniform() * static_cast<double>(n)) % n;
}

namespace kern {

void matmul(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int64_t i = 0; i < static_cast<int64_t>(n) * m; ++i) c[i] = 0.0;
    matmul_acc(a, b, c, n, k, m);
}

void matmul_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<int64_t>(i) * k;
        double* ci = c + static_cast<int64_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<int64_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_at_acc(const double* a, const double* g, double* c, int n, int k, int m) {
    // C[k,m] += sum_i A[i,k]^T G[i,m]
    for (int i = 0; i < n; ++i) {
        const double* ai = a + static_cast<int64_t>(i) * k;
        const double* gi = g + static_cast<int64_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            double* cp = c + static_cast<int64_t>(p) * m;
            for (int j = 0; j < m; ++j) cp[j] += av * gi[j];
        }
    }
}

void matmul_bt_acc(const double* g, const double* b, double* c, int n, int k, int m) {
    // C[n,k] += G[n,m] B[k,m]^T
    for (int i = 0; i < n; ++i) {
        const double* gi = g + static_cast<int64_t>(i) * m;
        double* ci = c + static_cast<int64_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* bp = b + static_cast<int64_t>(p) * m;
            double acc = 0.0;
            for (int j = 0; j < m; ++j) acc += gi[j] * bp[j];
            ci[p] += acc;
        }
    }
}

}  // namespace kern

}  // namespace rpclab
