#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rpclab {

// Row-major 64-bit tensor. Rank 0 (scalar), 1 (vector) and 2 (matrix) are
// what the rest of the code actually uses.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> values;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> v);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double fill);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> v);  // shape [1, n]

    int64_t size() const { return static_cast<int64_t>(values.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int rows() const;
    int cols() const;

    double& at(int r, int c) { return values[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return values[static_cast<size_t>(r) * cols() + c]; }

    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Deterministic RNG used everywhere in the lab. mt19937_64 with hand-rolled
// uniform/normal so results do not depend on libstdc++ distribution details.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64();
    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);
    double normal();                        // standard normal, Box-Muller
    std::vector<double> normal_vec(int n);
    // uniform integer in [0, n)
    int64_t uniform_index(int64_t n);

    static uint64_t mix(uint64_t a, uint64_t b);  // splitmix-style stream derivation

private:
    uint64_t splitmix();
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Dense kernels shared by the graph executor and the plain (no-tape) forward
// paths, so that both compute bit-identical results.
namespace kern {

// C[n,m] = A[n,k] * B[k,m]
void matmul(const double* a, const double* b, double* c, int n, int k, int m);
// C[n,m] += A[n,k] * B[k,m]
void matmul_acc(const double* a, const double* b, double* c, int n, int k, int m);
// C[k,m] += A[n,k]^T * G[n,m]
void matmul_at_acc(const double* a, const double* g, double* c, int n, int k, int m);
// C[n,k] += G[n,m] * B[k,m]^T
void matmul_bt_acc(const double* g, const double* b, double* c, int n, int k, int m);

}  // namespace kern

}  // namespace rpclab
