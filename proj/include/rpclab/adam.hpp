#pragma once

#include <cstdint>
#include <vector>

#include "rpclab/tensor.hpp"

namespace rpclab {

struct AdamState {
    int64_t step = 0;
    std::vector<double> m;  // first moment
    std::vector<double> v;  // second moment
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_size(int64_t n, double lr);
};

// Standard Adam with bias correction; updates params in place.
// Throws on non-finite gradients.
void adam_step(AdamState& state, Tensor& params, const Tensor& grads);

}  // namespace rpclab
