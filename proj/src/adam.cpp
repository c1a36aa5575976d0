#include "rpclab/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace rpclab {

AdamState AdamState::for_size(int64_t n, double lr_) {
    AdamState s;
    s.m.assign(static_cast<size_t>(n), 0.0);
    s.v.assign(static_cast<size_t>(n), 0.0);
    s.lr = lr_;
    return s;
}

void adam_step(AdamState& state, Tensor& params, const Tensor& grads) {
    if (params.shape != grads.shape) {
        throw std::invalid_argument("adam_step: param shape " + shape_str(params.shape) + " vs grad shape " +
                                    shape_str(grads.shape));
    }
    if (state.m.size() != params.values.size()) {
        throw std::invalid_argument("adam_step: state sized for " + std::to_string(state.m.size()) +
                                    " values, params have " + std::to_string(params.values.size()));
    }
    if (!grads.all_finite()) throw std::runtime_error("adam_step: non-finite gradient");

    state.step += 1;
    const double b1 = state.beta1, b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.values.size(); ++i) {
        const double g = grads.values[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params.values[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
}

}  // namespace rpclab
