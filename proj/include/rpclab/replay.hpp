#pragma once

#include <cstdint>
#include <vector>

#include "rpclab/tensor.hpp"

namespace rpclab::agent {

struct Transition {
    std::vector<double> obs;
    std::vector<double> action;
    double reward = 0.0;
    std::vector<double> next_obs;
    bool is_first = false;     // obs begins an episode
    bool is_terminal = false;  // crash; no bootstrap
    bool is_truncated = false;
};

// Fixed-capacity ring with FIFO eviction and seeded uniform sampling
// (with replacement).
class ReplayBuffer {
public:
    ReplayBuffer(int64_t capacity, uint64_t seed);

    void push(Transition t);
    const Transition& sample();
    std::vector<const Transition*> sample_batch(int n);

    int64_t size() const { return static_cast<int64_t>(ring_.size()); }
    int64_t capacity() const { return capacity_; }
    const Transition& at(int64_t i) const { return ring_[static_cast<size_t>(i)]; }

private:
    int64_t capacity_;
    std::vector<Transition> ring_;
    int64_t cursor_ = 0;
    Rng rng_;
};

}  // namespace rpclab::agent
