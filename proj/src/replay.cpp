#include "rpclab/replay.hpp"

#include <stdexcept>

namespace rpclab::agent {

ReplayBuffer::ReplayBuffer(int64_t capacity, uint64_t seed)
    : capacity_(capacity), rng_(Rng::mix(seed, 0x7265706c6179ULL)) {
    if (capacity < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    ring_.reserve(static_cast<size_t>(capacity));
}

void ReplayBuffer::push(Transition t) {
    if (size() < capacity_) {
        ring_.push_back(std::move(t));
    } else {
        ring_[static_cast<size_t>(cursor_)] = std::move(t);
    }
    cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::sample() {
    if (ring_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
    return ring_[static_cast<size_t>(rng_.uniform_index(size()))];
}

std::vector<const Transition*> ReplayBuffer::sample_batch(int n) {
    std::vector<const Transition*> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(&sample());
    return out;
}

}  // namespace rpclab::agent
