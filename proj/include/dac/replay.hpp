#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dac/rng.hpp"

namespace dac {

/// One environment interaction. `done` is true only on reaching the optimum;
/// episodes cut off by the evaluation budget set `truncated` instead.
struct Transition {
    double state = 0.0;      // normalized fitness f/n
    int action = 0;          // portfolio index
    double reward = 0.0;
    double next_state = 0.0;
    bool done = false;
    bool truncated = false;
};

/// Fixed-capacity ring buffer with uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
        store_.reserve(std::min<std::size_t>(capacity, 1 << 20));
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return store_.size(); }

    void push(const Transition& t) {
        if (store_.size() < capacity_) {
            store_.push_back(t);
        } else {
            store_[cursor_] = t;
        }
        cursor_ = (cursor_ + 1) % capacity_;
    }

    const Transition& at(std::size_t i) const { return store_[i]; }
    Transition& at(std::size_t i) { return store_[i]; }

    const Transition& sample(Rng& rng) const {
        if (store_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
        return store_[rng.uniform_below(store_.size())];
    }

    void sample_batch(std::size_t batch_size, Rng& rng, std::vector<Transition>& out) const {
        if (store_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
        out.resize(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) out[i] = store_[rng.uniform_below(store_.size())];
    }

private:
    std::size_t capacity_;
    std::size_t cursor_ = 0;
    std::vector<Transition> store_;
};

} // namespace dac
