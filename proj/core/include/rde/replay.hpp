#pragma once

#include <cstddef>
#include <vector>

#include "rde/env.hpp"
#include "rde/rng.hpp"

namespace rde {

struct Transition {
    Observation obs;
    int action = 0;
    double reward = 0.0;
    double cost = 0.0;
    Observation next_obs;
    bool done = false;  // true environment termination only, never truncation
};

// FIFO ring buffer shared by all ensemble agents. Single-owner mutable.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, int obs_width);

    void push(Transition t);

    // Uniform sample with replacement. Pointers stay valid until the next
    // push. Throws on an empty buffer or batch < 1.
    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    int obs_width() const { return obs_width_; }

    // i-th oldest stored transition, i in [0, size).
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    int obs_width_;
    std::vector<Transition> storage_;
    std::size_t write_cursor_ = 0;
    std::size_t size_ = 0;
};

}  // namespace rde
