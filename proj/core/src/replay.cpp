#include "rde/replay.hpp"

#include <stdexcept>

namespace rde {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_width)
    : capacity_(capacity), obs_width_(obs_width) {
    if (capacity_ < 1) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
    if (obs_width_ < 1) throw std::invalid_argument("ReplayBuffer: obs_width must be >= 1");
}

void ReplayBuffer::push(Transition t) {
    if (static_cast<int>(t.obs.size()) != obs_width_ ||
        static_cast<int>(t.next_obs.size()) != obs_width_)
        throw std::invalid_argument("ReplayBuffer::push: observation width mismatch");
    if (storage_.size() < capacity_) {
        storage_.push_back(std::move(t));
        size_ = storage_.size();
        write_cursor_ = size_ % capacity_;
        return;
    }
    storage_[write_cursor_] = std::move(t);
    write_cursor_ = (write_cursor_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
    if (size_ == 0) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
    if (batch < 1) throw std::invalid_argument("ReplayBuffer::sample: batch must be >= 1");
    std::vector<const Transition*> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i)
        out.push_back(&storage_[rng.uniform_int(static_cast<std::uint32_t>(size_))]);
    return out;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("ReplayBuffer::at: index past size");
    if (size_ < capacity_) return storage_[i];
    return storage_[(write_cursor_ + i) % capacity_];
}

}  // namespace rde
