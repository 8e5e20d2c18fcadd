#include "manip/buffers.hpp"

#include <cmath>

#include "manip/errors.hpp"

namespace manip {

void RolloutBuffer::push(Vector obs, Vector action, double reward, double value, double log_prob,
                         bool done) {
    obs_.push_back(std::move(obs));
    actions_.push_back(std::move(action));
    rewards_.push_back(reward);
    values_.push_back(value);
    log_probs_.push_back(log_prob);
    dones_.push_back(done);
    finalized_ = false;
}

void RolloutBuffer::finalize(double bootstrap_value, double gamma, double lambda) {
    std::vector<double> values = values_;
    values.push_back(bootstrap_value);
    std::vector<bool> dones(dones_.begin(), dones_.end());
    gae_ = compute_gae(rewards_, values, dones, gamma, lambda);
    finalized_ = true;
}

void RolloutBuffer::clear() {
    obs_.clear();
    actions_.clear();
    rewards_.clear();
    values_.clear();
    log_probs_.clear();
    dones_.clear();
    gae_ = {};
    finalized_ = false;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    store_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
    if (store_.size() < capacity_) {
        store_.push_back(std::move(t));
    } else {
        store_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
    total_pushed_ += 1;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
    if (store_.size() < n) throw InsufficientReplay();
    std::uniform_int_distribution<std::size_t> pick(0, store_.size() - 1);
    std::vector<const Transition*> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(&store_[pick(rng)]);
    return out;
}

std::vector<double> normalize_advantages(const std::vector<double>& adv, double std_floor) {
    if (adv.empty()) return {};
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= static_cast<double>(adv.size());
    const double denom = std::max(std::sqrt(var), std_floor);
    std::vector<double> out;
    out.reserve(adv.size());
    for (double a : adv) out.push_back((a - mean) / denom);
    return out;
}

}  // namespace manip
