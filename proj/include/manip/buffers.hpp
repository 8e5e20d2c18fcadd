#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "manip/gae.hpp"
#include "manip/mlp.hpp"

namespace manip {

// On-policy rollout storage. finalize() runs the advantage computation; the
// buffer must be finalized before an update consumes it.
class RolloutBuffer {
public:
    void push(Vector obs, Vector action, double reward, double value, double log_prob, bool done);
    void finalize(double bootstrap_value, double gamma, double lambda);
    void clear();

    std::size_t size() const { return rewards_.size(); }
    bool empty() const { return rewards_.empty(); }
    bool finalized() const { return finalized_; }

    const Vector& obs(std::size_t i) const { return obs_[i]; }
    const Vector& action(std::size_t i) const { return actions_[i]; }
    double reward(std::size_t i) const { return rewards_[i]; }
    double value(std::size_t i) const { return values_[i]; }
    double log_prob(std::size_t i) const { return log_probs_[i]; }
    bool done(std::size_t i) const { return dones_[i]; }
    double advantage(std::size_t i) const { return gae_.advantages[i]; }
    double ret(std::size_t i) const { return gae_.returns[i]; }

private:
    std::vector<Vector> obs_;
    std::vector<Vector> actions_;
    std::vector<double> rewards_;
    std::vector<double> values_;
    std::vector<double> log_probs_;
    std::vector<bool> dones_;
    GaeResult gae_;
    bool finalized_ = false;
};

struct Transition {
    Vector obs;
    Vector action;
    Vector next_obs;
    double reward = 0.0;
    bool done = false;
};

// Fixed-capacity ring; pushes past capacity overwrite the oldest entries.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const { return store_.size(); }
    std::size_t capacity() const { return capacity_; }
    std::size_t total_pushed() const { return total_pushed_; }

    // Uniform with replacement. Throws InsufficientReplay if size < n.
    std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::size_t total_pushed_ = 0;
    std::vector<Transition> store_;
};

// (a - mean) / max(std, floor); an all-equal vector maps to all zeros.
std::vector<double> normalize_advantages(const std::vector<double>& adv, double std_floor = 1e-8);

}  // namespace manip
