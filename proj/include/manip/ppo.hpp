#pragma once

#include <cstdint>
#include <random>

#include "manip/adam.hpp"
#include "manip/buffers.hpp"
#include "manip/policy.hpp"

namespace manip {

struct PpoConfig {
    double clip_eps = 0.2;
    double gamma = 0.99;
    double lambda = 0.95;
    int epochs = 10;
    int minibatch = 64;
    int horizon = 2048;  // transitions collected per update
    double value_coeff = 0.5;
    double entropy_coeff = 0.01;
    double max_grad_norm = 0.5;
    AdamConfig adam;  // lr 3e-4
    std::vector<int> hidden = {64, 64};
    double initial_log_std = -2.0;
    bool log_minibatches = false;
};

struct PpoSampleLog {
    double ratio;
    double advantage;  // normalized
    double surrogate;
    bool clipped;  // gradient suppressed by the clip
};

struct UpdateStats {
    double policy_loss = 0.0;  // -mean(surrogate)
    double value_loss = 0.0;   // mean squared value error, unscaled
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    std::vector<PpoSampleLog> samples;  // populated when cfg.log_minibatches
};

class PpoTrainer {
public:
    PpoTrainer(int obs_dim, int action_dim, PpoConfig cfg, std::uint64_t seed);

    // Clipped-surrogate update over the finalized buffer.
    // Throws EmptyBuffer on an empty buffer and NonFiniteLoss if any
    // minibatch objective degenerates.
    UpdateStats update(const RolloutBuffer& buffer);

    const GaussianPolicyParams& policy() const { return policy_; }
    GaussianPolicyParams& policy() { return policy_; }
    const MlpParams& value_net() const { return value_; }
    double value(const Vector& obs) const;
    const PpoConfig& config() const { return cfg_; }
    std::mt19937_64& rng() { return rng_; }

private:
    PpoConfig cfg_;
    GaussianPolicyParams policy_;
    MlpParams value_;
    AdamState policy_adam_;
    AdamVecState log_std_adam_;
    AdamState value_adam_;
    std::mt19937_64 rng_;
};

inline UpdateStats ppo_update(PpoTrainer& trainer, const RolloutBuffer& buffer) {
    return trainer.update(buffer);
}

}  // namespace manip
