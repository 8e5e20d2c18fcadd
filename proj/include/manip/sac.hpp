#pragma once

#include <cstdint>
#include <random>

#include "manip/adam.hpp"
#include "manip/buffers.hpp"

namespace manip {

struct SacConfig {
    double gamma = 0.99;
    double tau = 0.005;  // target smoothing
    int batch = 256;
    int capacity = 100000;
    double init_temperature = 0.2;
    bool auto_tune_temperature = true;  // toward target entropy -action_dim
    int warmup_steps = 1000;            // env steps before updates start
    int update_every = 1;               // env steps per update call
    AdamConfig adam;                    // lr 3e-4 for all nets and the temperature
    std::vector<int> hidden = {64, 64};
};

struct SacStats {
    double critic_loss = 0.0;
    double policy_loss = 0.0;
    double temperature = 0.0;
    double entropy_estimate = 0.0;  // -mean log_pi of the resampled actions
};

// Reparameterized policy objective mean(alpha * log_pi - min(Q1, Q2)) with
// a~ = tanh(mu + sigma * z). noise[i] supplies z for sample i, so the
// objective is a deterministic function of the parameters; gradients for the
// policy head land in *grads when non-null. Returns the objective; mean
// log_pi lands in *mean_log_pi when non-null.
double sac_policy_objective(const MlpParams& policy, const MlpParams& q1, const MlpParams& q2,
                            double alpha, const std::vector<Vector>& obs,
                            const std::vector<Vector>& noise, MlpGrads* grads,
                            double* mean_log_pi);

// Twin-critic soft actor-critic with a state-dependent log_std head: the
// policy net maps obs to [mean, log_std] (2x action_dim outputs).
class SacTrainer {
public:
    static constexpr double kSquashEps = 1e-6;

    SacTrainer(int obs_dim, int action_dim, SacConfig cfg, std::uint64_t seed);

    // tanh-squashed sample in (-1, 1)^d and its log density.
    Vector sample_squashed(const Vector& obs, double* log_prob, std::mt19937_64& rng) const;
    Vector mean_squashed(const Vector& obs) const;

    // y = r + gamma * (1 - done) * (min target Q at a resampled next action
    //                               - temperature * log_pi)
    std::vector<double> compute_targets(const std::vector<const Transition*>& batch,
                                        std::mt19937_64& rng) const;

    // One gradient step on critics, policy, and temperature, then a soft
    // target update. Throws InsufficientReplay when the buffer is too small.
    SacStats update(const ReplayBuffer& replay);

    void soft_update_targets();

    double temperature() const;
    double target_entropy() const { return target_entropy_; }
    // which: 1 or 2; target selects the slow-moving copy
    double q_value(int which, bool target, const Vector& obs, const Vector& squashed_action) const;

    const MlpParams& policy_net() const { return policy_; }
    MlpParams& policy_net() { return policy_; }
    const MlpParams& critic(int which) const { return which == 1 ? q1_ : q2_; }
    const MlpParams& critic_target(int which) const { return which == 1 ? q1_t_ : q2_t_; }
    int obs_dim() const { return obs_dim_; }
    int action_dim() const { return action_dim_; }
    const SacConfig& config() const { return cfg_; }
    std::mt19937_64& rng() { return rng_; }

private:
    void split_head(const Vector& out, Vector* mu, Vector* log_std_raw,
                    Vector* log_std_clamped) const;

    int obs_dim_;
    int action_dim_;
    SacConfig cfg_;
    MlpParams policy_, q1_, q2_, q1_t_, q2_t_;
    AdamState policy_adam_, q1_adam_, q2_adam_;
    double log_alpha_;
    AdamVecState alpha_adam_;
    double target_entropy_;
    std::mt19937_64 rng_;
};

inline SacStats sac_update(SacTrainer& trainer, const ReplayBuffer& replay) {
    return trainer.update(replay);
}

}  // namespace manip
