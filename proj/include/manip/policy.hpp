#pragma once

#include <random>

#include "manip/mlp.hpp"

namespace manip {

// Diagonal Gaussian policy with a state-independent log standard deviation.
// Squashing, where an algorithm wants it, happens downstream.
struct GaussianPolicyParams {
    static constexpr double kLogStdMin = -5.0;
    static constexpr double kLogStdMax = 2.0;

    MlpParams mean;  // obs_dim -> action_dim
    Vector log_std;  // one entry per action dimension, free parameter

    static GaussianPolicyParams init(int obs_dim, int action_dim,
                                     const std::vector<int>& hidden, std::uint64_t seed,
                                     double initial_log_std = -0.5);

    int obs_dim() const { return mean.input_dim(); }
    int action_dim() const { return mean.output_dim(); }
    Vector clamped_log_std() const;
};

struct ActionSample {
    Vector action;
    double log_prob;
};

// action = mean(obs) + sigma * z with z ~ N(0, I) from rng.
ActionSample sample_action(const GaussianPolicyParams& policy, const Vector& obs,
                           std::mt19937_64& rng);

// Diagonal Gaussian log density of `action` under mean/log_std (already
// clamped); no squashing correction.
double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action);

double log_prob(const GaussianPolicyParams& policy, const Vector& obs, const Vector& action);

// 0.5 * sum_i (log(2*pi*e) + 2*log_std_i), using the clamped log_std.
double entropy(const GaussianPolicyParams& policy);

}  // namespace manip
