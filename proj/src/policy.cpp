#include "manip/policy.hpp"

#include <cmath>

#include "manip/errors.hpp"

namespace manip {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

GaussianPolicyParams GaussianPolicyParams::init(int obs_dim, int action_dim,
                                                const std::vector<int>& hidden,
                                                std::uint64_t seed, double initial_log_std) {
    std::vector<int> sizes;
    sizes.push_back(obs_dim);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(action_dim);
    GaussianPolicyParams p;
    p.mean = MlpParams::xavier_init(sizes, seed, kPolicyHeadScale);
    p.log_std = Vector::Constant(action_dim, initial_log_std);
    return p;
}

Vector GaussianPolicyParams::clamped_log_std() const {
    return log_std.array().min(kLogStdMax).max(kLogStdMin);
}

ActionSample sample_action(const GaussianPolicyParams& policy, const Vector& obs,
                           std::mt19937_64& rng) {
    const Vector mu = mlp_forward(policy.mean, obs);
    const Vector ls = policy.clamped_log_std();
    const Vector sigma = ls.array().exp();
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector action(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) action(i) = mu(i) + sigma(i) * normal(rng);
    return {action, gaussian_log_prob(mu, ls, action)};
}

double gaussian_log_prob(const Vector& mean, const Vector& log_std, const Vector& action) {
    if (mean.size() != action.size() || mean.size() != log_std.size())
        throw DimensionMismatch("log_prob operand widths disagree");
    double lp = 0.0;
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
        const double sigma = std::exp(log_std(i));
        const double z = (action(i) - mean(i)) / sigma;
        lp += -0.5 * kLog2Pi - log_std(i) - 0.5 * z * z;
    }
    return lp;
}

double log_prob(const GaussianPolicyParams& policy, const Vector& obs, const Vector& action) {
    return gaussian_log_prob(mlp_forward(policy.mean, obs), policy.clamped_log_std(), action);
}

double entropy(const GaussianPolicyParams& policy) {
    const Vector ls = policy.clamped_log_std();
    double h = 0.0;
    for (Eigen::Index i = 0; i < ls.size(); ++i) h += 0.5 * (kLog2Pi + 1.0 + 2.0 * ls(i));
    return h;
}

}  // namespace manip
