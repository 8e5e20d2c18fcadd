#include "manip/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "manip/errors.hpp"

namespace manip {

PpoTrainer::PpoTrainer(int obs_dim, int action_dim, PpoConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed) {
    policy_ = GaussianPolicyParams::init(obs_dim, action_dim, cfg_.hidden, seed,
                                         cfg_.initial_log_std);
    std::vector<int> value_sizes;
    value_sizes.push_back(obs_dim);
    value_sizes.insert(value_sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
    value_sizes.push_back(1);
    value_ = MlpParams::xavier_init(value_sizes, seed + 1);
    policy_adam_ = AdamState::zeros_like(policy_.mean);
    log_std_adam_ = AdamVecState::zeros(action_dim);
    value_adam_ = AdamState::zeros_like(value_);
}

double PpoTrainer::value(const Vector& obs) const { return mlp_forward(value_, obs)(0); }

UpdateStats PpoTrainer::update(const RolloutBuffer& buffer) {
    if (buffer.empty()) throw EmptyBuffer();
    if (!buffer.finalized()) throw Error("rollout buffer not finalized");
    const std::size_t n = buffer.size();

    std::vector<double> adv_raw(n);
    for (std::size_t i = 0; i < n; ++i) adv_raw[i] = buffer.advantage(i);
    const std::vector<double> adv = normalize_advantages(adv_raw);

    UpdateStats stats;
    double sum_surr = 0.0, sum_vloss = 0.0, sum_kl = 0.0, sum_entropy = 0.0;
    std::size_t n_seen = 0, n_clipped = 0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    const int act_dim = policy_.action_dim();

    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng_);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg_.minibatch)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg_.minibatch));
            const double batch_n = static_cast<double>(stop - start);

            MlpGrads policy_grads = MlpGrads::zeros_like(policy_.mean);
            Vector log_std_grads = Vector::Zero(act_dim);
            MlpGrads value_grads = MlpGrads::zeros_like(value_);
            double batch_surr = 0.0, batch_vloss = 0.0;

            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t i = order[k];
                const double a = adv[i];

                ForwardCache mean_cache;
                const Vector mu = mlp_forward(policy_.mean, buffer.obs(i), &mean_cache);
                const Vector ls = policy_.clamped_log_std();
                const double lp_new = gaussian_log_prob(mu, ls, buffer.action(i));
                const double ratio = std::exp(lp_new - buffer.log_prob(i));

                const double unclipped = ratio * a;
                const double clipped_ratio =
                    std::clamp(ratio, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps);
                const double surrogate = std::min(unclipped, clipped_ratio * a);
                const bool clip_active = (a > 0.0 && ratio > 1.0 + cfg_.clip_eps) ||
                                         (a < 0.0 && ratio < 1.0 - cfg_.clip_eps);
                batch_surr += surrogate;
                sum_kl += buffer.log_prob(i) - lp_new;
                if (clip_active) n_clipped += 1;
                n_seen += 1;
                if (cfg_.log_minibatches)
                    stats.samples.push_back({ratio, a, surrogate, clip_active});

                // policy gradient of the minimized loss -surrogate
                if (!clip_active) {
                    Vector mean_grad(act_dim);
                    for (int d = 0; d < act_dim; ++d) {
                        const double sigma = std::exp(ls(d));
                        const double diff = buffer.action(i)(d) - mu(d);
                        const double dlp_dmu = diff / (sigma * sigma);
                        mean_grad(d) = -a * ratio * dlp_dmu;
                        const double z = diff / sigma;
                        const double dlp_dls = z * z - 1.0;
                        if (policy_.log_std(d) > GaussianPolicyParams::kLogStdMin &&
                            policy_.log_std(d) < GaussianPolicyParams::kLogStdMax)
                            log_std_grads(d) += -a * ratio * dlp_dls;
                    }
                    policy_grads.add_scaled(mlp_backward(policy_.mean, mean_cache, mean_grad),
                                            1.0);
                }

                // entropy bonus: dH/dlog_std_d = 1 inside the clamp bracket
                for (int d = 0; d < act_dim; ++d)
                    if (policy_.log_std(d) > GaussianPolicyParams::kLogStdMin &&
                        policy_.log_std(d) < GaussianPolicyParams::kLogStdMax)
                        log_std_grads(d) += -cfg_.entropy_coeff;

                ForwardCache value_cache;
                const double v = mlp_forward(value_, buffer.obs(i), &value_cache)(0);
                const double verr = v - buffer.ret(i);
                batch_vloss += verr * verr;
                value_grads.add_scaled(
                    mlp_backward(value_, value_cache,
                                 Vector::Constant(1, 2.0 * cfg_.value_coeff * verr)),
                    1.0);
            }

            if (!std::isfinite(batch_surr) || !std::isfinite(batch_vloss)) throw NonFiniteLoss();
            sum_surr += batch_surr;
            sum_vloss += batch_vloss;
            sum_entropy += entropy(policy_) * batch_n;  // before this batch's step

            policy_grads.scale(1.0 / batch_n);
            log_std_grads /= batch_n;
            value_grads.scale(1.0 / batch_n);
            clip_global_norm({&policy_grads}, &log_std_grads, cfg_.max_grad_norm);
            clip_global_norm({&value_grads}, nullptr, cfg_.max_grad_norm);

            adam_step(policy_.mean, policy_grads, policy_adam_, cfg_.adam);
            adam_step(policy_.log_std, log_std_grads, log_std_adam_, cfg_.adam);
            adam_step(value_, value_grads, value_adam_, cfg_.adam);
        }
    }

    stats.policy_loss = -sum_surr / static_cast<double>(n_seen);
    stats.value_loss = sum_vloss / static_cast<double>(n_seen);
    stats.entropy = sum_entropy / static_cast<double>(n_seen);
    stats.clip_fraction = static_cast<double>(n_clipped) / static_cast<double>(n_seen);
    stats.approx_kl = sum_kl / static_cast<double>(n_seen);
    return stats;
}

}  // namespace manip
