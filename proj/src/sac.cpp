#include "manip/sac.hpp"

#include <algorithm>
#include <cmath>

#include "manip/errors.hpp"
#include "manip/policy.hpp"

namespace manip {

namespace {

constexpr double kLogStdMin = GaussianPolicyParams::kLogStdMin;
constexpr double kLogStdMax = GaussianPolicyParams::kLogStdMax;

std::vector<int> head_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes;
    sizes.reserve(hidden.size() + 2);
    sizes.push_back(in);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

}  // namespace

double sac_policy_objective(const MlpParams& policy, const MlpParams& q1, const MlpParams& q2,
                            double alpha, const std::vector<Vector>& obs,
                            const std::vector<Vector>& noise, MlpGrads* grads,
                            double* mean_log_pi) {
    if (obs.size() != noise.size())
        throw LengthMismatch("policy objective needs one noise vector per observation");
    if (obs.empty()) throw EmptyBuffer();

    const int act = policy.output_dim() / 2;
    const int obs_dim = policy.input_dim();
    const double inv_n = 1.0 / static_cast<double>(obs.size());
    const double eps = SacTrainer::kSquashEps;

    MlpGrads acc;
    if (grads != nullptr) acc = MlpGrads::zeros_like(policy);

    double total = 0.0;
    double total_lp = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const Vector& z = noise[i];
        if (z.size() != act) throw DimensionMismatch("noise width does not match the action");

        ForwardCache pc;
        const Vector out = mlp_forward(policy, obs[i], grads != nullptr ? &pc : nullptr);
        Vector mu = out.head(act);
        Vector raw = out.tail(act);
        Vector ls = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
        Vector sigma = ls.array().exp();

        Vector u = mu + sigma.cwiseProduct(z);
        Vector t = u.array().tanh();

        double lp = gaussian_log_prob(mu, ls, u);
        for (int d = 0; d < act; ++d) lp -= std::log(1.0 - t[d] * t[d] + eps);
        total_lp += lp;

        Vector x(obs_dim + act);
        x << obs[i], t;
        ForwardCache c1, c2;
        const double q1v = mlp_forward(q1, x, &c1)[0];
        const double q2v = mlp_forward(q2, x, &c2)[0];
        total += alpha * lp - std::min(q1v, q2v);

        if (grads == nullptr) continue;

        // Only the smaller critic carries gradient through min(Q1, Q2).
        const bool first = q1v <= q2v;
        Vector neg_one(1);
        neg_one[0] = -1.0;
        const MlpGrads qg =
            mlp_backward(first ? q1 : q2, first ? c1 : c2, neg_one);  // d(-Qmin)/dx

        Vector og(2 * act);
        for (int d = 0; d < act; ++d) {
            const double sq = 1.0 - t[d] * t[d];
            const double dlp_du = 2.0 * t[d] * sq / (sq + eps);  // of -log(1 - tanh^2 + eps)
            const double dL_du = alpha * dlp_du + qg.input[obs_dim + d] * sq;
            og[d] = dL_du;
            const bool inside = raw[d] > kLogStdMin && raw[d] < kLogStdMax;
            og[act + d] = inside ? dL_du * sigma[d] * z[d] - alpha : 0.0;
        }
        acc.add_scaled(mlp_backward(policy, pc, og), inv_n);
    }

    if (grads != nullptr) *grads = std::move(acc);
    if (mean_log_pi != nullptr) *mean_log_pi = total_lp * inv_n;
    return total * inv_n;
}

SacTrainer::SacTrainer(int obs_dim, int action_dim, SacConfig cfg, std::uint64_t seed)
    : obs_dim_(obs_dim), action_dim_(action_dim), cfg_(std::move(cfg)), rng_(seed) {
    if (obs_dim <= 0 || action_dim <= 0) throw ConfigError("trainer dims must be positive");
    if (cfg_.batch <= 0) throw ConfigError("batch must be positive");
    if (cfg_.tau <= 0.0 || cfg_.tau > 1.0) throw ConfigError("tau must lie in (0, 1]");
    if (cfg_.init_temperature <= 0.0) throw ConfigError("init_temperature must be positive");

    policy_ = MlpParams::xavier_init(head_sizes(obs_dim, cfg_.hidden, 2 * action_dim), seed,
                                     kPolicyHeadScale);
    q1_ = MlpParams::xavier_init(head_sizes(obs_dim + action_dim, cfg_.hidden, 1), seed + 1);
    q2_ = MlpParams::xavier_init(head_sizes(obs_dim + action_dim, cfg_.hidden, 1), seed + 2);
    q1_t_ = q1_;
    q2_t_ = q2_;
    policy_adam_ = AdamState::zeros_like(policy_);
    q1_adam_ = AdamState::zeros_like(q1_);
    q2_adam_ = AdamState::zeros_like(q2_);
    log_alpha_ = std::log(cfg_.init_temperature);
    alpha_adam_ = AdamVecState::zeros(1);
    target_entropy_ = -static_cast<double>(action_dim);
}

double SacTrainer::temperature() const { return std::exp(log_alpha_); }

void SacTrainer::split_head(const Vector& out, Vector* mu, Vector* log_std_raw,
                            Vector* log_std_clamped) const {
    if (out.size() != 2 * action_dim_) throw DimensionMismatch("policy head width is wrong");
    *mu = out.head(action_dim_);
    *log_std_raw = out.tail(action_dim_);
    *log_std_clamped = log_std_raw->cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

Vector SacTrainer::sample_squashed(const Vector& obs, double* log_prob,
                                   std::mt19937_64& rng) const {
    Vector mu, raw, ls;
    split_head(mlp_forward(policy_, obs), &mu, &raw, &ls);
    std::normal_distribution<double> unit;
    Vector u(action_dim_);
    for (int d = 0; d < action_dim_; ++d) u[d] = mu[d] + std::exp(ls[d]) * unit(rng);
    const Vector t = u.array().tanh();
    if (log_prob != nullptr) {
        double lp = gaussian_log_prob(mu, ls, u);
        for (int d = 0; d < action_dim_; ++d) lp -= std::log(1.0 - t[d] * t[d] + kSquashEps);
        *log_prob = lp;
    }
    return t;
}

Vector SacTrainer::mean_squashed(const Vector& obs) const {
    Vector mu, raw, ls;
    split_head(mlp_forward(policy_, obs), &mu, &raw, &ls);
    return mu.array().tanh();
}

std::vector<double> SacTrainer::compute_targets(const std::vector<const Transition*>& batch,
                                                std::mt19937_64& rng) const {
    const double alpha = temperature();
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Transition& tr = *batch[i];
        double backup = 0.0;
        if (!tr.done) {
            double lp = 0.0;
            const Vector next_a = sample_squashed(tr.next_obs, &lp, rng);
            Vector x(obs_dim_ + action_dim_);
            x << tr.next_obs, next_a;
            const double q = std::min(mlp_forward(q1_t_, x)[0], mlp_forward(q2_t_, x)[0]);
            backup = cfg_.gamma * (q - alpha * lp);
        }
        y[i] = tr.reward + backup;
    }
    return y;
}

SacStats SacTrainer::update(const ReplayBuffer& replay) {
    const int n = cfg_.batch;
    const auto batch = replay.sample(static_cast<std::size_t>(n), rng_);
    const std::vector<double> y = compute_targets(batch, rng_);

    SacStats stats;

    double critic_loss = 0.0;
    for (int which = 1; which <= 2; ++which) {
        MlpParams& q = which == 1 ? q1_ : q2_;
        AdamState& state = which == 1 ? q1_adam_ : q2_adam_;
        MlpGrads acc = MlpGrads::zeros_like(q);
        for (int i = 0; i < n; ++i) {
            const Transition& tr = *batch[i];
            Vector x(obs_dim_ + action_dim_);
            x << tr.obs, tr.action;
            ForwardCache cache;
            const double qv = mlp_forward(q, x, &cache)[0];
            const double err = qv - y[static_cast<std::size_t>(i)];
            critic_loss += err * err;
            Vector og(1);
            og[0] = 2.0 * err / n;
            acc.add_scaled(mlp_backward(q, cache, og), 1.0);
        }
        adam_step(q, acc, state, cfg_.adam);
    }
    stats.critic_loss = critic_loss / (2.0 * n);
    if (!std::isfinite(stats.critic_loss)) throw NonFiniteLoss();

    std::vector<Vector> obs_batch(batch.size());
    std::vector<Vector> noise(batch.size());
    std::normal_distribution<double> unit;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        obs_batch[i] = batch[i]->obs;
        Vector z(action_dim_);
        for (int d = 0; d < action_dim_; ++d) z[d] = unit(rng_);
        noise[i] = std::move(z);
    }
    MlpGrads pg = MlpGrads::zeros_like(policy_);
    double mean_lp = 0.0;
    stats.policy_loss =
        sac_policy_objective(policy_, q1_, q2_, temperature(), obs_batch, noise, &pg, &mean_lp);
    if (!std::isfinite(stats.policy_loss)) throw NonFiniteLoss();
    adam_step(policy_, pg, policy_adam_, cfg_.adam);

    stats.entropy_estimate = -mean_lp;
    if (cfg_.auto_tune_temperature) {
        Vector la(1);
        la[0] = log_alpha_;
        Vector lg(1);
        lg[0] = -(mean_lp + target_entropy_);  // descend -log_alpha * (log_pi + target)
        adam_step(la, lg, alpha_adam_, cfg_.adam);
        log_alpha_ = la[0];
    }
    stats.temperature = temperature();

    soft_update_targets();
    return stats;
}

void SacTrainer::soft_update_targets() {
    const double tau = cfg_.tau;
    for (int which = 1; which <= 2; ++which) {
        const MlpParams& src = which == 1 ? q1_ : q2_;
        MlpParams& dst = which == 1 ? q1_t_ : q2_t_;
        for (std::size_t l = 0; l < src.layer_count(); ++l) {
            dst.weights[l] = (1.0 - tau) * dst.weights[l] + tau * src.weights[l];
            dst.biases[l] = (1.0 - tau) * dst.biases[l] + tau * src.biases[l];
        }
    }
}

double SacTrainer::q_value(int which, bool target, const Vector& obs,
                           const Vector& squashed_action) const {
    const MlpParams& q = target ? (which == 1 ? q1_t_ : q2_t_) : (which == 1 ? q1_ : q2_);
    Vector x(obs_dim_ + action_dim_);
    x << obs, squashed_action;
    return mlp_forward(q, x)[0];
}

}  // namespace manip
