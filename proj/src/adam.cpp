#include "manip/adam.hpp"

#include <cmath>

#include "manip/errors.hpp"

namespace manip {

void adam_update_array(double* params, const double* grads, double* m, double* v, std::size_t n,
                       long t, const AdamConfig& cfg) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(grads[i])) throw NonFiniteGradient();

    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grads[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

AdamState AdamState::zeros_like(const MlpParams& net) {
    AdamState s;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        s.m_w.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.v_w.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.m_b.push_back(Vector::Zero(net.biases[l].size()));
        s.v_b.push_back(Vector::Zero(net.biases[l].size()));
    }
    return s;
}

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, const AdamConfig& cfg) {
    state.t += 1;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        adam_update_array(params.weights[l].data(), grads.weights[l].data(),
                          state.m_w[l].data(), state.v_w[l].data(),
                          static_cast<std::size_t>(params.weights[l].size()), state.t, cfg);
        adam_update_array(params.biases[l].data(), grads.biases[l].data(), state.m_b[l].data(),
                          state.v_b[l].data(), static_cast<std::size_t>(params.biases[l].size()),
                          state.t, cfg);
    }
}

AdamVecState AdamVecState::zeros(Eigen::Index n) {
    AdamVecState s;
    s.m = Vector::Zero(n);
    s.v = Vector::Zero(n);
    return s;
}

void adam_step(Vector& params, const Vector& grads, AdamVecState& state, const AdamConfig& cfg) {
    state.t += 1;
    adam_update_array(params.data(), grads.data(), state.m.data(), state.v.data(),
                      static_cast<std::size_t>(params.size()), state.t, cfg);
}

}  // namespace manip
