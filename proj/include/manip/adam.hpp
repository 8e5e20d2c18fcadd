#pragma once

#include <cstdint>

#include "manip/mlp.hpp"

namespace manip {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Elementwise bias-corrected update on a flat array. m and v must persist
// between calls; t is the 1-based count of the update being applied.
// Throws NonFiniteGradient if any gradient entry is not finite.
void adam_update_array(double* params, const double* grads, double* m, double* v, std::size_t n,
                       long t, const AdamConfig& cfg);

struct AdamState {
    std::vector<Matrix> m_w, v_w;
    std::vector<Vector> m_b, v_b;
    long t = 0;

    static AdamState zeros_like(const MlpParams& net);
};

void adam_step(MlpParams& params, const MlpGrads& grads, AdamState& state, const AdamConfig& cfg);

struct AdamVecState {
    Vector m, v;
    long t = 0;

    static AdamVecState zeros(Eigen::Index n);
};

void adam_step(Vector& params, const Vector& grads, AdamVecState& state, const AdamConfig& cfg);

}  // namespace manip
