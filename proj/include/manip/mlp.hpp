#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace manip {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Fully connected net, tanh hidden activations, identity output.
// All math in double precision.
// Shrink factor for action-head initialization, so freshly built policies
// start with a near-zero mean instead of a random constant drift.
inline constexpr double kPolicyHeadScale = 1e-2;

struct MlpParams {
    std::vector<int> layer_sizes;  // [input, hidden..., output]
    std::vector<Matrix> weights;   // weights[l] maps layer l to l+1
    std::vector<Vector> biases;

    // final_layer_scale shrinks the last layer's weights; policy heads use a
    // small scale so the initial action mean stays near zero whatever constant
    // offsets the observation carries.
    static MlpParams xavier_init(const std::vector<int>& sizes, std::uint64_t seed,
                                 double final_layer_scale = 1.0);

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;
};

struct ForwardCache {
    std::vector<Vector> activations;      // activations[0] is the input
    std::vector<Vector> pre_activations;  // pre_activations[l] feeds layer l+1's activation
};

// Throws DimensionMismatch if the input width is wrong.
Vector mlp_forward(const MlpParams& net, const Vector& input, ForwardCache* cache = nullptr);

struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Vector input;  // dL/dinput, for gradients through a critic's action slot

    static MlpGrads zeros_like(const MlpParams& net);
    void add_scaled(const MlpGrads& other, double scale);
    void scale(double s);
    double squared_norm() const;
};

// Reverse accumulation from dL/doutput. The cache must come from a forward
// pass of the same parameters.
MlpGrads mlp_backward(const MlpParams& net, const ForwardCache& cache, const Vector& output_grad);

// Scales the listed gradients in place so their joint L2 norm is at most
// max_norm. A null entry is skipped; extra_sq adds e.g. a flat vector's norm.
void clip_global_norm(std::vector<MlpGrads*> grads, Vector* extra, double max_norm);

}  // namespace manip
