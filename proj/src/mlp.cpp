#include "manip/mlp.hpp"

#include <cmath>
#include <random>

#include "manip/errors.hpp"

namespace manip {

MlpParams MlpParams::xavier_init(const std::vector<int>& sizes, std::uint64_t seed,
                                 double final_layer_scale) {
    if (sizes.size() < 2) throw DimensionMismatch("net needs at least input and output layers");
    for (int n : sizes)
        if (n <= 0) throw DimensionMismatch("layer sizes must be positive");

    MlpParams net;
    net.layer_sizes = sizes;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        double limit = std::sqrt(6.0 / (fan_in + fan_out));
        if (l + 2 == sizes.size()) limit *= final_layer_scale;
        std::uniform_real_distribution<double> dist(-limit, limit);
        Matrix w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i)
            for (int j = 0; j < fan_in; ++j) w(i, j) = dist(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Vector::Zero(fan_out));
    }
    return net;
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l)
        n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
    return n;
}

Vector mlp_forward(const MlpParams& net, const Vector& input, ForwardCache* cache) {
    if (input.size() != net.input_dim())
        throw DimensionMismatch("forward input width " + std::to_string(input.size()) +
                                ", net expects " + std::to_string(net.input_dim()));
    if (cache) {
        cache->activations.clear();
        cache->pre_activations.clear();
        cache->activations.push_back(input);
    }
    Vector a = input;
    const std::size_t last = net.weights.size() - 1;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Vector z = net.weights[l] * a + net.biases[l];
        if (cache) cache->pre_activations.push_back(z);
        a = l == last ? z : Vector(z.array().tanh());
        if (cache) cache->activations.push_back(a);
    }
    return a;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& net) {
    MlpGrads g;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weights.push_back(Matrix::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.push_back(Vector::Zero(net.biases[l].size()));
    }
    g.input = Vector::Zero(net.input_dim());
    return g;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += scale * other.weights[l];
        biases[l] += scale * other.biases[l];
    }
    input += scale * other.input;
}

void MlpGrads::scale(double s) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] *= s;
        biases[l] *= s;
    }
    input *= s;
}

double MlpGrads::squared_norm() const {
    double n = 0.0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += weights[l].squaredNorm();
        n += biases[l].squaredNorm();
    }
    return n;
}

MlpGrads mlp_backward(const MlpParams& net, const ForwardCache& cache, const Vector& output_grad) {
    if (output_grad.size() != net.output_dim())
        throw DimensionMismatch("output grad width " + std::to_string(output_grad.size()));
    if (cache.activations.size() != net.weights.size() + 1)
        throw DimensionMismatch("stale forward cache");

    MlpGrads grads;
    grads.weights.resize(net.weights.size());
    grads.biases.resize(net.weights.size());

    Vector delta = output_grad;  // output layer is identity
    for (std::size_t l = net.weights.size(); l-- > 0;) {
        grads.weights[l] = delta * cache.activations[l].transpose();
        grads.biases[l] = delta;
        Vector upstream = net.weights[l].transpose() * delta;
        if (l > 0) {
            // through tanh: d tanh(z) = 1 - tanh(z)^2, and activations[l]
            // already holds tanh(z)
            delta = upstream.array() * (1.0 - cache.activations[l].array().square());
        } else {
            grads.input = upstream;
        }
    }
    return grads;
}

void clip_global_norm(std::vector<MlpGrads*> grads, Vector* extra, double max_norm) {
    double sq = extra ? extra->squaredNorm() : 0.0;
    for (const MlpGrads* g : grads)
        if (g) sq += g->squared_norm();
    const double norm = std::sqrt(sq);
    if (norm <= max_norm || norm == 0.0) return;
    const double s = max_norm / norm;
    for (MlpGrads* g : grads)
        if (g) g->scale(s);
    if (extra) *extra *= s;
}

}  // namespace manip
