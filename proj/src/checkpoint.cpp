#include "manip/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "manip/errors.hpp"

namespace manip {

namespace {

constexpr char kMagic[8] = {'M', 'A', 'N', 'I', 'P', 'C', 'K', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CheckpointError("truncated file");
    return v;
}

void write_string(std::ostream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    if (n > 4096) throw CheckpointError("implausible string length");
    std::string s(n, '\0');
    in.read(s.data(), n);
    if (!in) throw CheckpointError("truncated file");
    return s;
}

void write_vector(std::ostream& out, const Vector& v) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) write_pod<double>(out, v(i));
}

Vector read_vector(std::istream& in) {
    const auto n = read_pod<std::uint32_t>(in);
    Vector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = read_pod<double>(in);
    return v;
}

}  // namespace

const char* to_string(Algo a) { return a == Algo::ppo ? "ppo" : "sac"; }

Algo algo_from_string(const std::string& s) {
    if (s == "ppo") return Algo::ppo;
    if (s == "sac") return Algo::sac;
    throw ConfigError("unknown algorithm '" + s + "'");
}

void write_mlp(std::ostream& out, const MlpParams& net) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_sizes.size()));
    for (int s : net.layer_sizes) write_pod<std::int32_t>(out, s);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        const Matrix& w = net.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) write_pod<double>(out, w(i, j));
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i)
            write_pod<double>(out, net.biases[l](i));
    }
}

MlpParams read_mlp(std::istream& in) {
    const auto n_layers = read_pod<std::uint32_t>(in);
    if (n_layers < 2 || n_layers > 64) throw CheckpointError("implausible layer count");
    MlpParams net;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto s = read_pod<std::int32_t>(in);
        if (s <= 0 || s > 1 << 20) throw CheckpointError("implausible layer size");
        net.layer_sizes.push_back(s);
    }
    for (std::uint32_t l = 0; l + 1 < n_layers; ++l) {
        Matrix w(net.layer_sizes[l + 1], net.layer_sizes[l]);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = read_pod<double>(in);
        Vector b(net.layer_sizes[l + 1]);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = read_pod<double>(in);
        net.weights.push_back(std::move(w));
        net.biases.push_back(std::move(b));
    }
    return net;
}

void PolicyCheckpoint::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, version);
    write_pod<std::uint8_t>(out, algo == Algo::ppo ? 0 : 1);
    write_pod<std::int32_t>(out, obs_dim);
    write_pod<std::int32_t>(out, action_dim);
    write_string(out, skill);
    write_pod<std::uint64_t>(out, seed);
    write_mlp(out, net);
    write_pod<std::uint8_t>(out, log_std.size() > 0 ? 1 : 0);
    if (log_std.size() > 0) write_vector(out, log_std);
    if (!out) throw CheckpointError("write failed for '" + path + "'");
}

PolicyCheckpoint PolicyCheckpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("'" + path + "' is not a policy checkpoint");
    PolicyCheckpoint ck;
    ck.version = read_pod<std::uint32_t>(in);
    if (ck.version != 1) throw CheckpointError("unsupported version");
    ck.algo = read_pod<std::uint8_t>(in) == 0 ? Algo::ppo : Algo::sac;
    ck.obs_dim = read_pod<std::int32_t>(in);
    ck.action_dim = read_pod<std::int32_t>(in);
    ck.skill = read_string(in);
    ck.seed = read_pod<std::uint64_t>(in);
    ck.net = read_mlp(in);
    if (read_pod<std::uint8_t>(in) == 1) ck.log_std = read_vector(in);
    return ck;
}

}  // namespace manip
