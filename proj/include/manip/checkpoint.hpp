#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "manip/policy.hpp"

namespace manip {

enum class Algo { ppo, sac };

const char* to_string(Algo a);
Algo algo_from_string(const std::string& s);

// Versioned binary parameter dump. Doubles are written raw, so a load
// reproduces the saved parameters bit for bit.
struct PolicyCheckpoint {
    std::uint32_t version = 1;
    Algo algo = Algo::ppo;
    int obs_dim = 0;
    int action_dim = 0;  // policy output width (may include a gripper channel)
    std::string skill;
    std::uint64_t seed = 0;
    MlpParams net;   // ppo: mean net; sac: mean-and-log-std head (2x action_dim out)
    Vector log_std;  // ppo only; empty for sac

    void save(const std::string& path) const;
    static PolicyCheckpoint load(const std::string& path);
};

void write_mlp(std::ostream& out, const MlpParams& net);
MlpParams read_mlp(std::istream& in);

}  // namespace manip
