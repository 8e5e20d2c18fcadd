#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "manip/checkpoint.hpp"
#include "manip/env.hpp"
#include "manip/ppo.hpp"
#include "manip/sac.hpp"

namespace manip {

// Reusable low-level motion skills; each is trained once in its own
// randomized practice scene and then driven by subtask targets.
enum class SkillId { reach, grasp, place, avoid_reach };

const char* to_string(SkillId s);
SkillId skill_from_string(const std::string& s);

// Scenario-independent skill observation:
//   [gripper closed, holding, nearest obstacle - ee (3), target - ee (3)]
// Everything spatial is ee-relative on purpose: policies trained on these
// features transfer across scenes instead of memorizing absolute positions.
// With no obstacle in the scene the obstacle slot is all zero; a real
// obstacle can never be centered exactly on the ee, since its box blocks
// entry, so the zero vector is unambiguous (and keeps the input scale tame).
inline constexpr int kSkillObsDim = 8;
inline constexpr double kObstacleSentinel = 0.0;

Vector skill_observation(const WorldSummary& world, const Pose& target);

// Where the skill steers the ee for a given subtask target. Identity for
// most skills; place aims a little above the drop point and lets the
// release rule drop the object onto the support below, so the approach
// funnel never runs into the support surface itself.
Pose skill_aim(SkillId skill, const Pose& target);

// Gripper rule per skill; the policy only commands motion. The rule judges
// where this step's commanded delta will land, because the env moves first
// and then applies the gripper: deciding on the pre-move distance would
// demand two consecutive in-tolerance steps, which an exploring policy
// almost never produces.
GripCmd skill_grip(SkillId skill, const Vector& obs, const Vec3& delta);

// Stable per-episode derived stream seed.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t salt);

// Freshly constructed, ready-to-step practice env for one training episode.
// Layouts vary deterministically with (base_seed, episode).
using EnvFactory = std::function<Env(int episode)>;
EnvFactory skill_env_factory(SkillId skill, std::uint64_t base_seed);

struct LearningCurvePoint {
    int episode = 0;
    double cumulative_reward = 0.0;
    bool success = false;
    int steps = 0;
};
using LearningCurve = std::vector<LearningCurvePoint>;

struct TrainOptions {
    PpoConfig ppo;
    SacConfig sac;
    TrainOptions();  // skill-sized defaults, smaller than the raw algo ones
};

struct TrainResult {
    PolicyCheckpoint checkpoint;
    LearningCurve curve;
};

// Trains one skill policy over `episodes` episodes drawn from the factory.
// episodes == 0 returns the untrained initialization and an empty curve.
TrainResult train_skill(const EnvFactory& factory, SkillId skill, Algo algo, int episodes,
                        std::uint64_t seed, const TrainOptions& opts = TrainOptions());

// Single monolithic policy on the raw scenario observation with a fourth
// gripper channel, rewarded only by final-goal shaping. The no-decomposition
// baseline.
TrainResult train_flat(const ScenarioSpec& scenario, Algo algo, int episodes, std::uint64_t seed,
                       const TrainOptions& opts = TrainOptions());

// Policy action for one observation. Deterministic uses the distribution
// mode; otherwise rng must be non-null. The gripper command comes from the
// checkpoint's skill rule (or the fourth channel for "flat").
Action act(const PolicyCheckpoint& ck, const Vector& obs, bool deterministic = true,
           std::mt19937_64* rng = nullptr);

Vector to_vector(const Observation& obs);

}  // namespace manip
