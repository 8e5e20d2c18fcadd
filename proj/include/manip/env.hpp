#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "manip/scenario.hpp"

namespace manip {

enum class GripCmd { open, close, hold };

struct Action {
    Vec3 delta;  // meters, clamped per component to kMaxStep
    GripCmd grip = GripCmd::hold;
};

using Observation = std::vector<double>;

struct StepInfo {
    bool collision = false;
    bool goal = false;
    std::vector<std::string> perturbed_ids;
    bool grasped_this_step = false;
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

struct RobotState {
    Pose ee;
    bool gripper_closed = false;
    std::optional<std::string> held;
};

struct SummaryObject {
    std::string id;
    Shape shape = Shape::cube;
    Color color = Color::red;
    double half_extent = 0.0;
    Pose pose;
    bool graspable = false;
    bool held = false;
};

// Immutable snapshot of the world, stable object ordering (spec order).
struct WorldSummary {
    WorkspaceBounds bounds;
    Pose home;
    RobotState robot;
    std::vector<SummaryObject> objects;

    const SummaryObject* find(const std::string& id) const;
    std::string to_json_text() const;
    static WorldSummary from_json_text(const std::string& text);
};

// Which terms of the step reward are active.
enum class RewardMode {
    subtask_shaped,   // distance shaping + time + collision + grasp/goal bonuses
    final_goal_only,  // distance shaping to the final goal + goal bonus
};

// Deterministic kinematic tabletop environment. End-effector is a point
// controlled in task space; grasping teleports the object onto the ee.
class Env {
public:
    static constexpr double kMaxStep = 0.05;     // m per component per step
    static constexpr double kGraspTol = 0.03;    // m, close() attach radius
    static constexpr double kEeRadius = 0.01;    // m, ee inflation for collisions
    static constexpr double kWeightDist = 1.0;   // 1/m
    static constexpr double kWeightTime = 0.01;
    static constexpr double kWeightCollision = 1.0;
    static constexpr double kBonusGrasp = 1.0;
    static constexpr double kBonusGoal = 10.0;

    Env(ScenarioSpec spec, std::uint64_t seed, RewardMode mode = RewardMode::subtask_shaped);

    Observation reset();
    StepResult step(const Action& action);  // throws EpisodeFinished when done

    bool check_goal() const;
    WorldSummary world_summary() const;
    Observation observe() const;

    // Overrides the shaping/observation target; nullopt restores the
    // goal-derived default. Resets the shaping distance baseline.
    void set_target(std::optional<Pose> target);
    Pose target() const;

    const ScenarioSpec& scenario() const { return spec_; }
    const RobotState& robot() const { return robot_; }
    const std::vector<ObjectSpec>& objects() const { return objects_; }
    const ObjectSpec* find_object(const std::string& id) const;
    bool done() const { return done_; }
    int step_count() const { return step_count_; }
    std::uint64_t seed() const { return seed_; }
    std::mt19937_64& rng() { return rng_; }
    int observation_dim() const;

    // Goal-derived default shaping target (platform top for placement goals,
    // object center for grasp goals, the pose itself for reach goals).
    Pose goal_target() const;

private:
    ObjectSpec* find_mutable(const std::string& id);
    bool object_on(const ObjectOn& goal) const;
    double support_top_below(const Vec3& at, const std::string& dropped_id) const;
    double current_target_distance() const;
    void detach_held();

    ScenarioSpec spec_;
    std::uint64_t seed_;
    RewardMode mode_;
    std::mt19937_64 rng_;

    RobotState robot_;
    std::vector<ObjectSpec> objects_;
    int step_count_ = 0;
    bool done_ = false;
    std::optional<Pose> target_override_;
    double last_target_distance_ = 0.0;
};

Env make_env(const ScenarioSpec& spec, std::uint64_t seed,
             RewardMode mode = RewardMode::subtask_shaped);

}  // namespace manip
