#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "manip/env.hpp"
#include "manip/planner.hpp"
#include "manip/skills.hpp"

namespace manip {

struct ExecutionConfig {
    int max_steps_per_subtask = 100;
    int max_replans = 3;
    double monitor_pose_tol = 0.02;  // m

    void validate() const;  // throws ConfigError unless everything is positive
};

// Skill source the executor queries each step: the commanded action toward
// a subtask goal, given the current world. Implementations share the skill
// aim and gripper rules; only the motion comes from different places.
class SkillLibrary {
public:
    virtual ~SkillLibrary() = default;
    virtual Action act(SkillId skill, const WorldSummary& world, const Pose& goal) const = 0;
};

// Learned policies, one checkpoint per skill, deterministic inference.
class CheckpointSkills final : public SkillLibrary {
public:
    void add(SkillId skill, PolicyCheckpoint ck);
    bool has(SkillId skill) const;
    Action act(SkillId skill, const WorldSummary& world, const Pose& goal) const override;

private:
    std::map<SkillId, PolicyCheckpoint> checkpoints_;
};

// Scripted proportional controller with an over-the-top obstacle detour.
// Provably reaches any free goal in this kinematic model, so control-loop
// and benchmark correctness never wait on RL convergence.
class OracleSkills final : public SkillLibrary {
public:
    Action act(SkillId skill, const WorldSummary& world, const Pose& goal) const override;
};

// ---- monitoring ----

struct ObjectMoved {
    std::string id;
    double displacement = 0.0;  // m from the tracked snapshot
};
struct GraspLost {};
struct SubtaskTimeout {};
struct CollisionBurst {
    int count = 0;  // consecutive colliding steps
};
using MonitorEvent = std::variant<ObjectMoved, GraspLost, SubtaskTimeout, CollisionBurst>;

std::string to_string(const MonitorEvent& event);
// ObjectMoved, GraspLost, and SubtaskTimeout trigger replanning;
// CollisionBurst only logs.
bool replan_worthy(const MonitorEvent& event);

enum class EpisodeStatus { running, succeeded, failed };
const char* to_string(EpisodeStatus s);

// Live control-loop state; monitor() reads it, execute_task() owns it.
struct ExecutionState {
    TaskPlan plan;
    std::size_t cursor = 0;  // active subtask index, == size when exhausted
    int replans_used = 0;
    std::vector<int> subtask_steps;  // per subtask of the current plan
    EpisodeStatus status = EpisodeStatus::running;

    WorldSummary tracked;  // snapshot at plan time, refreshed per boundary
    std::vector<std::string> referenced_ids;  // objects the plan talks about
    std::optional<std::string> expected_held;  // object a completed Grasp holds
    int collision_streak = 0;  // consecutive colliding steps up to now
};

// Pure scan for environment changes the plan cares about. Held objects are
// exempt from ObjectMoved (they ride the gripper by design); an expected
// held object missing without a commanded open is GraspLost.
std::vector<MonitorEvent> monitor(const WorldSummary& now, const ExecutionState& state,
                                  const ExecutionConfig& cfg);

// Subtask-goal observation: the skill observation whose target slot holds
// the subtask's resolved goal (object pose, location, or platform
// top-center), relative to the ee like every other spatial feature.
Vector build_skill_observation(const Subtask& subtask, const WorldSummary& world);

// Completion predicate for the active subtask against live env state.
// MoveTo: ee within tol of its goal; Grasp: object held; Release: gripper
// empty; PlaceOn: the carried object rests on the platform; AvoidRegion:
// its MoveTo plus a zero-collision requirement over the subtask.
bool subtask_success(const Subtask& subtask, const Env& env, const ExecutionConfig& cfg);

// WorldSummary-side twin of the env's resting-on goal predicate.
bool object_resting_on(const WorldSummary& world, const std::string& object_id,
                       const std::string& platform_id, double tol);

struct SubtaskOutcome {
    std::string subtask;  // printable form
    bool completed = false;
    int steps = 0;
};

struct EpisodeResult {
    EpisodeStatus status = EpisodeStatus::failed;
    int total_steps = 0;
    double wall_seconds = 0.0;  // total_steps * sim_dt
    std::vector<SubtaskOutcome> subtask_outcomes;
    int replans_used = 0;
    double cumulative_reward = 0.0;
    std::vector<std::string> event_log;
    std::string trace;  // line-delimited records, one JSON object per line
};

std::string subtask_text(const Subtask& subtask);

// Structural check over an episode trace: plan first, step indices strictly
// increasing, every replan bracketed by plans or the terminal record, one
// terminal record at the end. Throws TraceInvalid with the offending line.
void validate_trace(const std::string& trace);

// Plans the instruction, walks the subtasks with per-step monitoring, and
// replans on plan-relevant changes until the scenario goal holds or a
// budget runs out. Planner and skill errors propagate to the caller.
EpisodeResult execute_task(const std::string& instruction, Env& env, Planner& planner,
                           const SkillLibrary& skills, const ExecutionConfig& cfg = {});

}  // namespace manip
