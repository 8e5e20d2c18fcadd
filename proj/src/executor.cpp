#include "manip/executor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include <json.hpp>

#include "manip/errors.hpp"
#include "manip/trace.hpp"

namespace manip {

using nlohmann::json;

namespace {

// Consecutive colliding steps before the burst event is worth logging.
constexpr int kCollisionBurstLen = 3;

// Clearance added on top of the ee radius when routing over an obstacle.
constexpr double kDetourMargin = 0.005;

Aabb summary_aabb(const SummaryObject& o) { return {o.pose, o.half_extent}; }

const SummaryObject* platform_of_target(const ResolvedTarget& resolved,
                                        const WorldSummary& world) {
    if (!resolved.object_id) return nullptr;
    const SummaryObject* obj = world.find(*resolved.object_id);
    return obj && obj->shape == Shape::platform ? obj : nullptr;
}

std::string target_text(const MoveTarget& target) {
    if (const auto* loc = std::get_if<NamedLocation>(&target))
        return *loc == NamedLocation::home ? "home" : "center";
    return std::get<ObjectRef>(target).text();
}

}  // namespace

void ExecutionConfig::validate() const {
    if (max_steps_per_subtask <= 0) throw ConfigError("max_steps_per_subtask must be positive");
    if (max_replans <= 0) throw ConfigError("max_replans must be positive");
    if (monitor_pose_tol <= 0.0) throw ConfigError("monitor_pose_tol must be positive");
}

// ---- skill libraries ----

void CheckpointSkills::add(SkillId skill, PolicyCheckpoint ck) {
    if (ck.skill != to_string(skill))
        throw CheckpointError("checkpoint trained for '" + ck.skill + "' registered as '" +
                              to_string(skill) + "'");
    checkpoints_[skill] = std::move(ck);
}

bool CheckpointSkills::has(SkillId skill) const { return checkpoints_.count(skill) != 0; }

Action CheckpointSkills::act(SkillId skill, const WorldSummary& world, const Pose& goal) const {
    const auto it = checkpoints_.find(skill);
    if (it == checkpoints_.end()) throw SkillMissing(to_string(skill));
    const Vector obs = skill_observation(world, skill_aim(skill, goal));
    return manip::act(it->second, obs);
}

Action OracleSkills::act(SkillId skill, const WorldSummary& world, const Pose& goal) const {
    const Pose aim = skill_aim(skill, goal);
    const Vec3 ee = world.robot.ee;

    // Straight proportional pull, except that the avoidance skill routes
    // over the top of any obstacle the straight segment would clip.
    Vec3 steer = aim;
    if (skill == SkillId::avoid_reach) {
        const double pad = Env::kEeRadius + kDetourMargin;
        double clear_z = 0.0;
        bool blocked = false;
        for (const auto& o : world.objects) {
            if (o.shape != Shape::obstacle) continue;
            if (!segment_hits_aabb(ee, aim, summary_aabb(o), pad)) continue;
            blocked = true;
            clear_z = std::max(clear_z, summary_aabb(o).top() + pad);
        }
        if (blocked)
            steer = ee.z < clear_z ? Vec3{ee.x, ee.y, clear_z}    // climb first
                                   : Vec3{aim.x, aim.y, clear_z};  // then cross above
    }
    const Vec3 delta =
        clamp_components(world.bounds.clamp(steer) - ee, -Env::kMaxStep, Env::kMaxStep);
    const Vector obs = skill_observation(world, aim);
    return {delta, skill_grip(skill, obs, delta)};
}

// ---- monitoring ----

std::string to_string(const MonitorEvent& event) {
    return std::visit(
        [](const auto& e) -> std::string {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, ObjectMoved>) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.3f", e.displacement);
                return "object " + e.id + " moved " + buf + " m";
            } else if constexpr (std::is_same_v<T, GraspLost>) {
                return "grasp lost";
            } else if constexpr (std::is_same_v<T, SubtaskTimeout>) {
                return "subtask timeout";
            } else {
                return "collision burst (" + std::to_string(e.count) + " steps)";
            }
        },
        event);
}

bool replan_worthy(const MonitorEvent& event) {
    return !std::holds_alternative<CollisionBurst>(event);
}

const char* to_string(EpisodeStatus s) {
    switch (s) {
        case EpisodeStatus::running: return "running";
        case EpisodeStatus::succeeded: return "succeeded";
        case EpisodeStatus::failed: return "failed";
    }
    return "failed";
}

std::vector<MonitorEvent> monitor(const WorldSummary& now, const ExecutionState& state,
                                  const ExecutionConfig& cfg) {
    std::vector<MonitorEvent> out;
    for (const auto& id : state.referenced_ids) {
        const SummaryObject* before = state.tracked.find(id);
        const SummaryObject* current = now.find(id);
        if (!before || !current) continue;
        // An object on the gripper moves because we move it; displacement
        // since a snapshot taken while held is ours too (the drop is
        // deliberate, and a mid-hold perturbation surfaces as GraspLost).
        if (now.robot.held == id || before->held) continue;
        const double moved = distance(before->pose, current->pose);
        if (moved > cfg.monitor_pose_tol) out.push_back(ObjectMoved{id, moved});
    }
    if (state.expected_held && now.robot.held != state.expected_held) out.push_back(GraspLost{});
    if (state.cursor < state.subtask_steps.size() &&
        state.subtask_steps[state.cursor] >= cfg.max_steps_per_subtask)
        out.push_back(SubtaskTimeout{});
    if (state.collision_streak >= kCollisionBurstLen)
        out.push_back(CollisionBurst{state.collision_streak});
    return out;
}

// ---- subtask goal plumbing ----

namespace {

// Resting pose for dropping `held` onto `plat`.
Pose rest_pose(const SummaryObject& plat, const SummaryObject& held) {
    return {plat.pose.x, plat.pose.y, summary_aabb(plat).top() + held.half_extent};
}

// Which skill drives this subtask. A MoveTo toward a platform while
// carrying something is a placement approach and belongs to the place
// skill; everything else maps one to one.
SkillId skill_for(const Subtask& subtask, const WorldSummary& world) {
    return std::visit(
        [&](const auto& s) -> SkillId {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MoveTo>) {
                if (world.robot.held &&
                    platform_of_target(resolve_move_target(s.target, world), world))
                    return SkillId::place;
                return SkillId::reach;
            } else if constexpr (std::is_same_v<T, Grasp>) {
                return SkillId::grasp;
            } else if constexpr (std::is_same_v<T, PlaceOn>) {
                return SkillId::place;
            } else if constexpr (std::is_same_v<T, AvoidRegion>) {
                return SkillId::avoid_reach;
            } else {
                return SkillId::reach;  // Release never queries a skill
            }
        },
        subtask);
}

// The subtask's goal position in world coordinates (before any skill aim).
Pose subtask_goal_pose(const Subtask& subtask, const WorldSummary& world) {
    return std::visit(
        [&](const auto& s) -> Pose {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MoveTo>) {
                const ResolvedTarget resolved = resolve_move_target(s.target, world);
                if (world.robot.held) {
                    if (const SummaryObject* plat = platform_of_target(resolved, world))
                        return rest_pose(*plat, *world.find(*world.robot.held));
                }
                return resolved.pose;
            } else if constexpr (std::is_same_v<T, Grasp>) {
                return resolve_object(s.object, world, true).pose;
            } else if constexpr (std::is_same_v<T, PlaceOn>) {
                const SummaryObject plat = resolve_object(s.target, world, false);
                return {plat.pose.x, plat.pose.y, summary_aabb(plat).top()};
            } else if constexpr (std::is_same_v<T, AvoidRegion>) {
                return resolve_move_target(s.then, world).pose;
            } else {
                return world.robot.ee;  // Release holds position
            }
        },
        subtask);
}

}  // namespace

Vector build_skill_observation(const Subtask& subtask, const WorldSummary& world) {
    return skill_observation(world, subtask_goal_pose(subtask, world));
}

bool object_resting_on(const WorldSummary& world, const std::string& object_id,
                       const std::string& platform_id, double tol) {
    const SummaryObject* obj = world.find(object_id);
    const SummaryObject* plat = world.find(platform_id);
    if (!obj || !plat) return false;
    if (obj->held) return false;
    if (distance_xy(obj->pose, plat->pose) > tol) return false;
    const double rest_z = summary_aabb(*plat).top() + obj->half_extent;
    return std::abs(obj->pose.z - rest_z) <= tol;
}

bool subtask_success(const Subtask& subtask, const Env& env, const ExecutionConfig& cfg) {
    const WorldSummary world = env.world_summary();
    return std::visit(
        [&](const auto& s) -> bool {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MoveTo> || std::is_same_v<T, AvoidRegion>) {
                const Pose aim =
                    skill_aim(skill_for(subtask, world), subtask_goal_pose(subtask, world));
                return distance(world.robot.ee, aim) <= cfg.monitor_pose_tol;
            } else if constexpr (std::is_same_v<T, Grasp>) {
                return world.robot.held == resolve_object(s.object, world, true).id;
            } else if constexpr (std::is_same_v<T, PlaceOn>) {
                const SummaryObject plat = resolve_object(s.target, world, false);
                for (const auto& o : world.objects)
                    if (o.graspable && object_resting_on(world, o.id, plat.id, cfg.monitor_pose_tol))
                        return true;
                return false;
            } else {
                return !world.robot.held.has_value();  // Release
            }
        },
        subtask);
}

std::string subtask_text(const Subtask& subtask) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, MoveTo>) {
                return "move_to(" + target_text(s.target) + ")";
            } else if constexpr (std::is_same_v<T, Grasp>) {
                return "grasp(" + s.object.text() + ")";
            } else if constexpr (std::is_same_v<T, Release>) {
                return "release";
            } else if constexpr (std::is_same_v<T, PlaceOn>) {
                return "place_on(" + s.target.text() + ")";
            } else {
                return "avoid_region(" + s.obstacle.text() + " -> " + target_text(s.then) + ")";
            }
        },
        subtask);
}

// ---- trace validation ----

void validate_trace(const std::string& trace) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < trace.size()) {
        const std::size_t end = trace.find('\n', start);
        if (end == std::string::npos) throw TraceInvalid("unterminated final line");
        lines.push_back(trace.substr(start, end - start));
        start = end + 1;
    }
    if (lines.empty()) throw TraceInvalid("empty trace");

    bool seen_plan = false;
    bool after_replan = false;
    bool terminated = false;
    long long last_step = -1;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string where = "line " + std::to_string(i + 1);
        json j;
        try {
            j = json::parse(lines[i]);
        } catch (const json::parse_error&) {
            throw TraceInvalid(where + " is not a JSON record");
        }
        if (terminated) throw TraceInvalid(where + ": record after terminal");
        const std::string record = j.value("record", "");
        if (!seen_plan) {
            if (record != "plan") throw TraceInvalid(where + ": first record must be a plan");
            seen_plan = true;
            continue;
        }
        if (record == "plan") {
            if (!after_replan) throw TraceInvalid(where + ": plan without a preceding replan");
            after_replan = false;
        } else if (record == "step") {
            if (after_replan) throw TraceInvalid(where + ": step between replan and plan");
            const long long step = j.at("step").get<long long>();
            if (step <= last_step) throw TraceInvalid(where + ": step indices must increase");
            last_step = step;
        } else if (record == "replan") {
            if (after_replan) throw TraceInvalid(where + ": consecutive replans");
            after_replan = true;
        } else if (record == "terminal") {
            if (after_replan) throw TraceInvalid(where + ": terminal between replan and plan");
            terminated = true;
        } else {
            throw TraceInvalid(where + ": unknown record '" + record + "'");
        }
    }
    if (!terminated) throw TraceInvalid("missing terminal record");
}

// ---- the control loop ----

namespace {

class Loop {
public:
    Loop(const std::string& instruction, Env& env, Planner& planner, const SkillLibrary& skills,
         const ExecutionConfig& cfg)
        : instr_(instruction), env_(env), planner_(planner), skills_(skills), cfg_(cfg) {}

    EpisodeResult run() {
        adopt_plan(planner_.plan(instr_, env_.world_summary()));
        while (true) {
            if (env_.check_goal()) {
                finish(EpisodeStatus::succeeded);
                break;
            }
            if (st_.cursor >= st_.plan.subtasks.size()) {
                if (!try_replan("plan exhausted without reaching the goal")) {
                    finish(EpisodeStatus::failed);
                    break;
                }
                continue;
            }
            bind_subtask();
            if (active_done()) {
                complete_subtask();
                continue;
            }
            if (env_.done()) {  // episode step budget spent
                finish(EpisodeStatus::failed);
                break;
            }

            const bool is_release = std::holds_alternative<Release>(st_.plan.subtasks[st_.cursor]);
            const Action action = is_release ? Action{{0.0, 0.0, 0.0}, GripCmd::open}
                                             : skills_.act(skill_, env_.world_summary(), goal_);
            if (action.grip == GripCmd::open) st_.expected_held.reset();  // deliberate drop

            const StepResult step = env_.step(action);
            res_.total_steps += 1;
            res_.cumulative_reward += step.reward;
            st_.subtask_steps[st_.cursor] += 1;
            st_.collision_streak = step.info.collision ? st_.collision_streak + 1 : 0;
            if (step.info.collision) subtask_collisions_ += 1;

            const std::vector<MonitorEvent> events = monitor(env_.world_summary(), st_, cfg_);
            step_record(action, events, step.reward);
            const MonitorEvent* worthy = nullptr;
            for (const auto& e : events) {
                res_.event_log.push_back(to_string(e));
                if (!worthy && replan_worthy(e)) worthy = &e;
            }
            if (worthy && !try_replan(to_string(*worthy))) {
                finish(EpisodeStatus::failed);
                break;
            }
        }
        return std::move(res_);
    }

private:
    void line(const json& j) {
        res_.trace += j.dump();
        res_.trace += '\n';
    }

    void plan_record() {
        line({{"record", "plan"},
              {"source", st_.plan.source == PlanSource::llm ? "llm" : "rule_based"},
              {"replans_used", st_.replans_used},
              {"subtasks", json::parse(subtasks_to_json_text(st_.plan.subtasks))}});
    }

    void step_record(const Action& action, const std::vector<MonitorEvent>& events, double reward) {
        json ev = json::array();
        for (const auto& e : events) ev.push_back(to_string(e));
        line({{"record", "step"},
              {"step", res_.total_steps - 1},
              {"cursor", st_.cursor},
              {"subtask", subtask_text(st_.plan.subtasks[st_.cursor])},
              {"action",
               {{"delta", {action.delta.x, action.delta.y, action.delta.z}},
                {"grip", to_string(action.grip)}}},
              {"events", std::move(ev)},
              {"reward", reward}});
    }

    // Objects the plan talks about, by resolved id, first-mention order.
    static std::vector<std::string> referenced_objects(const TaskPlan& plan,
                                                       const WorldSummary& world) {
        std::vector<std::string> ids;
        auto add = [&](const std::optional<std::string>& id) {
            if (!id) return;
            if (std::find(ids.begin(), ids.end(), *id) == ids.end()) ids.push_back(*id);
        };
        auto add_target = [&](const MoveTarget& t) {
            add(resolve_move_target(t, world).object_id);
        };
        for (const auto& subtask : plan.subtasks) {
            std::visit(
                [&](const auto& s) {
                    using T = std::decay_t<decltype(s)>;
                    if constexpr (std::is_same_v<T, MoveTo>) {
                        add_target(s.target);
                    } else if constexpr (std::is_same_v<T, Grasp>) {
                        add(resolve_object(s.object, world, true).id);
                    } else if constexpr (std::is_same_v<T, PlaceOn>) {
                        add(resolve_object(s.target, world, false).id);
                    } else if constexpr (std::is_same_v<T, AvoidRegion>) {
                        add(resolve_object(s.obstacle, world, false).id);
                        add_target(s.then);
                    }
                },
                subtask);
        }
        return ids;
    }

    void adopt_plan(TaskPlan plan) {
        st_.plan = std::move(plan);
        st_.cursor = 0;
        st_.subtask_steps.assign(st_.plan.subtasks.size(), 0);
        st_.tracked = env_.world_summary();
        st_.referenced_ids = referenced_objects(st_.plan, st_.tracked);
        st_.expected_held = env_.robot().held;
        bound_ = false;
        plan_record();
    }

    // Freeze the steering goal and skill on subtask entry; completion holds
    // against the frozen aim so a mid-subtask release cannot re-aim it.
    void bind_subtask() {
        if (bound_) return;
        bound_ = true;
        subtask_collisions_ = 0;
        const WorldSummary world = env_.world_summary();
        const Subtask& subtask = st_.plan.subtasks[st_.cursor];
        skill_ = skill_for(subtask, world);
        goal_ = subtask_goal_pose(subtask, world);
        aim_ = skill_aim(skill_, goal_);
        env_.set_target(aim_);  // shaping and logs follow the commanded goal
    }

    bool active_done() const {
        const Subtask& subtask = st_.plan.subtasks[st_.cursor];
        if (std::holds_alternative<MoveTo>(subtask) ||
            std::holds_alternative<AvoidRegion>(subtask)) {
            if (std::holds_alternative<AvoidRegion>(subtask) && subtask_collisions_ > 0)
                return false;  // a touched obstacle voids the avoidance
            return distance(env_.robot().ee, aim_) <= cfg_.monitor_pose_tol;
        }
        return subtask_success(subtask, env_, cfg_);
    }

    void complete_subtask() {
        res_.subtask_outcomes.push_back({subtask_text(st_.plan.subtasks[st_.cursor]), true,
                                         st_.subtask_steps[st_.cursor]});
        if (std::holds_alternative<Grasp>(st_.plan.subtasks[st_.cursor]))
            st_.expected_held = env_.robot().held;
        st_.cursor += 1;
        st_.tracked = env_.world_summary();  // the change we just made is intended
        bound_ = false;
    }

    bool try_replan(const std::string& cause) {
        res_.event_log.push_back("replan trigger: " + cause);
        if (st_.replans_used >= cfg_.max_replans) {
            res_.event_log.push_back("replan budget exhausted");
            return false;
        }
        if (st_.cursor < st_.plan.subtasks.size())
            res_.subtask_outcomes.push_back({subtask_text(st_.plan.subtasks[st_.cursor]), false,
                                             st_.subtask_steps[st_.cursor]});
        FailureInfo failure;
        failure.failed_subtask = st_.cursor;
        failure.cause = cause;
        st_.replans_used += 1;
        const ReplanOutcome outcome =
            planner_.replan(instr_, st_.plan, env_.world_summary(), failure);
        line({{"record", "replan"}, {"cause", cause}, {"replans_used", st_.replans_used}});
        adopt_plan(outcome.plan);
        if (outcome.plan.subtasks.empty() && outcome.goal_satisfied_hint && !env_.check_goal()) {
            res_.event_log.push_back("planner reports the goal met but the env disagrees");
            return false;
        }
        return true;
    }

    void finish(EpisodeStatus status) {
        if (status == EpisodeStatus::failed && bound_ && st_.cursor < st_.plan.subtasks.size())
            res_.subtask_outcomes.push_back({subtask_text(st_.plan.subtasks[st_.cursor]), false,
                                             st_.subtask_steps[st_.cursor]});
        st_.status = status;
        res_.status = status;
        res_.replans_used = st_.replans_used;
        res_.wall_seconds = res_.total_steps * env_.scenario().sim_dt;
        line({{"record", "terminal"},
              {"status", to_string(status)},
              {"total_steps", res_.total_steps},
              {"wall_seconds", res_.wall_seconds},
              {"replans_used", res_.replans_used},
              {"cumulative_reward", res_.cumulative_reward}});
    }

    const std::string& instr_;
    Env& env_;
    Planner& planner_;
    const SkillLibrary& skills_;
    const ExecutionConfig& cfg_;

    ExecutionState st_;
    EpisodeResult res_;
    bool bound_ = false;
    SkillId skill_ = SkillId::reach;
    Pose goal_;
    Pose aim_;
    int subtask_collisions_ = 0;
};

}  // namespace

EpisodeResult execute_task(const std::string& instruction, Env& env, Planner& planner,
                           const SkillLibrary& skills, const ExecutionConfig& cfg) {
    cfg.validate();
    return Loop(instruction, env, planner, skills, cfg).run();
}

}  // namespace manip
