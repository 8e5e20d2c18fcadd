#include "manip/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "manip/errors.hpp"

namespace manip {

using nlohmann::json;

const SummaryObject* WorldSummary::find(const std::string& id) const {
    for (const auto& o : objects)
        if (o.id == id) return &o;
    return nullptr;
}

std::string WorldSummary::to_json_text() const {
    json j;
    j["bounds"] = {{"min", {bounds.min.x, bounds.min.y, bounds.min.z}},
                   {"max", {bounds.max.x, bounds.max.y, bounds.max.z}}};
    j["home"] = {home.x, home.y, home.z};
    j["robot"] = {{"ee", {robot.ee.x, robot.ee.y, robot.ee.z}},
                  {"gripper", robot.gripper_closed ? "closed" : "open"},
                  {"held", robot.held ? json(*robot.held) : json(nullptr)}};
    json objs = json::array();
    for (const auto& o : objects) {
        objs.push_back({{"id", o.id},
                        {"shape", to_string(o.shape)},
                        {"color", to_string(o.color)},
                        {"half_extent", o.half_extent},
                        {"pose", {o.pose.x, o.pose.y, o.pose.z}},
                        {"graspable", o.graspable},
                        {"held", o.held}});
    }
    j["objects"] = objs;
    return j.dump();
}

WorldSummary WorldSummary::from_json_text(const std::string& text) {
    const json j = json::parse(text);
    WorldSummary s;
    auto vec = [](const json& a) { return Vec3{a[0], a[1], a[2]}; };
    s.bounds.min = vec(j.at("bounds").at("min"));
    s.bounds.max = vec(j.at("bounds").at("max"));
    s.home = vec(j.at("home"));
    s.robot.ee = vec(j.at("robot").at("ee"));
    s.robot.gripper_closed = j.at("robot").at("gripper").get<std::string>() == "closed";
    if (!j.at("robot").at("held").is_null())
        s.robot.held = j.at("robot").at("held").get<std::string>();
    for (const auto& jo : j.at("objects")) {
        SummaryObject o;
        o.id = jo.at("id").get<std::string>();
        o.shape = shape_from_string(jo.at("shape").get<std::string>());
        o.color = color_from_string(jo.at("color").get<std::string>());
        o.half_extent = jo.at("half_extent").get<double>();
        o.pose = vec(jo.at("pose"));
        o.graspable = jo.at("graspable").get<bool>();
        o.held = jo.at("held").get<bool>();
        s.objects.push_back(o);
    }
    return s;
}

Env::Env(ScenarioSpec spec, std::uint64_t seed, RewardMode mode)
    : spec_(std::move(spec)), seed_(seed), mode_(mode), rng_(seed) {
    spec_.validate();
    reset();
}

Env make_env(const ScenarioSpec& spec, std::uint64_t seed, RewardMode mode) {
    return Env(spec, seed, mode);
}

Observation Env::reset() {
    rng_.seed(seed_);
    robot_.ee = spec_.ee_start;
    robot_.gripper_closed = false;
    robot_.held.reset();
    objects_ = spec_.objects;
    if (spec_.start_holding) {
        robot_.gripper_closed = true;
        robot_.held = *spec_.start_holding;
        find_mutable(*spec_.start_holding)->pose = robot_.ee;
    }
    step_count_ = 0;
    done_ = false;
    target_override_.reset();
    last_target_distance_ = current_target_distance();
    return observe();
}

const ObjectSpec* Env::find_object(const std::string& id) const {
    for (const auto& o : objects_)
        if (o.id == id) return &o;
    return nullptr;
}

ObjectSpec* Env::find_mutable(const std::string& id) {
    for (auto& o : objects_)
        if (o.id == id) return &o;
    return nullptr;
}

Pose Env::goal_target() const {
    struct Visitor {
        const Env& env;
        Pose operator()(const EeNear& g) const { return g.target; }
        Pose operator()(const ObjectOn& g) const {
            const ObjectSpec* plat = env.find_object(g.platform_id);
            return {plat->pose.x, plat->pose.y, plat->aabb().top()};
        }
        Pose operator()(const Holding& g) const { return env.find_object(g.object_id)->pose; }
        Pose operator()(const NotHolding&) const { return env.robot_.ee; }
        Pose operator()(const Sorted& g) const {
            // First unplaced object of a mapped color, in spec order; the
            // shaping target tracks it (or its platform while held).
            for (const auto& o : env.objects_) {
                if (!o.graspable) continue;
                auto it = g.platform_for_color.find(o.color);
                if (it == g.platform_for_color.end()) continue;
                ObjectOn on{o.id, it->second, g.tol};
                if (env.object_on(on)) continue;
                if (env.robot_.held == o.id) {
                    const ObjectSpec* plat = env.find_object(it->second);
                    return {plat->pose.x, plat->pose.y, plat->aabb().top()};
                }
                return o.pose;
            }
            return env.robot_.ee;
        }
    };
    return std::visit(Visitor{*this}, spec_.goal);
}

Pose Env::target() const { return target_override_ ? *target_override_ : goal_target(); }

void Env::set_target(std::optional<Pose> target) {
    target_override_ = target;
    last_target_distance_ = current_target_distance();
}

double Env::current_target_distance() const { return distance(robot_.ee, target()); }

bool Env::object_on(const ObjectOn& goal) const {
    const ObjectSpec* obj = find_object(goal.object_id);
    const ObjectSpec* plat = find_object(goal.platform_id);
    if (!obj || !plat) return false;
    if (robot_.held == goal.object_id) return false;
    if (distance_xy(obj->pose, plat->pose) > goal.tol) return false;
    const double rest_z = plat->aabb().top() + obj->half_extent;
    return std::abs(obj->pose.z - rest_z) <= goal.tol;
}

bool Env::check_goal() const {
    struct Visitor {
        const Env& env;
        bool operator()(const EeNear& g) const {
            return distance(env.robot_.ee, g.target) <= g.tol;
        }
        bool operator()(const ObjectOn& g) const { return env.object_on(g); }
        bool operator()(const Holding& g) const { return env.robot_.held == g.object_id; }
        bool operator()(const NotHolding&) const { return !env.robot_.held.has_value(); }
        bool operator()(const Sorted& g) const {
            for (const auto& o : env.objects_) {
                if (!o.graspable) continue;
                auto it = g.platform_for_color.find(o.color);
                if (it == g.platform_for_color.end()) continue;
                if (!env.object_on(ObjectOn{o.id, it->second, g.tol})) return false;
            }
            return true;
        }
    };
    return std::visit(Visitor{*this}, spec_.goal);
}

double Env::support_top_below(const Vec3& at, const std::string& dropped_id) const {
    double top = spec_.bounds.min.z;  // table surface
    for (const auto& o : objects_) {
        if (o.id == dropped_id) continue;
        if (o.shape != Shape::platform && o.shape != Shape::obstacle) continue;
        if (o.aabb().footprint_contains(at)) top = std::max(top, o.aabb().top());
    }
    return top;
}

void Env::detach_held() { robot_.held.reset(); }

StepResult Env::step(const Action& action) {
    if (done_) throw EpisodeFinished();

    StepResult result;
    const Vec3 delta = clamp_components(action.delta, -kMaxStep, kMaxStep);

    // Axis-by-axis motion: a component that would put the inflated ee point
    // inside an obstacle box is dropped, the others still apply.
    bool collided = false;
    Vec3 ee = robot_.ee;
    const double comps[3] = {delta.x, delta.y, delta.z};
    for (int axis = 0; axis < 3; ++axis) {
        if (comps[axis] == 0.0) continue;
        Vec3 candidate = ee;
        double* coord = axis == 0 ? &candidate.x : axis == 1 ? &candidate.y : &candidate.z;
        const double lo = axis == 0 ? spec_.bounds.min.x
                          : axis == 1 ? spec_.bounds.min.y
                                      : spec_.bounds.min.z;
        const double hi = axis == 0 ? spec_.bounds.max.x
                          : axis == 1 ? spec_.bounds.max.y
                                      : spec_.bounds.max.z;
        *coord = std::clamp(*coord + comps[axis], lo, hi);
        bool blocked = false;
        for (const auto& o : objects_) {
            if (o.shape != Shape::obstacle) continue;
            if (robot_.held == o.id) continue;
            if (o.aabb().contains(candidate, kEeRadius)) {
                blocked = true;
                break;
            }
        }
        if (blocked)
            collided = true;
        else
            ee = candidate;
    }
    robot_.ee = ee;
    if (robot_.held) find_mutable(*robot_.held)->pose = robot_.ee;

    // Gripper transitions.
    bool grasped = false;
    if (action.grip == GripCmd::close) {
        robot_.gripper_closed = true;
        if (!robot_.held) {
            const ObjectSpec* best = nullptr;
            double best_d = kGraspTol;
            for (const auto& o : objects_) {
                if (!o.graspable) continue;
                const double d = distance(o.pose, robot_.ee);
                if (d <= best_d && (!best || d < best_d)) {
                    best = &o;
                    best_d = d;
                }
            }
            if (best) {
                robot_.held = best->id;
                find_mutable(best->id)->pose = robot_.ee;
                grasped = true;
            }
        }
    } else if (action.grip == GripCmd::open) {
        robot_.gripper_closed = false;
        if (robot_.held) {
            ObjectSpec* obj = find_mutable(*robot_.held);
            detach_held();
            const double top = support_top_below(obj->pose, obj->id);
            obj->pose.z = top + obj->half_extent;
            obj->pose = spec_.bounds.clamp(obj->pose);
        }
    }

    // Scheduled perturbations fire after motion, against the pre-increment
    // step index. Teleporting a held object rips it out of the gripper.
    for (const auto& p : spec_.perturbations) {
        if (p.at_step != step_count_) continue;
        if (robot_.held == p.object_id) detach_held();
        find_mutable(p.object_id)->pose = p.new_pose;
        result.info.perturbed_ids.push_back(p.object_id);
    }

    step_count_ += 1;
    const bool goal = check_goal();
    done_ = goal || step_count_ >= spec_.max_steps;

    const double new_dist = current_target_distance();
    const double delta_dist = new_dist - last_target_distance_;
    last_target_distance_ = new_dist;

    double reward = -kWeightDist * delta_dist;
    if (mode_ == RewardMode::subtask_shaped) {
        reward -= kWeightTime;
        if (collided) reward -= kWeightCollision;
        if (grasped) reward += kBonusGrasp;
    }
    if (goal) reward += kBonusGoal;

    result.info.collision = collided;
    result.info.goal = goal;
    result.info.grasped_this_step = grasped;
    result.reward = reward;
    result.done = done_;
    result.obs = observe();
    return result;
}

Observation Env::observe() const {
    Observation obs;
    obs.reserve(static_cast<std::size_t>(observation_dim()));
    obs.push_back(robot_.ee.x);
    obs.push_back(robot_.ee.y);
    obs.push_back(robot_.ee.z);
    obs.push_back(robot_.gripper_closed ? 1.0 : 0.0);
    obs.push_back(robot_.held ? 1.0 : 0.0);
    for (const auto& o : objects_) {
        const Vec3 rel = o.pose - robot_.ee;
        obs.push_back(rel.x);
        obs.push_back(rel.y);
        obs.push_back(rel.z);
    }
    const Vec3 rel_target = target() - robot_.ee;
    obs.push_back(rel_target.x);
    obs.push_back(rel_target.y);
    obs.push_back(rel_target.z);
    return obs;
}

int Env::observation_dim() const { return 8 + 3 * static_cast<int>(objects_.size()); }

WorldSummary Env::world_summary() const {
    WorldSummary s;
    s.bounds = spec_.bounds;
    s.home = spec_.ee_start;
    s.robot = robot_;
    for (const auto& o : objects_) {
        SummaryObject so;
        so.id = o.id;
        so.shape = o.shape;
        so.color = o.color;
        so.half_extent = o.half_extent;
        so.pose = o.pose;
        so.graspable = o.graspable;
        so.held = robot_.held == o.id;
        s.objects.push_back(so);
    }
    return s;
}

}  // namespace manip
