#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "manip/geometry.hpp"

namespace manip {

enum class Shape { cube, sphere, platform, obstacle };
enum class Color { red, green, blue, yellow };

const char* to_string(Shape s);
const char* to_string(Color c);
Shape shape_from_string(const std::string& s);
Color color_from_string(const std::string& s);

struct ObjectSpec {
    std::string id;
    Shape shape = Shape::cube;
    Color color = Color::red;
    double half_extent = 0.02;  // meters
    Pose pose;
    bool graspable = false;  // platforms and obstacles are never graspable

    Aabb aabb() const { return {pose, half_extent}; }
};

// Goal predicates, evaluated against live world state.
struct EeNear {
    Pose target;
    double tol = 0.02;
};
struct ObjectOn {
    std::string object_id;
    std::string platform_id;
    double tol = 0.02;
};
struct Holding {
    std::string object_id;
};
struct NotHolding {};
struct Sorted {
    std::map<Color, std::string> platform_for_color;
    double tol = 0.02;
};
using GoalPredicate = std::variant<EeNear, ObjectOn, Holding, NotHolding, Sorted>;

// Scheduled object teleport, applied after motion on the step whose
// pre-increment index equals at_step.
struct Perturbation {
    int at_step = 0;
    std::string object_id;
    Pose new_pose;
};

struct ScenarioSpec {
    std::string name;
    WorkspaceBounds bounds;
    Pose ee_start;
    std::optional<std::string> start_holding;
    std::vector<ObjectSpec> objects;
    GoalPredicate goal = NotHolding{};
    int max_steps = 200;
    std::vector<Perturbation> perturbations;
    double sim_dt = 0.1;  // seconds per control step

    const ObjectSpec* find(const std::string& id) const;
    // Throws InvalidScenario on any violated structural constraint.
    void validate() const;
};

ScenarioSpec load_scenario(const std::string& path);
void save_scenario(const ScenarioSpec& spec, const std::string& path);
std::string scenario_to_json_text(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json_text(const std::string& text);

}  // namespace manip
