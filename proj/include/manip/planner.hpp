#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "manip/env.hpp"
#include "manip/scenario.hpp"

namespace manip {

// ---------------------------------------------------------------------------
// instruction grammar
// ---------------------------------------------------------------------------
//   instruction := command (("and" | "then" | ",") command)*
//   command     := "pick" "up" ref
//                | "grasp" ref
//                | "place" "it" "on" ref
//                | "put" ref "on" ref
//                | "move" "to" target
//                | "sort" "the" <shape>s "by" "color"
//                | "avoid" ref
//   target      := ref | ["the"] location
//   ref         := ["the"] [color] noun
//   color       := "red" | "green" | "blue" | "yellow"
//   noun        := "cube" | "sphere" | "platform" | "obstacle"
//   location    := "home" | "center"
// Matching is case-insensitive. ParseError positions are 0-based token
// indices. The pronoun "it" binds to the object of the closest preceding
// pick up / grasp command and is rejected without one.

enum class NamedLocation { home, center };

const char* to_string(NamedLocation l);
NamedLocation location_from_string(const std::string& s);

// Attribute query against a world summary: either a literal object id (name)
// or any subset of {color, shape}.
struct ObjectRef {
    std::optional<Color> color;
    std::optional<Shape> shape;
    std::optional<std::string> name;

    bool operator==(const ObjectRef&) const = default;
    std::string text() const;  // for error messages and pretty-printing
};

using MoveTarget = std::variant<ObjectRef, NamedLocation>;

struct CmdPickUp {
    ObjectRef object;
    bool operator==(const CmdPickUp&) const = default;
};
struct CmdGrasp {
    ObjectRef object;
    bool operator==(const CmdGrasp&) const = default;
};
// "place it on <target>"; the pronoun's referent is fixed at parse time.
struct CmdPlaceIt {
    ObjectRef target;
    ObjectRef held;
    bool operator==(const CmdPlaceIt&) const = default;
};
struct CmdPutOn {
    ObjectRef object;
    ObjectRef target;
    bool operator==(const CmdPutOn&) const = default;
};
struct CmdMoveTo {
    MoveTarget target;
    bool operator==(const CmdMoveTo&) const = default;
};
struct CmdSort {
    Shape shape = Shape::cube;
    bool operator==(const CmdSort&) const = default;
};
struct CmdAvoid {
    ObjectRef obstacle;
    bool operator==(const CmdAvoid&) const = default;
};

using Command =
    std::variant<CmdPickUp, CmdGrasp, CmdPlaceIt, CmdPutOn, CmdMoveTo, CmdSort, CmdAvoid>;
using ParsedCommandList = std::vector<Command>;

ParsedCommandList parse_instruction(const std::string& instruction);

// Canonical text form; parse_instruction(print_commands(cmds)) == cmds for
// any list the grammar itself can produce.
std::string print_commands(const ParsedCommandList& cmds);

// ---------------------------------------------------------------------------
// task plans
// ---------------------------------------------------------------------------

struct MoveTo {
    MoveTarget target;
    bool operator==(const MoveTo&) const = default;
};
struct Grasp {
    ObjectRef object;
    bool operator==(const Grasp&) const = default;
};
struct Release {
    bool operator==(const Release&) const = default;
};
struct PlaceOn {
    ObjectRef target;
    bool operator==(const PlaceOn&) const = default;
};
// Reach `then` while steering clear of `obstacle`.
struct AvoidRegion {
    ObjectRef obstacle;
    MoveTarget then;
    bool operator==(const AvoidRegion&) const = default;
};

using Subtask = std::variant<MoveTo, Grasp, Release, PlaceOn, AvoidRegion>;

enum class PlanSource { rule_based, llm };

struct TaskPlan {
    std::vector<Subtask> subtasks;
    PlanSource source = PlanSource::rule_based;
    std::uint64_t instruction_hash = 0;
};

std::uint64_t fnv1a64(std::string_view text);

// Resolution: a name matches the exact object id; otherwise every set
// attribute must match. Exactly one object may survive the filter.
// Throws UnresolvableRef / AmbiguousRef.
const SummaryObject& resolve_object(const ObjectRef& ref, const WorldSummary& world,
                                    bool require_graspable);

struct ResolvedTarget {
    std::optional<std::string> object_id;  // empty for named locations
    Pose pose;
};
ResolvedTarget resolve_move_target(const MoveTarget& target, const WorldSummary& world);

// Single-gripper discipline (initial held state taken from the world) plus
// full ref resolution. Throws InvalidPlan / UnresolvableRef / AmbiguousRef.
void validate_plan(const TaskPlan& plan, const WorldSummary& world);

// Deterministic command expansion, validated against `world` before return.
TaskPlan plan_rule_based(const ParsedCommandList& parsed, const WorldSummary& world);
TaskPlan plan_rule_based(const std::string& instruction, const WorldSummary& world);

struct FailureInfo {
    std::size_t failed_subtask = 0;  // index into the failed plan
    std::string cause;
};

struct ReplanOutcome {
    TaskPlan plan;  // empty exactly when the hint below is set
    bool goal_satisfied_hint = false;
};

// Fresh plan for whatever remains: commands whose effects already hold in
// `world` are dropped and refs re-resolve at current poses. An empty
// remainder is reported as success instead of an invalid empty plan.
ReplanOutcome replan_rule_based(const ParsedCommandList& parsed, const WorldSummary& world);

// ---------------------------------------------------------------------------
// wire format
// ---------------------------------------------------------------------------
// A plan travels as a JSON array of subtask objects:
//   {"op":"move_to","target":R|L} | {"op":"grasp","object":R}
//   {"op":"release"}              | {"op":"place_on","target":R}
//   {"op":"avoid_region","obstacle":R,"then":R|L}
// where R = {"color"?,"shape"?,"name"?} (set fields only, at least one) and
// L = {"location":"home"|"center"}. Parsing is strict: unknown ops, unknown
// keys inside a ref, or missing fields throw SchemaError.

std::string subtasks_to_json_text(const std::vector<Subtask>& subtasks);
std::vector<Subtask> subtasks_from_json_text(const std::string& text);

// ---------------------------------------------------------------------------
// planner interface
// ---------------------------------------------------------------------------

class Planner {
public:
    virtual ~Planner() = default;
    virtual TaskPlan plan(const std::string& instruction, const WorldSummary& world) = 0;
    virtual ReplanOutcome replan(const std::string& instruction, const TaskPlan& prev,
                                 const WorldSummary& world, const FailureInfo& failure) = 0;
};

class RuleBasedPlanner final : public Planner {
public:
    TaskPlan plan(const std::string& instruction, const WorldSummary& world) override;
    ReplanOutcome replan(const std::string& instruction, const TaskPlan& prev,
                         const WorldSummary& world, const FailureInfo& failure) override;
};

}  // namespace manip
