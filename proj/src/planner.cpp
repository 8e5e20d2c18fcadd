#include "manip/planner.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

#include <json.hpp>

#include "manip/errors.hpp"

namespace manip {

using nlohmann::json;

const char* to_string(NamedLocation l) {
    switch (l) {
        case NamedLocation::home: return "home";
        case NamedLocation::center: return "center";
    }
    return "?";
}

NamedLocation location_from_string(const std::string& s) {
    if (s == "home") return NamedLocation::home;
    if (s == "center") return NamedLocation::center;
    throw InvalidPlan("unknown location '" + s + "'");
}

std::string ObjectRef::text() const {
    if (name) return *name;
    std::string out;
    if (color) out += to_string(*color);
    if (shape) {
        if (!out.empty()) out += ' ';
        out += to_string(*shape);
    }
    return out.empty() ? "(unconstrained)" : out;
}

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

namespace {

std::optional<Color> maybe_color(const std::string& w) {
    if (w == "red") return Color::red;
    if (w == "green") return Color::green;
    if (w == "blue") return Color::blue;
    if (w == "yellow") return Color::yellow;
    return std::nullopt;
}

std::optional<Shape> maybe_shape(const std::string& w) {
    if (w == "cube") return Shape::cube;
    if (w == "sphere") return Shape::sphere;
    if (w == "platform") return Shape::platform;
    if (w == "obstacle") return Shape::obstacle;
    return std::nullopt;
}

std::optional<NamedLocation> maybe_location(const std::string& w) {
    if (w == "home") return NamedLocation::home;
    if (w == "center") return NamedLocation::center;
    return std::nullopt;
}

// Lowercased words; commas split off as their own tokens so separators are
// uniform.
std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (const char raw : text) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (std::isspace(static_cast<unsigned char>(c))) {
            flush();
        } else if (c == ',') {
            flush();
            out.emplace_back(",");
        } else {
            cur += c;
        }
    }
    flush();
    return out;
}

class Parser {
public:
    explicit Parser(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}

    ParsedCommandList parse() {
        if (tokens_.empty()) throw ParseError(0, "an instruction", "end of instruction");
        ParsedCommandList cmds;
        cmds.push_back(command(cmds));
        while (!at_end()) {
            const std::string& sep = peek();
            if (sep != "and" && sep != "then" && sep != ",")
                throw err("'and', 'then', or ','");
            ++pos_;
            // "x, then y" reads as one separator
            if (sep == "," && !at_end() && (peek() == "and" || peek() == "then")) ++pos_;
            cmds.push_back(command(cmds));
        }
        return cmds;
    }

private:
    bool at_end() const { return pos_ >= tokens_.size(); }
    const std::string& peek() const { return tokens_[pos_]; }

    ParseError err(const std::string& expected) const {
        return ParseError(pos_, expected, at_end() ? "end of instruction" : tokens_[pos_]);
    }

    std::string take(const std::string& expected) {
        if (at_end()) throw err(expected);
        return tokens_[pos_++];
    }

    void expect(const std::string& word) {
        if (at_end() || peek() != word) throw err("'" + word + "'");
        ++pos_;
    }

    // ref := ["the"] [color] noun
    ObjectRef object_ref() {
        if (!at_end() && peek() == "the") ++pos_;
        ObjectRef ref;
        if (!at_end()) ref.color = maybe_color(peek());
        if (ref.color) ++pos_;
        if (at_end()) throw err("an object noun (cube/sphere/platform/obstacle)");
        ref.shape = maybe_shape(peek());
        if (!ref.shape) throw err("an object noun (cube/sphere/platform/obstacle)");
        ++pos_;
        return ref;
    }

    // target := ref | ["the"] location
    MoveTarget move_target() {
        if (!at_end() && peek() == "the") ++pos_;
        if (!at_end()) {
            if (const auto loc = maybe_location(peek())) {
                ++pos_;
                return *loc;
            }
        }
        ObjectRef ref;
        if (!at_end()) ref.color = maybe_color(peek());
        if (ref.color) ++pos_;
        if (at_end()) throw err("an object noun or location");
        ref.shape = maybe_shape(peek());
        if (!ref.shape) throw err("an object noun or location");
        ++pos_;
        return ref;
    }

    Command command(const ParsedCommandList& before) {
        const std::string verb = take("a command verb (pick/grasp/place/put/move/sort/avoid)");
        if (verb == "pick") {
            expect("up");
            return CmdPickUp{object_ref()};
        }
        if (verb == "grasp") return CmdGrasp{object_ref()};
        if (verb == "place") {
            const std::size_t it_pos = pos_;
            expect("it");
            expect("on");
            CmdPlaceIt cmd{object_ref(), bound_object(before, it_pos)};
            return cmd;
        }
        if (verb == "put") {
            CmdPutOn cmd;
            cmd.object = object_ref();
            expect("on");
            cmd.target = object_ref();
            return cmd;
        }
        if (verb == "move") {
            expect("to");
            return CmdMoveTo{move_target()};
        }
        if (verb == "sort") {
            expect("the");
            const std::string plural = take("a plural shape (cubes/spheres/...)");
            if (plural.size() < 2 || plural.back() != 's')
                throw ParseError(pos_ - 1, "a plural shape (cubes/spheres/...)", plural);
            const auto shape = maybe_shape(plural.substr(0, plural.size() - 1));
            if (!shape)
                throw ParseError(pos_ - 1, "a plural shape (cubes/spheres/...)", plural);
            expect("by");
            expect("color");
            return CmdSort{*shape};
        }
        if (verb == "avoid") return CmdAvoid{object_ref()};
        throw ParseError(pos_ - 1, "a command verb (pick/grasp/place/put/move/sort/avoid)",
                         verb);
    }

    // "it" refers to whatever the closest preceding command grasps.
    static ObjectRef bound_object(const ParsedCommandList& before, std::size_t it_pos) {
        for (auto cmd = before.rbegin(); cmd != before.rend(); ++cmd) {
            if (const auto* p = std::get_if<CmdPickUp>(&*cmd)) return p->object;
            if (const auto* g = std::get_if<CmdGrasp>(&*cmd)) return g->object;
            if (const auto* u = std::get_if<CmdPutOn>(&*cmd)) return u->object;
        }
        throw ParseError(it_pos, "a preceding pick up, grasp, or put", "it");
    }

    std::vector<std::string> tokens_;
    std::size_t pos_ = 0;
};

std::string ref_text_with_article(const ObjectRef& ref) { return "the " + ref.text(); }

std::string target_text(const MoveTarget& target) {
    if (const auto* loc = std::get_if<NamedLocation>(&target)) return to_string(*loc);
    return ref_text_with_article(std::get<ObjectRef>(target));
}

}  // namespace

ParsedCommandList parse_instruction(const std::string& instruction) {
    return Parser(tokenize(instruction)).parse();
}

std::string print_commands(const ParsedCommandList& cmds) {
    std::string out;
    for (const Command& cmd : cmds) {
        if (!out.empty()) out += " and ";
        std::visit(
            [&](const auto& c) {
                using T = std::decay_t<decltype(c)>;
                if constexpr (std::is_same_v<T, CmdPickUp>)
                    out += "pick up " + ref_text_with_article(c.object);
                else if constexpr (std::is_same_v<T, CmdGrasp>)
                    out += "grasp " + ref_text_with_article(c.object);
                else if constexpr (std::is_same_v<T, CmdPlaceIt>)
                    out += "place it on " + ref_text_with_article(c.target);
                else if constexpr (std::is_same_v<T, CmdPutOn>)
                    out += "put " + ref_text_with_article(c.object) + " on " +
                           ref_text_with_article(c.target);
                else if constexpr (std::is_same_v<T, CmdMoveTo>)
                    out += "move to " + target_text(c.target);
                else if constexpr (std::is_same_v<T, CmdSort>)
                    out += "sort the " + std::string(to_string(c.shape)) + "s by color";
                else if constexpr (std::is_same_v<T, CmdAvoid>)
                    out += "avoid " + ref_text_with_article(c.obstacle);
            },
            cmd);
    }
    return out;
}

// ---------------------------------------------------------------------------
// resolution and validation
// ---------------------------------------------------------------------------

const SummaryObject& resolve_object(const ObjectRef& ref, const WorldSummary& world,
                                    bool require_graspable) {
    const SummaryObject* found = nullptr;
    for (const auto& obj : world.objects) {
        if (ref.name) {
            if (obj.id != *ref.name) continue;
        } else {
            if (ref.color && obj.color != *ref.color) continue;
            if (ref.shape && obj.shape != *ref.shape) continue;
        }
        if (require_graspable && !obj.graspable) continue;
        if (found) throw AmbiguousRef(ref.text());
        found = &obj;
    }
    if (!found) throw UnresolvableRef(ref.text());
    return *found;
}

ResolvedTarget resolve_move_target(const MoveTarget& target, const WorldSummary& world) {
    if (const auto* loc = std::get_if<NamedLocation>(&target)) {
        if (*loc == NamedLocation::home) return {std::nullopt, world.home};
        // center: workspace midpoint in xy at the home hover height
        const Vec3 mid = world.bounds.center();
        return {std::nullopt, Pose{mid.x, mid.y, world.home.z}};
    }
    const SummaryObject& obj = resolve_object(std::get<ObjectRef>(target), world, false);
    return {obj.id, obj.pose};
}

void validate_plan(const TaskPlan& plan, const WorldSummary& world) {
    if (plan.subtasks.empty()) throw InvalidPlan("no subtasks");
    bool held = world.robot.held.has_value();
    for (const Subtask& s : plan.subtasks) {
        std::visit(
            [&](const auto& t) {
                using T = std::decay_t<decltype(t)>;
                if constexpr (std::is_same_v<T, MoveTo>) {
                    resolve_move_target(t.target, world);
                } else if constexpr (std::is_same_v<T, Grasp>) {
                    resolve_object(t.object, world, true);
                    if (held) throw InvalidPlan("grasp while already holding");
                    held = true;
                } else if constexpr (std::is_same_v<T, Release>) {
                    if (!held) throw InvalidPlan("release with an empty gripper");
                    held = false;
                } else if constexpr (std::is_same_v<T, PlaceOn>) {
                    resolve_object(t.target, world, false);
                    if (!held) throw InvalidPlan("place with an empty gripper");
                    held = false;
                } else if constexpr (std::is_same_v<T, AvoidRegion>) {
                    resolve_object(t.obstacle, world, false);
                    resolve_move_target(t.then, world);
                }
            },
            s);
    }
}

// ---------------------------------------------------------------------------
// rule-based planning
// ---------------------------------------------------------------------------

namespace {

// Matches the environment's resting-pose check: not in the gripper, centered
// within tol in xy, and sitting on the platform top within tol in z.
constexpr double kStateTol = 0.02;

bool object_on_platform(const SummaryObject& obj, const SummaryObject& plat) {
    if (obj.held) return false;
    if (distance_xy(obj.pose, plat.pose) > kStateTol) return false;
    const double rest_z = plat.pose.z + plat.half_extent + obj.half_extent;
    return std::abs(obj.pose.z - rest_z) <= kStateTol;
}

// Shared expansion core. The expander threads a symbolic gripper through the
// command list (seeded from the world's held object) so a pick followed by a
// place expands to grasp once and release once. When `state_aware` is set,
// commands whose effects already hold in the world are dropped entirely (the
// replan path); a skipped move also discards a pending avoid, since the
// journey it guarded is gone.
class Expander {
public:
    Expander(const WorldSummary& world, bool state_aware)
        : world_(world), state_aware_(state_aware), held_(world.robot.held) {}

    std::vector<Subtask> expand(const ParsedCommandList& cmds) {
        for (const Command& cmd : cmds) std::visit([&](const auto& c) { visit(c); }, cmd);
        if (pending_avoid_)
            throw InvalidPlan("avoid must be followed by a command that moves");
        return std::move(out_);
    }

private:
    void emit_move(MoveTarget target) {
        if (pending_avoid_) {
            out_.push_back(AvoidRegion{*pending_avoid_, std::move(target)});
            pending_avoid_.reset();
        } else {
            out_.push_back(MoveTo{std::move(target)});
        }
    }

    void skip_move() { pending_avoid_.reset(); }

    void visit(const CmdPickUp& c) { pick(c.object); }

    void visit(const CmdGrasp& c) { pick(c.object); }

    void pick(const ObjectRef& ref) {
        const SummaryObject& obj = resolve_object(ref, world_, true);
        if (held_ == obj.id) {
            skip_move();
            return;
        }
        emit_move(ref);
        out_.push_back(Grasp{ref});
        held_ = obj.id;
    }

    void visit(const CmdPlaceIt& c) { place(c.held, c.target); }

    void visit(const CmdPutOn& c) { place(c.object, c.target); }

    void visit(const CmdMoveTo& c) {
        if (state_aware_) {
            const ResolvedTarget t = resolve_move_target(c.target, world_);
            if (distance(world_.robot.ee, t.pose) <= kStateTol) {
                skip_move();
                return;
            }
        }
        emit_move(c.target);
    }

    void visit(const CmdSort& c) {
        std::vector<const SummaryObject*> items;
        for (const auto& obj : world_.objects)
            if (obj.graspable && obj.shape == c.shape) items.push_back(&obj);
        if (items.empty()) throw UnresolvableRef(std::string(to_string(c.shape)) + "s to sort");
        std::sort(items.begin(), items.end(),
                  [](const auto* a, const auto* b) { return a->id < b->id; });
        // a held item must be put down before anything else can be grasped
        std::stable_partition(items.begin(), items.end(),
                              [&](const auto* o) { return held_ == o->id; });
        for (const SummaryObject* obj : items) {
            const ObjectRef plat_ref{obj->color, Shape::platform, std::nullopt};
            const SummaryObject& plat = resolve_object(plat_ref, world_, false);
            if (state_aware_ && object_on_platform(*obj, plat)) continue;
            const ObjectRef obj_ref{std::nullopt, std::nullopt, obj->id};
            if (held_ != obj->id) {
                emit_move(obj_ref);
                out_.push_back(Grasp{obj_ref});
            }
            emit_move(plat_ref);
            out_.push_back(Release{});
            held_.reset();
        }
    }

    void visit(const CmdAvoid& c) {
        resolve_object(c.obstacle, world_, false);
        pending_avoid_ = c.obstacle;
    }

    void place(const ObjectRef& obj_ref, const ObjectRef& target_ref) {
        const SummaryObject& obj = resolve_object(obj_ref, world_, true);
        if (state_aware_) {
            const SummaryObject& plat = resolve_object(target_ref, world_, false);
            if (object_on_platform(obj, plat)) {
                skip_move();
                return;
            }
        }
        if (held_ != obj.id) {
            emit_move(obj_ref);
            out_.push_back(Grasp{obj_ref});
        }
        emit_move(target_ref);
        out_.push_back(Release{});
        held_.reset();
    }

    const WorldSummary& world_;
    const bool state_aware_;
    std::optional<std::string> held_;  // symbolic gripper content at this point
    std::vector<Subtask> out_;
    std::optional<ObjectRef> pending_avoid_;
};

}  // namespace

TaskPlan plan_rule_based(const ParsedCommandList& parsed, const WorldSummary& world) {
    TaskPlan plan;
    plan.subtasks = Expander(world, false).expand(parsed);
    plan.source = PlanSource::rule_based;
    validate_plan(plan, world);
    return plan;
}

TaskPlan plan_rule_based(const std::string& instruction, const WorldSummary& world) {
    TaskPlan plan = plan_rule_based(parse_instruction(instruction), world);
    plan.instruction_hash = fnv1a64(instruction);
    return plan;
}

ReplanOutcome replan_rule_based(const ParsedCommandList& parsed, const WorldSummary& world) {
    ReplanOutcome out;
    out.plan.subtasks = Expander(world, true).expand(parsed);
    out.plan.source = PlanSource::rule_based;
    if (out.plan.subtasks.empty()) {
        out.goal_satisfied_hint = true;
        return out;
    }
    validate_plan(out.plan, world);
    return out;
}

// ---------------------------------------------------------------------------
// wire format
// ---------------------------------------------------------------------------

namespace {

json ref_to_json(const ObjectRef& ref) {
    json j = json::object();
    if (ref.color) j["color"] = to_string(*ref.color);
    if (ref.shape) j["shape"] = to_string(*ref.shape);
    if (ref.name) j["name"] = *ref.name;
    return j;
}

json target_to_json(const MoveTarget& target) {
    if (const auto* loc = std::get_if<NamedLocation>(&target))
        return json{{"location", to_string(*loc)}};
    return ref_to_json(std::get<ObjectRef>(target));
}

std::string get_string(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string())
        throw SchemaError(std::string("missing string field '") + key + "'");
    return j[key].get<std::string>();
}

ObjectRef ref_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("ref must be a JSON object");
    ObjectRef ref;
    for (const auto& [key, value] : j.items()) {
        if (!value.is_string()) throw SchemaError("ref field '" + key + "' must be a string");
        const std::string s = value.get<std::string>();
        if (key == "color") {
            ref.color = maybe_color(s);
            if (!ref.color) throw SchemaError("unknown color '" + s + "'");
        } else if (key == "shape") {
            ref.shape = maybe_shape(s);
            if (!ref.shape) throw SchemaError("unknown shape '" + s + "'");
        } else if (key == "name") {
            ref.name = s;
        } else {
            throw SchemaError("unknown ref field '" + key + "'");
        }
    }
    if (!ref.color && !ref.shape && !ref.name)
        throw SchemaError("ref needs at least one of color/shape/name");
    return ref;
}

MoveTarget target_from_json(const json& j) {
    if (j.is_object() && j.contains("location")) {
        if (j.size() != 1) throw SchemaError("location target carries only 'location'");
        const std::string s = get_string(j, "location");
        const auto loc = maybe_location(s);
        if (!loc) throw SchemaError("unknown location '" + s + "'");
        return *loc;
    }
    return ref_from_json(j);
}

void require_keys(const json& j, std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find_if(keys.begin(), keys.end(),
                         [&](const char* k) { return key == k; }) == keys.end())
            throw SchemaError("unknown field '" + key + "' in subtask");
    }
}

json subtask_to_json(const Subtask& s) {
    return std::visit(
        [](const auto& t) -> json {
            using T = std::decay_t<decltype(t)>;
            if constexpr (std::is_same_v<T, MoveTo>)
                return json{{"op", "move_to"}, {"target", target_to_json(t.target)}};
            else if constexpr (std::is_same_v<T, Grasp>)
                return json{{"op", "grasp"}, {"object", ref_to_json(t.object)}};
            else if constexpr (std::is_same_v<T, Release>)
                return json{{"op", "release"}};
            else if constexpr (std::is_same_v<T, PlaceOn>)
                return json{{"op", "place_on"}, {"target", ref_to_json(t.target)}};
            else
                return json{{"op", "avoid_region"},
                            {"obstacle", ref_to_json(t.obstacle)},
                            {"then", target_to_json(t.then)}};
        },
        s);
}

Subtask subtask_from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("subtask must be a JSON object");
    const std::string op = get_string(j, "op");
    if (op == "move_to") {
        require_keys(j, {"op", "target"});
        if (!j.contains("target")) throw SchemaError("move_to needs 'target'");
        return MoveTo{target_from_json(j["target"])};
    }
    if (op == "grasp") {
        require_keys(j, {"op", "object"});
        if (!j.contains("object")) throw SchemaError("grasp needs 'object'");
        return Grasp{ref_from_json(j["object"])};
    }
    if (op == "release") {
        require_keys(j, {"op"});
        return Release{};
    }
    if (op == "place_on") {
        require_keys(j, {"op", "target"});
        if (!j.contains("target")) throw SchemaError("place_on needs 'target'");
        return PlaceOn{ref_from_json(j["target"])};
    }
    if (op == "avoid_region") {
        require_keys(j, {"op", "obstacle", "then"});
        if (!j.contains("obstacle") || !j.contains("then"))
            throw SchemaError("avoid_region needs 'obstacle' and 'then'");
        return AvoidRegion{ref_from_json(j["obstacle"]), target_from_json(j["then"])};
    }
    throw SchemaError("unknown op '" + op + "'");
}

}  // namespace

std::string subtasks_to_json_text(const std::vector<Subtask>& subtasks) {
    json arr = json::array();
    for (const Subtask& s : subtasks) arr.push_back(subtask_to_json(s));
    return arr.dump();
}

std::vector<Subtask> subtasks_from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("not valid JSON: ") + e.what());
    }
    if (!root.is_array()) throw SchemaError("top level must be a JSON array");
    std::vector<Subtask> out;
    out.reserve(root.size());
    for (const json& j : root) out.push_back(subtask_from_json(j));
    return out;
}

// ---------------------------------------------------------------------------
// planner interface
// ---------------------------------------------------------------------------

TaskPlan RuleBasedPlanner::plan(const std::string& instruction, const WorldSummary& world) {
    return plan_rule_based(instruction, world);
}

ReplanOutcome RuleBasedPlanner::replan(const std::string& instruction, const TaskPlan& prev,
                                       const WorldSummary& world, const FailureInfo& failure) {
    // the rule-based replanner recomputes from scratch; the failed plan and
    // cause only matter for the LLM path's prompt context
    (void)prev;
    (void)failure;
    ReplanOutcome out = replan_rule_based(parse_instruction(instruction), world);
    out.plan.instruction_hash = fnv1a64(instruction);
    return out;
}

}  // namespace manip
