#include "manip/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "manip/errors.hpp"

namespace manip {

using nlohmann::json;

const char* to_string(Shape s) {
    switch (s) {
        case Shape::cube: return "cube";
        case Shape::sphere: return "sphere";
        case Shape::platform: return "platform";
        case Shape::obstacle: return "obstacle";
    }
    return "?";
}

const char* to_string(Color c) {
    switch (c) {
        case Color::red: return "red";
        case Color::green: return "green";
        case Color::blue: return "blue";
        case Color::yellow: return "yellow";
    }
    return "?";
}

Shape shape_from_string(const std::string& s) {
    if (s == "cube") return Shape::cube;
    if (s == "sphere") return Shape::sphere;
    if (s == "platform") return Shape::platform;
    if (s == "obstacle") return Shape::obstacle;
    throw InvalidScenario("unknown shape '" + s + "'");
}

Color color_from_string(const std::string& s) {
    if (s == "red") return Color::red;
    if (s == "green") return Color::green;
    if (s == "blue") return Color::blue;
    if (s == "yellow") return Color::yellow;
    throw InvalidScenario("unknown color '" + s + "'");
}

const ObjectSpec* ScenarioSpec::find(const std::string& id) const {
    for (const auto& o : objects)
        if (o.id == id) return &o;
    return nullptr;
}

void ScenarioSpec::validate() const {
    if (name.empty()) throw InvalidScenario("empty name");
    if (!bounds.valid()) throw InvalidScenario("degenerate workspace bounds");
    if (max_steps <= 0) throw InvalidScenario("max_steps must be positive");
    if (sim_dt <= 0.0) throw InvalidScenario("sim_dt must be positive");
    if (!bounds.contains(ee_start)) throw InvalidScenario("ee_start outside bounds");

    std::set<std::string> ids;
    for (const auto& o : objects) {
        if (o.id.empty()) throw InvalidScenario("object with empty id");
        if (!ids.insert(o.id).second) throw InvalidScenario("duplicate object id '" + o.id + "'");
        if (o.half_extent <= 0.0)
            throw InvalidScenario("object '" + o.id + "' has non-positive half_extent");
        if (!bounds.contains(o.pose))
            throw InvalidScenario("object '" + o.id + "' outside bounds");
        if (o.graspable && (o.shape == Shape::platform || o.shape == Shape::obstacle))
            throw InvalidScenario("object '" + o.id + "' cannot be graspable");
    }

    if (start_holding) {
        const ObjectSpec* held = find(*start_holding);
        if (!held) throw InvalidScenario("start_holding references unknown object");
        if (!held->graspable) throw InvalidScenario("start_holding references ungraspable object");
    }

    for (const auto& p : perturbations) {
        if (p.at_step < 0 || p.at_step >= max_steps)
            throw InvalidScenario("perturbation at_step outside the episode");
        if (!find(p.object_id))
            throw InvalidScenario("perturbation references unknown object '" + p.object_id + "'");
        if (!bounds.contains(p.new_pose))
            throw InvalidScenario("perturbation target pose outside bounds");
    }

    // Goal references must resolve.
    struct Checker {
        const ScenarioSpec& s;
        void operator()(const EeNear& g) const {
            if (g.tol <= 0.0) throw InvalidScenario("goal tolerance must be positive");
            if (!s.bounds.contains(g.target)) throw InvalidScenario("goal target outside bounds");
        }
        void operator()(const ObjectOn& g) const {
            if (g.tol <= 0.0) throw InvalidScenario("goal tolerance must be positive");
            const ObjectSpec* obj = s.find(g.object_id);
            const ObjectSpec* plat = s.find(g.platform_id);
            if (!obj || !plat) throw InvalidScenario("goal references unknown object");
            if (plat->shape != Shape::platform)
                throw InvalidScenario("goal target '" + g.platform_id + "' is not a platform");
        }
        void operator()(const Holding& g) const {
            const ObjectSpec* obj = s.find(g.object_id);
            if (!obj) throw InvalidScenario("goal references unknown object");
            if (!obj->graspable) throw InvalidScenario("goal object is not graspable");
        }
        void operator()(const NotHolding&) const {}
        void operator()(const Sorted& g) const {
            if (g.tol <= 0.0) throw InvalidScenario("goal tolerance must be positive");
            if (g.platform_for_color.empty()) throw InvalidScenario("empty sort mapping");
            for (const auto& [color, plat_id] : g.platform_for_color) {
                const ObjectSpec* plat = s.find(plat_id);
                if (!plat || plat->shape != Shape::platform)
                    throw InvalidScenario("sort mapping for " + std::string(to_string(color)) +
                                          " is not a platform");
            }
        }
    };
    std::visit(Checker{*this}, goal);
}

namespace {

json pose_to_json(const Pose& p) { return json::array({p.x, p.y, p.z}); }

Pose pose_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw InvalidScenario("pose must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json goal_to_json(const GoalPredicate& goal) {
    json j;
    struct Writer {
        json& j;
        void operator()(const EeNear& g) {
            j["kind"] = "ee_near";
            j["target"] = pose_to_json(g.target);
            j["tol"] = g.tol;
        }
        void operator()(const ObjectOn& g) {
            j["kind"] = "object_on";
            j["object"] = g.object_id;
            j["platform"] = g.platform_id;
            j["tol"] = g.tol;
        }
        void operator()(const Holding& g) {
            j["kind"] = "holding";
            j["object"] = g.object_id;
        }
        void operator()(const NotHolding&) { j["kind"] = "not_holding"; }
        void operator()(const Sorted& g) {
            j["kind"] = "sorted";
            j["tol"] = g.tol;
            json m = json::object();
            for (const auto& [color, plat] : g.platform_for_color) m[to_string(color)] = plat;
            j["platform_for_color"] = m;
        }
    };
    std::visit(Writer{j}, goal);
    return j;
}

GoalPredicate goal_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "ee_near") {
        EeNear g;
        g.target = pose_from_json(j.at("target"));
        g.tol = j.at("tol").get<double>();
        return g;
    }
    if (kind == "object_on") {
        ObjectOn g;
        g.object_id = j.at("object").get<std::string>();
        g.platform_id = j.at("platform").get<std::string>();
        g.tol = j.at("tol").get<double>();
        return g;
    }
    if (kind == "holding") return Holding{j.at("object").get<std::string>()};
    if (kind == "not_holding") return NotHolding{};
    if (kind == "sorted") {
        Sorted g;
        g.tol = j.at("tol").get<double>();
        for (const auto& [key, value] : j.at("platform_for_color").items())
            g.platform_for_color[color_from_string(key)] = value.get<std::string>();
        return g;
    }
    throw InvalidScenario("unknown goal kind '" + kind + "'");
}

}  // namespace

std::string scenario_to_json_text(const ScenarioSpec& spec) {
    json j;
    j["name"] = spec.name;
    j["bounds"] = {{"min", pose_to_json(spec.bounds.min)}, {"max", pose_to_json(spec.bounds.max)}};
    j["ee_start"] = pose_to_json(spec.ee_start);
    if (spec.start_holding) j["start_holding"] = *spec.start_holding;
    json objs = json::array();
    for (const auto& o : spec.objects) {
        json jo;
        jo["id"] = o.id;
        jo["shape"] = to_string(o.shape);
        jo["color"] = to_string(o.color);
        jo["half_extent"] = o.half_extent;
        jo["pose"] = pose_to_json(o.pose);
        jo["graspable"] = o.graspable;
        objs.push_back(jo);
    }
    j["objects"] = objs;
    j["goal"] = goal_to_json(spec.goal);
    j["max_steps"] = spec.max_steps;
    json perts = json::array();
    for (const auto& p : spec.perturbations) {
        perts.push_back({{"at_step", p.at_step},
                         {"object", p.object_id},
                         {"new_pose", pose_to_json(p.new_pose)}});
    }
    j["perturbations"] = perts;
    j["sim_dt"] = spec.sim_dt;
    return j.dump(2) + "\n";
}

ScenarioSpec scenario_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidScenario(std::string("bad scenario file: ") + e.what());
    }
    ScenarioSpec spec;
    try {
        spec.name = j.at("name").get<std::string>();
        spec.bounds.min = pose_from_json(j.at("bounds").at("min"));
        spec.bounds.max = pose_from_json(j.at("bounds").at("max"));
        spec.ee_start = pose_from_json(j.at("ee_start"));
        if (j.contains("start_holding")) spec.start_holding = j["start_holding"].get<std::string>();
        for (const auto& jo : j.at("objects")) {
            ObjectSpec o;
            o.id = jo.at("id").get<std::string>();
            o.shape = shape_from_string(jo.at("shape").get<std::string>());
            o.color = color_from_string(jo.at("color").get<std::string>());
            o.half_extent = jo.at("half_extent").get<double>();
            o.pose = pose_from_json(jo.at("pose"));
            o.graspable = jo.at("graspable").get<bool>();
            spec.objects.push_back(o);
        }
        spec.goal = goal_from_json(j.at("goal"));
        spec.max_steps = j.at("max_steps").get<int>();
        if (j.contains("perturbations")) {
            for (const auto& jp : j["perturbations"]) {
                Perturbation p;
                p.at_step = jp.at("at_step").get<int>();
                p.object_id = jp.at("object").get<std::string>();
                p.new_pose = pose_from_json(jp.at("new_pose"));
                spec.perturbations.push_back(p);
            }
        }
        if (j.contains("sim_dt")) spec.sim_dt = j["sim_dt"].get<double>();
    } catch (const json::exception& e) {
        throw InvalidScenario(std::string("bad scenario file: ") + e.what());
    }
    spec.validate();
    return spec;
}

ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidScenario("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return scenario_from_json_text(buf.str());
}

void save_scenario(const ScenarioSpec& spec, const std::string& path) {
    spec.validate();
    std::ofstream out(path);
    if (!out) throw InvalidScenario("cannot write '" + path + "'");
    out << scenario_to_json_text(spec);
}

}  // namespace manip
