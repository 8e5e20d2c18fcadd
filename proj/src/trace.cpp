#include "manip/trace.hpp"

#include <json.hpp>

#include "manip/errors.hpp"

namespace manip {

using nlohmann::json;

const char* to_string(GripCmd g) {
    switch (g) {
        case GripCmd::open: return "open";
        case GripCmd::close: return "close";
        case GripCmd::hold: return "hold";
    }
    return "?";
}

GripCmd grip_from_string(const std::string& s) {
    if (s == "open") return GripCmd::open;
    if (s == "close") return GripCmd::close;
    if (s == "hold") return GripCmd::hold;
    throw Error("unknown grip command '" + s + "'");
}

std::string env_trace_line(int step_index, const Action& action, const StepResult& result) {
    json j;
    j["step"] = step_index;
    j["action"] = {{"delta", {action.delta.x, action.delta.y, action.delta.z}},
                   {"grip", to_string(action.grip)}};
    j["obs"] = result.obs;
    j["reward"] = result.reward;
    j["done"] = result.done;
    j["collision"] = result.info.collision;
    j["goal"] = result.info.goal;
    j["perturbed"] = result.info.perturbed_ids;
    return j.dump();
}

}  // namespace manip
