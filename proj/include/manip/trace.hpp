#pragma once

#include <string>
#include <vector>

#include "manip/env.hpp"

namespace manip {

const char* to_string(GripCmd g);
GripCmd grip_from_string(const std::string& s);

// One line-delimited JSON record per step: step index, action, observation,
// reward, done. Concatenated lines form the episode trace used by the
// golden-file determinism checks.
std::string env_trace_line(int step_index, const Action& action, const StepResult& result);

}  // namespace manip
