#pragma once

#include <vector>

namespace manip {

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;  // advantages + values
};

// Lambda-weighted advantage estimates over a trajectory batch laid out as
// flat arrays. values carries one extra trailing entry, the bootstrap value
// of the state after the last transition. A done at t masks all bootstrapping
// across the t -> t+1 boundary:
//   delta_t = r_t + gamma * values[t+1] * (1 - done_t) - values[t]
//   A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// Throws LengthMismatch unless |values| == |rewards| + 1 == |dones| + 1.
GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda);

}  // namespace manip
