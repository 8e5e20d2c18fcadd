#include "manip/gae.hpp"

#include <string>

#include "manip/errors.hpp"

namespace manip {

GaeResult compute_gae(const std::vector<double>& rewards, const std::vector<double>& values,
                      const std::vector<bool>& dones, double gamma, double lambda) {
    const std::size_t t_max = rewards.size();
    if (values.size() != t_max + 1)
        throw LengthMismatch("values must have " + std::to_string(t_max + 1) + " entries, got " +
                             std::to_string(values.size()));
    if (dones.size() != t_max)
        throw LengthMismatch("dones must have " + std::to_string(t_max) + " entries, got " +
                             std::to_string(dones.size()));

    GaeResult out;
    out.advantages.resize(t_max);
    out.returns.resize(t_max);
    double running = 0.0;
    for (std::size_t t = t_max; t-- > 0;) {
        const double mask = dones[t] ? 0.0 : 1.0;
        const double delta = rewards[t] + gamma * values[t + 1] * mask - values[t];
        running = delta + gamma * lambda * mask * running;
        out.advantages[t] = running;
        out.returns[t] = running + values[t];
    }
    return out;
}

}  // namespace manip
