#include "manip/geometry.hpp"

#include <limits>

namespace manip {

bool segment_hits_aabb(const Vec3& a, const Vec3& b, const Aabb& box, double inflate) {
    const double h = box.half + inflate;
    const double lo[3] = {box.center.x - h, box.center.y - h, box.center.z - h};
    const double hi[3] = {box.center.x + h, box.center.y + h, box.center.z + h};
    const double p[3] = {a.x, a.y, a.z};
    const double d[3] = {b.x - a.x, b.y - a.y, b.z - a.z};

    double tmin = 0.0;
    double tmax = 1.0;
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < 1e-15) {
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
            continue;
        }
        double t1 = (lo[i] - p[i]) / d[i];
        double t2 = (hi[i] - p[i]) / d[i];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) return false;
    }
    return true;
}

}  // namespace manip
