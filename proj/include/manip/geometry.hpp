#pragma once

#include <algorithm>
#include <cmath>

namespace manip {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double norm_xy() const { return std::sqrt(x * x + y * y); }
};

using Pose = Vec3;

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }
inline double distance_xy(const Vec3& a, const Vec3& b) { return (a - b).norm_xy(); }

inline Vec3 clamp_components(const Vec3& v, double lo, double hi) {
    return {std::clamp(v.x, lo, hi), std::clamp(v.y, lo, hi), std::clamp(v.z, lo, hi)};
}

struct WorkspaceBounds {
    Vec3 min;
    Vec3 max;

    bool valid() const { return min.x < max.x && min.y < max.y && min.z < max.z; }

    bool contains(const Vec3& p, double eps = 1e-12) const {
        return p.x >= min.x - eps && p.x <= max.x + eps && p.y >= min.y - eps &&
               p.y <= max.y + eps && p.z >= min.z - eps && p.z <= max.z + eps;
    }

    Vec3 clamp(const Vec3& p) const {
        return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y),
                std::clamp(p.z, min.z, max.z)};
    }

    Vec3 center() const { return (min + max) * 0.5; }
};

// Axis-aligned box given by center and a single half extent.
struct Aabb {
    Vec3 center;
    double half = 0.0;

    bool contains(const Vec3& p, double inflate = 0.0) const {
        const double h = half + inflate;
        return std::abs(p.x - center.x) <= h && std::abs(p.y - center.y) <= h &&
               std::abs(p.z - center.z) <= h;
    }

    double top() const { return center.z + half; }

    bool footprint_contains(const Vec3& p, double inflate = 0.0) const {
        const double h = half + inflate;
        return std::abs(p.x - center.x) <= h && std::abs(p.y - center.y) <= h;
    }
};

// Slab test, segment from a to b against an inflated box.
bool segment_hits_aabb(const Vec3& a, const Vec3& b, const Aabb& box, double inflate);

}  // namespace manip
