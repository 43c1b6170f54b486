#ifndef PLAN3D_GEOMETRY_HPP_
#define PLAN3D_GEOMETRY_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace plan3d {

using Vec3 = Eigen::Vector3d;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Axis-aligned box in meters.
struct Aabb {
    Vec3 min{Vec3::Zero()};
    Vec3 max{Vec3::Zero()};

    static Aabb from_center(const Vec3& center, const Vec3& half_extents) {
        return {center - half_extents, center + half_extents};
    }

    Vec3 center() const { return 0.5 * (min + max); }
    Vec3 extents() const { return max - min; }

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }

    bool contains(const Aabb& other) const {
        return (other.min.array() >= min.array()).all() &&
               (other.max.array() <= max.array()).all();
    }

    bool intersects(const Aabb& other) const {
        return (min.array() <= other.max.array()).all() &&
               (max.array() >= other.min.array()).all();
    }

    // Euclidean distance from p to the box, 0 if inside.
    double distance(const Vec3& p) const {
        Vec3 d = (min - p).cwiseMax(Vec3::Zero()).cwiseMax(p - max);
        return d.norm();
    }

    Aabb expanded(double margin) const {
        Vec3 m(margin, margin, margin);
        return {min - m, max + m};
    }

    Aabb united(const Aabb& other) const {
        return {min.cwiseMin(other.min), max.cwiseMax(other.max)};
    }
};

inline double wrap_angle(double a) {
    while (a > M_PI) a -= 2.0 * M_PI;
    while (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

}  // namespace plan3d

#endif  // PLAN3D_GEOMETRY_HPP_
