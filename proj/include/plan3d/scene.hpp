#ifndef PLAN3D_SCENE_HPP_
#define PLAN3D_SCENE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plan3d/geometry.hpp"

namespace plan3d {

struct Triangle {
    Vec3 a, b, c;

    Vec3 normal() const { return (b - a).cross(c - a).normalized(); }
    double area() const { return 0.5 * (b - a).cross(c - a).norm(); }
    Vec3 centroid() const { return (a + b + c) / 3.0; }
    Aabb bounds() const {
        return {a.cwiseMin(b).cwiseMin(c), a.cwiseMax(b).cwiseMax(c)};
    }
};

struct CameraIntrinsics {
    int width = 600;
    int height = 450;
    double focal_length = 345.0;

    CameraIntrinsics scaled(double s) const {
        return {std::max(1, int(width * s)), std::max(1, int(height * s)), focal_length * s};
    }
};

// Camera pose. Roll is fixed to zero, pitch in [-pi/2, 0]
// (0 = horizontal, -pi/2 = straight down).
struct Viewpoint {
    Vec3 position{Vec3::Zero()};
    double yaw = 0.0;
    double pitch = 0.0;

    Vec3 forward() const {
        double cp = std::cos(pitch);
        return {cp * std::cos(yaw), cp * std::sin(yaw), std::sin(pitch)};
    }
    // Right axis in world coordinates; well defined at pitch = -pi/2 because roll = 0.
    Vec3 right() const { return {-std::sin(yaw), std::cos(yaw), 0.0}; }
    Vec3 image_down() const { return right().cross(forward()); }

    // Unit ray through the center of pixel (u, v).
    Vec3 pixel_ray(int u, int v, const CameraIntrinsics& cam) const {
        double x = (u + 0.5) - 0.5 * cam.width;
        double y = (v + 0.5) - 0.5 * cam.height;
        Vec3 d = forward() * cam.focal_length + right() * x + image_down() * y;
        return d.normalized();
    }
};

struct RayHit {
    double distance = 0.0;
    int triangle_id = -1;
    Vec3 normal{Vec3::Zero()};  // oriented to face the ray origin
};

// Flat BVH over triangles for ray queries.
class TriangleBvh {
public:
    TriangleBvh() = default;
    explicit TriangleBvh(const std::vector<Triangle>& triangles);

    std::optional<RayHit> intersect(const std::vector<Triangle>& triangles,
                                    const Vec3& origin, const Vec3& direction,
                                    double max_range) const;

    bool empty() const { return nodes_.empty(); }

private:
    struct Node {
        Aabb bounds;
        int left = -1;   // child index, -1 for leaf
        int right = -1;
        int first = 0;   // leaf: range into order_
        int count = 0;
    };

    int build(const std::vector<Triangle>& triangles, int first, int count);

    std::vector<Node> nodes_;
    std::vector<int> order_;
    std::vector<Aabb> tri_bounds_;
};

struct Scene {
    std::vector<Triangle> triangles;
    Aabb roi;
    std::vector<Aabb> no_fly_zones;
    Aabb allowed_space;
    int degenerate_dropped = 0;

    TriangleBvh bvh;

    void rebuild_bvh() { bvh = TriangleBvh(triangles); }
};

struct DepthNormalImage {
    int width = 0;
    int height = 0;
    std::vector<double> depth;   // row-major, kInf for no hit
    std::vector<Vec3> normal;    // unit vectors for finite pixels
    Viewpoint pose;

    double depth_at(int u, int v) const { return depth[v * width + u]; }
    const Vec3& normal_at(int u, int v) const { return normal[v * width + u]; }
};

struct SceneConfig {
    Aabb roi;
    Aabb allowed_space;
    std::vector<Aabb> no_fly_zones;
};

// Scene loading. Mesh formats: OBJ (triangulated) and ASCII/binary PLY.
Scene load_scene(const std::string& mesh_path, const SceneConfig& config);
Scene make_scene(std::vector<Triangle> triangles, const SceneConfig& config);
std::vector<Triangle> load_mesh(const std::string& path);
void save_mesh_obj(const std::string& path, const std::vector<Triangle>& triangles);

std::optional<RayHit> ray_mesh_intersect(const Scene& scene, const Vec3& origin,
                                         const Vec3& direction, double max_range);

// Single-triangle test (Moller-Trumbore). Used by the BVH and by the
// brute-force oracles in the tests.
std::optional<double> ray_triangle_intersect(const Vec3& origin, const Vec3& direction,
                                             const Triangle& tri);

DepthNormalImage render_depth_normal(const Scene& scene, const Viewpoint& viewpoint,
                                     const CameraIntrinsics& intrinsics,
                                     int num_threads = 1);

struct GroundTruthParams {
    double max_triangle_area = 0.25;  // 0.5m x 0.5m
    int samples_per_triangle = 100;
    double resample_voxel = 0.05;
    std::uint64_t rng_seed = 1;
};

std::vector<Vec3> sample_ground_truth_points(const Scene& scene,
                                             const GroundTruthParams& params);

// Point cloud output.
void save_point_cloud_ply(const std::string& path, const std::vector<Vec3>& points);
void save_point_cloud_xyz(const std::string& path, const std::vector<Vec3>& points);
std::vector<Vec3> load_point_cloud_xyz(const std::string& path);

}  // namespace plan3d

#endif  // PLAN3D_SCENE_HPP_
