#ifndef PLAN3D_PROCEDURAL_HPP_
#define PLAN3D_PROCEDURAL_HPP_

#include <string>

#include "plan3d/scene.hpp"

namespace plan3d {

// Bundled procedural test scenes. Triangle counts are fixed by construction
// and exposed so callers can sanity-check loaded copies.

// Annular building around a roofed inner court with a parapeted skylight,
// plus a ground slab. The inner facades are reachable only by descending
// through the skylight opening.
Scene make_courtyard_scene();
constexpr int kCourtyardTriangleCount = 42;

// Single unit cube centered at the origin, roi equal to its bounds.
Scene make_cube_scene();
constexpr int kCubeTriangleCount = 12;

// Axis-aligned box shell as a triangle list (12 triangles, outward normals).
std::vector<Triangle> box_triangles(const Aabb& box);

void export_scene(const Scene& scene, const std::string& mesh_path,
                  const std::string& config_path);

}  // namespace plan3d

#endif  // PLAN3D_PROCEDURAL_HPP_
