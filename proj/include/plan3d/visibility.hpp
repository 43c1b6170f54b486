#ifndef PLAN3D_VISIBILITY_HPP_
#define PLAN3D_VISIBILITY_HPP_

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "plan3d/occupancy.hpp"
#include "plan3d/scene.hpp"

namespace plan3d {

struct InformationParams {
    double xi = 0.25;                 // discount factor, encourages ~1/xi views per voxel
    double beta_i_threshold = 25.0;   // degrees
    double beta_i_falloff = 1.0 / 25.0;   // 1/degrees
    double beta_r_threshold = 6.0;    // pixels
    double beta_r_falloff = 1.0 / 3.0;    // 1/pixels
    double crease_distance = 0.5;     // meters
    double crease_fallback_vi_i = 0.2;
    double focal_length = 345.0;      // pixels, for the projected-size factor
    double max_ray_range = 200.0;     // meters, cap for occupancy ray marching
};

using VoxelKeySet = std::unordered_set<VoxelKey, VoxelKeyHash>;

struct ViewpointObservation {
    int viewpoint_id = -1;
    std::unordered_map<VoxelKey, double, VoxelKeyHash> entries;  // voxel -> vi
    VoxelKeySet lowres_set;
};

struct VisibleVoxel {
    VoxelKey key;
    Vec3 ray_direction;   // unit, camera to voxel
    double hit_distance;  // camera to voxel entry point
    int pixel_u = 0;
    int pixel_v = 0;
};

// One ray per pixel center; each ray marches through the map and stops at the
// first non-free voxel. Voxels outside the roi are discarded; duplicates are
// merged keeping the closest hit.
std::vector<VisibleVoxel> visible_voxels(const OccupancyMap& map, const Viewpoint& viewpoint,
                                         const CameraIntrinsics& intrinsics, const Aabb& roi,
                                         const InformationParams& params);

// Eq-style per voxel-viewpoint information: vi = (1/xi) * vi_i * vi_r.
double voxel_information(const Vec3& voxel_center, const Viewpoint& viewpoint,
                         const Vec3* normal, const double* mesh_distance,
                         double voxel_size, const InformationParams& params);

double incidence_factor(double gamma_degrees, const InformationParams& params);
double resolution_factor(double pixels, const InformationParams& params);
double projected_pixels(double distance, double voxel_size, const InformationParams& params);

ViewpointObservation compute_observation(const Scene& normal_mesh, const OccupancyMap& map,
                                         const Viewpoint& viewpoint,
                                         const CameraIntrinsics& intrinsics,
                                         const CameraIntrinsics& lowres_intrinsics,
                                         const InformationParams& params);

// Same ray march as visible_voxels at reduced resolution, without roi clipping.
VoxelKeySet lowres_observation_set(const OccupancyMap& map, const Viewpoint& viewpoint,
                                   const CameraIntrinsics& lowres_intrinsics,
                                   const InformationParams& params);

bool matchable(const VoxelKeySet& obs1, const VoxelKeySet& obs2, double alpha = 0.4);

// Binary observation cache so graph construction can resume without
// re-ray-casting.
void save_observations(const std::vector<ViewpointObservation>& observations,
                       const std::string& path);
std::vector<ViewpointObservation> load_observations(const std::string& path);

}  // namespace plan3d

#endif  // PLAN3D_VISIBILITY_HPP_
