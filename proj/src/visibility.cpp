#include "plan3d/visibility.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace plan3d {

namespace {

// Marches a single ray through the map and returns the first non-free voxel
// together with the distance at which the ray entered it.
struct MarchHit {
    VoxelKey key;
    double distance;
};

std::optional<MarchHit> march_first_non_free(const OccupancyMap& map, const Vec3& origin,
                                             const Vec3& direction, double max_range) {
    const double vs = map.voxel_size();
    VoxelKey key = map.key_of(origin);
    std::int32_t step[3];
    double t_max[3], t_delta[3];
    std::int32_t idx[3] = {key.ix, key.iy, key.iz};
    for (int i = 0; i < 3; ++i) {
        if (direction[i] > 0.0) {
            step[i] = 1;
            t_max[i] = ((idx[i] + 1) * vs - origin[i]) / direction[i];
            t_delta[i] = vs / direction[i];
        } else if (direction[i] < 0.0) {
            step[i] = -1;
            t_max[i] = (idx[i] * vs - origin[i]) / direction[i];
            t_delta[i] = -vs / direction[i];
        } else {
            step[i] = 0;
            t_max[i] = kInf;
            t_delta[i] = kInf;
        }
    }
    double t = 0.0;
    while (t <= max_range) {
        VoxelKey current{idx[0], idx[1], idx[2]};
        if (map.classify(current) != VoxelClass::Free) {
            // Leaving the mapped volume is no return, not a surface: the
            // bounds are administrative, only in-bounds voxels are
            // observations.
            if (map.bounds() && !map.bounds()->contains(map.center_of(current)))
                return std::nullopt;
            return MarchHit{current, t};
        }
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        t = t_max[axis];
        idx[axis] += step[axis];
        t_max[axis] += t_delta[axis];
    }
    return std::nullopt;
}

}  // namespace

double incidence_factor(double gamma_degrees, const InformationParams& params) {
    return std::exp(-params.beta_i_falloff * std::max(gamma_degrees - params.beta_i_threshold, 0.0));
}

double resolution_factor(double pixels, const InformationParams& params) {
    return std::exp(-params.beta_r_falloff * std::max(pixels - params.beta_r_threshold, 0.0));
}

double projected_pixels(double distance, double voxel_size, const InformationParams& params) {
    return params.focal_length * voxel_size / distance;
}

double voxel_information(const Vec3& voxel_center, const Viewpoint& viewpoint,
                         const Vec3* normal, const double* mesh_distance,
                         double voxel_size, const InformationParams& params) {
    double distance = (voxel_center - viewpoint.position).norm();
    double vi_i;
    bool crease = normal == nullptr ||
                  (mesh_distance != nullptr &&
                   std::abs(*mesh_distance - distance) >= params.crease_distance);
    if (crease) {
        vi_i = params.crease_fallback_vi_i;
    } else {
        Vec3 to_camera = (viewpoint.position - voxel_center).normalized();
        double c = std::clamp(to_camera.dot(*normal), -1.0, 1.0);
        double gamma = std::acos(c) * 180.0 / M_PI;
        vi_i = incidence_factor(gamma, params);
    }
    double px = projected_pixels(distance, voxel_size, params);
    return (1.0 / params.xi) * vi_i * resolution_factor(px, params);
}

std::vector<VisibleVoxel> visible_voxels(const OccupancyMap& map, const Viewpoint& viewpoint,
                                         const CameraIntrinsics& intrinsics, const Aabb& roi,
                                         const InformationParams& params) {
    std::unordered_map<VoxelKey, VisibleVoxel, VoxelKeyHash> merged;
    for (int v = 0; v < intrinsics.height; ++v) {
        for (int u = 0; u < intrinsics.width; ++u) {
            Vec3 dir = viewpoint.pixel_ray(u, v, intrinsics);
            auto hit = march_first_non_free(map, viewpoint.position, dir, params.max_ray_range);
            if (!hit) continue;
            if (!roi.contains(map.center_of(hit->key))) continue;
            auto it = merged.find(hit->key);
            if (it == merged.end() || hit->distance < it->second.hit_distance)
                merged[hit->key] = {hit->key, dir, hit->distance, u, v};
        }
    }
    std::vector<VisibleVoxel> out;
    out.reserve(merged.size());
    for (auto& [key, vv] : merged) out.push_back(vv);
    std::sort(out.begin(), out.end(),
              [](const VisibleVoxel& a, const VisibleVoxel& b) { return a.key < b.key; });
    return out;
}

ViewpointObservation compute_observation(const Scene& normal_mesh, const OccupancyMap& map,
                                         const Viewpoint& viewpoint,
                                         const CameraIntrinsics& intrinsics,
                                         const CameraIntrinsics& lowres_intrinsics,
                                         const InformationParams& params) {
    ViewpointObservation obs;
    for (int v = 0; v < intrinsics.height; ++v) {
        for (int u = 0; u < intrinsics.width; ++u) {
            Vec3 dir = viewpoint.pixel_ray(u, v, intrinsics);
            auto hit = march_first_non_free(map, viewpoint.position, dir, params.max_ray_range);
            if (!hit) continue;
            Vec3 center = map.center_of(hit->key);
            if (!normal_mesh.roi.contains(center)) continue;

            auto mesh_hit = ray_mesh_intersect(normal_mesh, viewpoint.position, dir, kInf);
            double vi;
            if (mesh_hit) {
                double voxel_distance = (center - viewpoint.position).norm();
                double mesh_distance = mesh_hit->distance;
                if (std::abs(mesh_distance - voxel_distance) >= params.crease_distance) {
                    vi = voxel_information(center, viewpoint, nullptr, nullptr,
                                           map.voxel_size(), params);
                } else {
                    vi = voxel_information(center, viewpoint, &mesh_hit->normal, &mesh_distance,
                                           map.voxel_size(), params);
                }
            } else {
                vi = voxel_information(center, viewpoint, nullptr, nullptr, map.voxel_size(),
                                       params);
            }
            auto it = obs.entries.find(hit->key);
            if (it == obs.entries.end() || vi > it->second) obs.entries[hit->key] = vi;
        }
    }
    obs.lowres_set = lowres_observation_set(map, viewpoint, lowres_intrinsics, params);
    return obs;
}

VoxelKeySet lowres_observation_set(const OccupancyMap& map, const Viewpoint& viewpoint,
                                   const CameraIntrinsics& lowres_intrinsics,
                                   const InformationParams& params) {
    VoxelKeySet set;
    for (int v = 0; v < lowres_intrinsics.height; ++v) {
        for (int u = 0; u < lowres_intrinsics.width; ++u) {
            Vec3 dir = viewpoint.pixel_ray(u, v, lowres_intrinsics);
            if (auto hit = march_first_non_free(map, viewpoint.position, dir,
                                                params.max_ray_range))
                set.insert(hit->key);
        }
    }
    return set;
}

bool matchable(const VoxelKeySet& obs1, const VoxelKeySet& obs2, double alpha) {
    const VoxelKeySet& small = obs1.size() <= obs2.size() ? obs1 : obs2;
    const VoxelKeySet& large = obs1.size() <= obs2.size() ? obs2 : obs1;
    size_t overlap = 0;
    for (const auto& k : small)
        if (large.count(k)) ++overlap;
    return double(overlap) >= alpha * double(obs1.size() + obs2.size()) / 2.0;
}

namespace {
constexpr char kObsMagic[8] = {'P', '3', 'D', 'O', 'B', 'S', 'V', '1'};

void write_key(std::ostream& out, const VoxelKey& k) {
    out.write(reinterpret_cast<const char*>(&k.ix), 4);
    out.write(reinterpret_cast<const char*>(&k.iy), 4);
    out.write(reinterpret_cast<const char*>(&k.iz), 4);
}

VoxelKey read_key(std::istream& in) {
    VoxelKey k;
    in.read(reinterpret_cast<char*>(&k.ix), 4);
    in.read(reinterpret_cast<char*>(&k.iy), 4);
    in.read(reinterpret_cast<char*>(&k.iz), 4);
    return k;
}
}  // namespace

void save_observations(const std::vector<ViewpointObservation>& observations,
                       const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write observation cache: " + path);
    out.write(kObsMagic, 8);
    std::uint64_t n = observations.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& obs : observations) {
        std::int32_t id = obs.viewpoint_id;
        out.write(reinterpret_cast<const char*>(&id), 4);
        std::uint32_t count = std::uint32_t(obs.entries.size());
        out.write(reinterpret_cast<const char*>(&count), 4);
        std::vector<std::pair<VoxelKey, double>> entries(obs.entries.begin(), obs.entries.end());
        std::sort(entries.begin(), entries.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [key, vi] : entries) {
            write_key(out, key);
            float f = float(vi);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
        std::uint32_t lcount = std::uint32_t(obs.lowres_set.size());
        out.write(reinterpret_cast<const char*>(&lcount), 4);
        std::vector<VoxelKey> low(obs.lowres_set.begin(), obs.lowres_set.end());
        std::sort(low.begin(), low.end());
        for (const auto& key : low) write_key(out, key);
    }
}

std::vector<ViewpointObservation> load_observations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open observation cache: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, kObsMagic, 8) != 0)
        throw std::runtime_error("observation cache: bad magic");
    std::uint64_t n;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<ViewpointObservation> out(n);
    for (auto& obs : out) {
        std::int32_t id;
        in.read(reinterpret_cast<char*>(&id), 4);
        obs.viewpoint_id = id;
        std::uint32_t count;
        in.read(reinterpret_cast<char*>(&count), 4);
        for (std::uint32_t i = 0; i < count; ++i) {
            VoxelKey key = read_key(in);
            float f;
            in.read(reinterpret_cast<char*>(&f), 4);
            obs.entries[key] = f;
        }
        std::uint32_t lcount;
        in.read(reinterpret_cast<char*>(&lcount), 4);
        for (std::uint32_t i = 0; i < lcount; ++i) obs.lowres_set.insert(read_key(in));
    }
    return out;
}

}  // namespace plan3d
