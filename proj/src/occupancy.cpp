#include "plan3d/occupancy.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace plan3d {

std::vector<VoxelKey> traverse_ray(const OccupancyMap& map, const Vec3& origin,
                                   const Vec3& direction, double length) {
    // Amanatides & Woo style incremental traversal.
    const double vs = map.voxel_size();
    VoxelKey key = map.key_of(origin);
    std::vector<VoxelKey> out;
    out.push_back(key);
    if (length <= 0.0) return out;

    std::int32_t step[3];
    double t_max[3], t_delta[3];
    std::int32_t idx[3] = {key.ix, key.iy, key.iz};
    for (int i = 0; i < 3; ++i) {
        if (direction[i] > 0.0) {
            step[i] = 1;
            double boundary = (idx[i] + 1) * vs;
            t_max[i] = (boundary - origin[i]) / direction[i];
            t_delta[i] = vs / direction[i];
        } else if (direction[i] < 0.0) {
            step[i] = -1;
            double boundary = idx[i] * vs;
            t_max[i] = (boundary - origin[i]) / direction[i];
            t_delta[i] = -vs / direction[i];
        } else {
            step[i] = 0;
            t_max[i] = kInf;
            t_delta[i] = kInf;
        }
    }

    double t = 0.0;
    while (true) {
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        t = t_max[axis];
        if (t > length) break;
        idx[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        out.push_back({idx[0], idx[1], idx[2]});
    }
    return out;
}

namespace {

// Distance at which the ray leaves the (convex) bounds for good; carving
// beyond it is pointless because out-of-bounds voxels always read Occupied.
double bounds_exit_distance(const Aabb& bounds, const Vec3& origin, const Vec3& direction) {
    double exit = kInf;
    for (int i = 0; i < 3; ++i) {
        if (direction[i] > 0.0)
            exit = std::min(exit, (bounds.max[i] - origin[i]) / direction[i]);
        else if (direction[i] < 0.0)
            exit = std::min(exit, (bounds.min[i] - origin[i]) / direction[i]);
    }
    return std::max(exit, 0.0);
}

}  // namespace

void integrate_depth_map(OccupancyMap& map, const DepthNormalImage& image,
                         const CameraIntrinsics& intrinsics, double max_range) {
    // Each voxel is updated at most once per depth map; hit wins over miss.
    std::unordered_set<VoxelKey, VoxelKeyHash> hits;
    std::unordered_set<VoxelKey, VoxelKeyHash> misses;
    const Vec3 origin = image.pose.position;
    for (int v = 0; v < image.height; ++v) {
        for (int u = 0; u < image.width; ++u) {
            double d = image.depth_at(u, v);
            Vec3 dir = image.pose.pixel_ray(u, v, intrinsics);
            double carve_limit = max_range;
            if (map.bounds())
                carve_limit = std::min(carve_limit, bounds_exit_distance(*map.bounds(), origin, dir));
            if (std::isfinite(d) && d <= max_range) {
                auto keys = traverse_ray(map, origin, dir, std::min(d, carve_limit));
                VoxelKey endpoint = map.key_of(origin + d * dir);
                for (const auto& k : keys)
                    if (!(k == endpoint)) misses.insert(k);
                if (d <= carve_limit + map.voxel_size()) hits.insert(endpoint);
            } else {
                auto keys = traverse_ray(map, origin, dir, carve_limit);
                misses.insert(keys.begin(), keys.end());
            }
        }
    }
    // Voxels outside the configured bounds always read Occupied, so skip
    // storing them.
    auto in_bounds = [&](const VoxelKey& k) {
        return !map.bounds() || map.bounds()->contains(map.center_of(k));
    };
    for (const auto& k : hits)
        if (in_bounds(k)) map.update_hit(k);
    for (const auto& k : misses)
        if (!hits.count(k) && in_bounds(k)) map.update_miss(k);
}

void carve_free_box(OccupancyMap& map, const Aabb& box) {
    VoxelKey lo = map.key_of(box.min);
    VoxelKey hi = map.key_of(box.max);
    for (std::int32_t x = lo.ix; x <= hi.ix; ++x)
        for (std::int32_t y = lo.iy; y <= hi.iy; ++y)
            for (std::int32_t z = lo.iz; z <= hi.iz; ++z) {
                VoxelKey key{x, y, z};
                if (map.bounds() && !map.bounds()->contains(map.center_of(key))) continue;
                map.add_log_odds(key, -kInf);  // clamps to clamp_min
            }
}

namespace {

// Key range of voxels intersecting the box. A box face exactly on a voxel
// boundary does not pull in the next layer.
void box_key_range(const OccupancyMap& map, const Aabb& box, VoxelKey& lo, VoxelKey& hi) {
    const double vs = map.voxel_size();
    lo = map.key_of(box.min);
    hi = map.key_of(box.max);
    if (hi.ix * vs == box.max.x() && hi.ix > lo.ix) --hi.ix;
    if (hi.iy * vs == box.max.y() && hi.iy > lo.iy) --hi.iy;
    if (hi.iz * vs == box.max.z() && hi.iz > lo.iz) --hi.iz;
}

}  // namespace

bool is_free_box(const OccupancyMap& map, const Aabb& box) {
    if (map.bounds() && !map.bounds()->contains(box)) return false;
    VoxelKey lo, hi;
    box_key_range(map, box, lo, hi);
    for (std::int32_t x = lo.ix; x <= hi.ix; ++x)
        for (std::int32_t y = lo.iy; y <= hi.iy; ++y)
            for (std::int32_t z = lo.iz; z <= hi.iz; ++z)
                if (map.occupancy({x, y, z}) > map.params().oc_free) return false;
    return true;
}

bool is_free_segment(const OccupancyMap& map, const Vec3& a, const Vec3& b,
                     const Vec3& box_half_extents, double step) {
    // Same result as calling is_free_box at every sample position, but each
    // voxel in the heavily overlapping boxes is inspected only once.
    double len = (b - a).norm();
    int n = std::max(1, int(std::ceil(len / step)));
    std::unordered_set<VoxelKey, VoxelKeyHash> checked;
    for (int i = 0; i <= n; ++i) {
        Vec3 p = a + (b - a) * (double(i) / n);
        Aabb box = Aabb::from_center(p, box_half_extents);
        if (map.bounds() && !map.bounds()->contains(box)) return false;
        VoxelKey lo, hi;
        box_key_range(map, box, lo, hi);
        for (std::int32_t x = lo.ix; x <= hi.ix; ++x)
            for (std::int32_t y = lo.iy; y <= hi.iy; ++y)
                for (std::int32_t z = lo.iz; z <= hi.iz; ++z) {
                    VoxelKey key{x, y, z};
                    if (!checked.insert(key).second) continue;
                    if (map.occupancy(key) > map.params().oc_free) return false;
                }
    }
    return true;
}

ClassHistogram class_histogram(const OccupancyMap& map) {
    ClassHistogram h;
    for (const auto& [key, lo] : map.cells()) {
        switch (map.classify(key)) {
            case VoxelClass::Free: ++h.free; break;
            case VoxelClass::Occupied: ++h.occupied; break;
            case VoxelClass::Unknown: ++h.unknown; break;
        }
    }
    return h;
}

namespace {
constexpr char kMagic[8] = {'P', '3', 'D', 'O', 'M', 'A', 'P', '1'};
}

void save_occupancy_map(const OccupancyMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write map: " + path);
    out.write(kMagic, 8);
    std::uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    float vs = float(map.voxel_size());
    out.write(reinterpret_cast<const char*>(&vs), 4);
    std::uint64_t count = map.cells().size();
    out.write(reinterpret_cast<const char*>(&count), 8);

    // Sorted record order keeps the file byte-stable across runs.
    std::vector<std::pair<VoxelKey, double>> cells(map.cells().begin(), map.cells().end());
    std::sort(cells.begin(), cells.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [key, log_odds] : cells) {
        out.write(reinterpret_cast<const char*>(&key.ix), 4);
        out.write(reinterpret_cast<const char*>(&key.iy), 4);
        out.write(reinterpret_cast<const char*>(&key.iz), 4);
        float l = float(log_odds);
        out.write(reinterpret_cast<const char*>(&l), 4);
    }

    const auto& p = map.params();
    nlohmann::json sidecar = {
        {"voxel_size", p.voxel_size}, {"p_hit", p.p_hit},     {"p_miss", p.p_miss},
        {"clamp_min", p.clamp_min},   {"clamp_max", p.clamp_max},
        {"oc_free", p.oc_free},       {"oc_occupied", p.oc_occupied},
        {"max_range", p.max_range},
    };
    if (map.bounds()) {
        sidecar["bounds"] = {{"min", {map.bounds()->min.x(), map.bounds()->min.y(),
                                      map.bounds()->min.z()}},
                             {"max", {map.bounds()->max.x(), map.bounds()->max.y(),
                                      map.bounds()->max.z()}}};
    }
    std::ofstream side(path + ".json");
    side << sidecar.dump(2) << '\n';
}

OccupancyMap load_occupancy_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open map: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0) throw std::runtime_error("map: bad magic");
    std::uint32_t version;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1) throw std::runtime_error("map: unsupported version");
    float vs;
    in.read(reinterpret_cast<char*>(&vs), 4);
    std::uint64_t count;
    in.read(reinterpret_cast<char*>(&count), 8);

    OccupancyParams params;
    std::ifstream side(path + ".json");
    if (side) {
        nlohmann::json j;
        side >> j;
        params.voxel_size = j.value("voxel_size", params.voxel_size);
        params.p_hit = j.value("p_hit", params.p_hit);
        params.p_miss = j.value("p_miss", params.p_miss);
        params.clamp_min = j.value("clamp_min", params.clamp_min);
        params.clamp_max = j.value("clamp_max", params.clamp_max);
        params.oc_free = j.value("oc_free", params.oc_free);
        params.oc_occupied = j.value("oc_occupied", params.oc_occupied);
        params.max_range = j.value("max_range", params.max_range);
        OccupancyMap map(params);
        if (j.contains("bounds")) {
            Aabb b;
            for (int i = 0; i < 3; ++i) {
                b.min[i] = j["bounds"]["min"][i].get<double>();
                b.max[i] = j["bounds"]["max"][i].get<double>();
            }
            map.set_bounds(b);
        }
        for (std::uint64_t i = 0; i < count; ++i) {
            VoxelKey key;
            float l;
            in.read(reinterpret_cast<char*>(&key.ix), 4);
            in.read(reinterpret_cast<char*>(&key.iy), 4);
            in.read(reinterpret_cast<char*>(&key.iz), 4);
            in.read(reinterpret_cast<char*>(&l), 4);
            map.add_log_odds(key, l);
        }
        return map;
    }
    params.voxel_size = vs;
    OccupancyMap map(params);
    for (std::uint64_t i = 0; i < count; ++i) {
        VoxelKey key;
        float l;
        in.read(reinterpret_cast<char*>(&key.ix), 4);
        in.read(reinterpret_cast<char*>(&key.iy), 4);
        in.read(reinterpret_cast<char*>(&key.iz), 4);
        in.read(reinterpret_cast<char*>(&l), 4);
        map.add_log_odds(key, l);
    }
    return map;
}

void export_occupancy_ply(const OccupancyMap& map, const std::string& path) {
    std::vector<Vec3> points;
    for (const auto& [key, lo] : map.cells()) {
        VoxelClass c = map.classify(key);
        if (c == VoxelClass::Occupied || c == VoxelClass::Unknown)
            points.push_back(map.center_of(key));
    }
    save_point_cloud_ply(path, points);
}

}  // namespace plan3d
