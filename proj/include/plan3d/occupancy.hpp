#ifndef PLAN3D_OCCUPANCY_HPP_
#define PLAN3D_OCCUPANCY_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "plan3d/geometry.hpp"
#include "plan3d/scene.hpp"

namespace plan3d {

struct VoxelKey {
    std::int32_t ix = 0;
    std::int32_t iy = 0;
    std::int32_t iz = 0;

    bool operator==(const VoxelKey& o) const { return ix == o.ix && iy == o.iy && iz == o.iz; }
    bool operator<(const VoxelKey& o) const {
        if (ix != o.ix) return ix < o.ix;
        if (iy != o.iy) return iy < o.iy;
        return iz < o.iz;
    }
};

struct VoxelKeyHash {
    size_t operator()(const VoxelKey& k) const {
        std::uint64_t h = std::uint64_t(std::uint32_t(k.ix)) * 73856093ULL;
        h ^= std::uint64_t(std::uint32_t(k.iy)) * 19349663ULL;
        h ^= std::uint64_t(std::uint32_t(k.iz)) * 83492791ULL;
        return size_t(h);
    }
};

enum class VoxelClass { Free, Occupied, Unknown };

inline double prob_to_log_odds(double p) { return std::log(p / (1.0 - p)); }
inline double log_odds_to_prob(double l) { return 1.0 / (1.0 + std::exp(-l)); }

struct OccupancyParams {
    double voxel_size = 0.2;
    double p_hit = 0.7;
    double p_miss = 0.4;
    double clamp_min = 0.12;
    double clamp_max = 0.97;
    double oc_free = 0.25;
    double oc_occupied = 0.75;
    double max_range = 100.0;
};

// Sparse probabilistic voxel map. Unstored voxels read as the 0.5 prior.
// Queries outside the configured bounds report Occupied so planning never
// leaves the allowed volume.
class OccupancyMap {
public:
    OccupancyMap() = default;
    explicit OccupancyMap(const OccupancyParams& params) : params_(params) {}

    const OccupancyParams& params() const { return params_; }
    double voxel_size() const { return params_.voxel_size; }

    void set_bounds(const Aabb& bounds) { bounds_ = bounds; }
    const std::optional<Aabb>& bounds() const { return bounds_; }

    VoxelKey key_of(const Vec3& p) const {
        const double vs = params_.voxel_size;
        return {std::int32_t(std::floor(p.x() / vs)), std::int32_t(std::floor(p.y() / vs)),
                std::int32_t(std::floor(p.z() / vs))};
    }
    Vec3 center_of(const VoxelKey& k) const {
        const double vs = params_.voxel_size;
        return {(k.ix + 0.5) * vs, (k.iy + 0.5) * vs, (k.iz + 0.5) * vs};
    }

    double occupancy(const VoxelKey& key) const {
        auto it = cells_.find(key);
        return it == cells_.end() ? 0.5 : log_odds_to_prob(it->second);
    }

    VoxelClass classify(const VoxelKey& key) const {
        if (bounds_ && !bounds_->contains(center_of(key))) return VoxelClass::Occupied;
        double oc = occupancy(key);
        if (oc <= params_.oc_free) return VoxelClass::Free;
        if (oc >= params_.oc_occupied) return VoxelClass::Occupied;
        return VoxelClass::Unknown;
    }

    bool is_free(const VoxelKey& key) const { return classify(key) == VoxelClass::Free; }

    void update_hit(const VoxelKey& key) {
        add_log_odds(key, prob_to_log_odds(params_.p_hit));
    }
    void update_miss(const VoxelKey& key) {
        add_log_odds(key, prob_to_log_odds(params_.p_miss));
    }

    size_t size() const { return cells_.size(); }
    const std::unordered_map<VoxelKey, double, VoxelKeyHash>& cells() const { return cells_; }

    void add_log_odds(const VoxelKey& key, double delta) {
        double& l = cells_[key];
        l = std::clamp(l + delta, prob_to_log_odds(params_.clamp_min),
                       prob_to_log_odds(params_.clamp_max));
    }

private:
    OccupancyParams params_;
    std::optional<Aabb> bounds_;
    std::unordered_map<VoxelKey, double, VoxelKeyHash> cells_;
};

// Exact amortized grid traversal; visits every voxel the segment passes
// through, origin voxel first.
std::vector<VoxelKey> traverse_ray(const OccupancyMap& map, const Vec3& origin,
                                   const Vec3& direction, double length);

void integrate_depth_map(OccupancyMap& map, const DepthNormalImage& image,
                         const CameraIntrinsics& intrinsics, double max_range);

bool is_free_box(const OccupancyMap& map, const Aabb& box);

// Forces every voxel intersecting the box to the free clamp. Used for the
// flown corridor: space the drone has physically traversed is known free.
void carve_free_box(OccupancyMap& map, const Aabb& box);

// Samples box positions spaced <= step along [a, b], endpoints included.
bool is_free_segment(const OccupancyMap& map, const Vec3& a, const Vec3& b,
                     const Vec3& box_half_extents, double step);

struct ClassHistogram {
    std::size_t free = 0;
    std::size_t occupied = 0;
    std::size_t unknown = 0;
};

// Counts stored voxels by class (unstored voxels are Unknown by definition).
ClassHistogram class_histogram(const OccupancyMap& map);

// Flat little-endian binary format plus a JSON parameter sidecar.
void save_occupancy_map(const OccupancyMap& map, const std::string& path);
OccupancyMap load_occupancy_map(const std::string& path);

// Debug exporter: occupied and unknown stored voxel centers as PLY.
void export_occupancy_ply(const OccupancyMap& map, const std::string& path);

}  // namespace plan3d

#endif  // PLAN3D_OCCUPANCY_HPP_
