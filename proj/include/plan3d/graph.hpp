#ifndef PLAN3D_GRAPH_HPP_
#define PLAN3D_GRAPH_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "plan3d/occupancy.hpp"
#include "plan3d/scene.hpp"
#include "plan3d/visibility.hpp"

namespace plan3d {

struct Motion {
    std::vector<Vec3> waypoints;  // first/last equal the endpoint positions
    double length = 0.0;

    static Motion from_waypoints(std::vector<Vec3> wps) {
        Motion m;
        m.waypoints = std::move(wps);
        for (size_t i = 1; i < m.waypoints.size(); ++i)
            m.length += (m.waypoints[i] - m.waypoints[i - 1]).norm();
        return m;
    }
};

struct SamplerParams {
    double base_step = 3.0;           // s0
    double growth = 0.05;             // kappa, 1/m
    double min_separation_factor = 0.5;
    int min_viewpoints = 20;
    int max_viewpoints = 2000;
    double drone_box_size = 1.5;      // cube edge length
    double surface_clearance = 1.0;   // extra margin around the drone box
    double orientation_sigma_scale = 0.25;  // jitter around the look-at-roi pose
    std::uint64_t rng_seed = 1;

    Vec3 clearance_half_extents() const {
        double h = 0.5 * drone_box_size + surface_clearance;
        return {h, h, h};
    }
};

struct RrtParams {
    int max_iterations = 600;
    double goal_bias = 0.2;
    double step_size = 2.0;
    double rewire_gamma = 15.0;
    double free_step = 0.1;  // bounding-box sampling step along segments
    std::uint64_t rng_seed = 1;
};

struct GraphNode {
    int id = -1;
    Viewpoint viewpoint;
};

using EdgeKey = std::pair<int, int>;  // ordered: first < second

inline EdgeKey make_edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

class ViewpointGraph {
public:
    int add_node(const Viewpoint& vp) {
        int id = int(nodes_.size());
        nodes_.push_back({id, vp});
        adjacency_.emplace_back();
        return id;
    }

    void add_edge(int a, int b, Motion motion) {
        EdgeKey key = make_edge_key(a, b);
        if (edges_.count(key)) return;
        adjacency_[a].push_back(b);
        adjacency_[b].push_back(a);
        edges_.emplace(key, std::move(motion));
        cache_.clear();
    }

    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::map<EdgeKey, Motion>& edges() const { return edges_; }
    const std::vector<int>& neighbors(int id) const { return adjacency_[id]; }
    const Motion& edge(int a, int b) const { return edges_.at(make_edge_key(a, b)); }
    bool has_edge(int a, int b) const { return edges_.count(make_edge_key(a, b)) > 0; }
    int size() const { return int(nodes_.size()); }

    // Memoized Dijkstra. Returns the node sequence and total length, or
    // absent when disconnected.
    std::optional<std::pair<std::vector<int>, double>> shortest_path(int a, int b) const;
    // Distance only; kInf when disconnected.
    double shortest_distance(int a, int b) const;

private:
    struct SourceCache {
        std::vector<double> dist;
        std::vector<int> parent;
    };
    const SourceCache& dijkstra(int source) const;

    std::vector<GraphNode> nodes_;
    std::vector<std::vector<int>> adjacency_;
    std::map<EdgeKey, Motion> edges_;
    mutable std::unordered_map<int, SourceCache> cache_;
};

double compute_step_size(const Vec3& position, const Aabb& roi, const SamplerParams& params);

// Yaw/pitch toward the roi center plus Gaussian offsets whose sigma is the
// angular half-range the roi box subtends from this position.
Viewpoint sample_orientation(const Vec3& position, const Aabb& roi, std::mt19937_64& rng,
                             double sigma_scale = 1.0);

std::vector<Viewpoint> generate_viewpoints(const std::vector<Viewpoint>& seeds,
                                           const OccupancyMap& map, const Scene& scene,
                                           const SamplerParams& params);

std::optional<Motion> find_motion(const Vec3& a, const Vec3& b, const OccupancyMap& map,
                                  const Vec3& drone_half_extents, const Aabb& sample_space,
                                  const RrtParams& params);

struct EdgeBuildParams {
    int k_neighbors = 10;
    // The voxel-set overlap proxy is parallax-sensitive at the bundled-scene
    // scale; 0.2 keeps sampled graphs connected where image-feature overlap
    // (for which 0.4 is calibrated) would be much higher.
    double matchability_alpha = 0.2;
    RrtParams rrt;
    Vec3 drone_half_extents{1.75, 1.75, 1.75};
    int num_threads = 1;
};

// Connects each node to its K nearest neighbors when a free-space motion
// exists and the pair is matchable.
void find_motions(ViewpointGraph& graph, const std::vector<ViewpointObservation>& observations,
                  const OccupancyMap& map, const Aabb& sample_space,
                  const EdgeBuildParams& params);

void save_graph_json(const ViewpointGraph& graph, const std::string& path);
ViewpointGraph load_graph_json(const std::string& path);

}  // namespace plan3d

#endif  // PLAN3D_GRAPH_HPP_
