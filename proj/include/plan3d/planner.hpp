#ifndef PLAN3D_PLANNER_HPP_
#define PLAN3D_PLANNER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plan3d/graph.hpp"
#include "plan3d/visibility.hpp"

namespace plan3d {

// Per-voxel accumulated information VI, saturating at 1.
struct CoverageState {
    std::unordered_map<VoxelKey, double, VoxelKeyHash> values;

    double at(const VoxelKey& key) const {
        auto it = values.find(key);
        return it == values.end() ? 0.0 : it->second;
    }
};

double total_information(const CoverageState& coverage);
double information_gain(const ViewpointObservation& observation, const CoverageState& coverage);
void apply_viewpoint(CoverageState& coverage, const ViewpointObservation& observation);

struct BudgetParams {
    double budget = 900.0;           // L_max, meters
    double per_viewpoint_cost = 9.0; // meters (3s at 3 m/s cruise)
};

enum class EntryRole { Selected, SparseMatch };

struct TrajectoryEntry {
    int node_id = -1;  // -1 for pattern poses that are not graph nodes
    EntryRole role = EntryRole::Selected;
    Viewpoint pose;
};

struct Trajectory {
    std::vector<TrajectoryEntry> entries;
    std::vector<Motion> legs;  // legs.size() == entries.size() - 1 (or 0)
    double total_length = 0.0;
    double budget_cost = 0.0;  // total_length + per_viewpoint_cost * entry count
    double achieved_score = 0.0;

    void recompute_costs(double per_viewpoint_cost) {
        total_length = 0.0;
        for (const auto& leg : legs) total_length += leg.length;
        budget_cost = total_length + per_viewpoint_cost * double(entries.size());
    }
};

// Shortest-path routing in the budget metric: edge weight = motion length +
// per-viewpoint cost, so every node entered along a route is charged for the
// capture stop made there.
class Router {
public:
    Router(const ViewpointGraph& graph, double per_viewpoint_cost)
        : graph_(graph), node_cost_(per_viewpoint_cost) {}

    double distance(int a, int b) const;
    std::optional<std::vector<int>> path(int a, int b) const;
    const ViewpointGraph& graph() const { return graph_; }
    double node_cost() const { return node_cost_; }

private:
    struct SourceCache {
        std::vector<double> dist;
        std::vector<int> parent;
    };
    const SourceCache& dijkstra(int source) const;

    const ViewpointGraph& graph_;
    double node_cost_;
    mutable std::unordered_map<int, SourceCache> cache_;
};

// Lazy gain list: sorted by cached gain descending (ties: lowest node id
// first); cached gains are upper bounds by submodularity.
struct LazyGainEntry {
    int node = -1;
    double gain = 0.0;
    std::uint64_t stamp = 0;
};

struct LazyGainList {
    std::vector<LazyGainEntry> entries;
};

// Planning context shared by the solvers.
struct PlannerContext {
    const ViewpointGraph* graph = nullptr;
    const std::vector<ViewpointObservation>* observations = nullptr;
};

LazyGainList make_lazy_gain_list(const PlannerContext& ctx, const CoverageState& coverage,
                                 std::uint64_t generation);

// Exact lazy argmax: returns the reachable, positive-gain node maximizing
// information_gain against coverage (ties broken by lowest id), refreshing
// stale entries with single bubble-down passes.
std::optional<int> select_middle_viewpoint(LazyGainList& lazy, const PlannerContext& ctx,
                                           const Router& router, int v_start, int v_end,
                                           double budget, const CoverageState& coverage,
                                           const std::vector<bool>& on_path,
                                           std::uint64_t generation);

Trajectory recursive_greedy(const PlannerContext& ctx, const BudgetParams& budget,
                            std::optional<int> start_node = std::nullopt);

Trajectory greedy_baseline(const PlannerContext& ctx, const BudgetParams& budget,
                           std::optional<int> start_node = std::nullopt);

Trajectory cost_benefit_baseline(const PlannerContext& ctx, const BudgetParams& budget,
                                 std::optional<int> start_node = std::nullopt);

struct OracleResult {
    double score = 0.0;
    Trajectory trajectory;
};

// Exhaustive enumeration of node subsets and visiting orders; exact optimum
// under the same budget accounting. Instances limited to 12 nodes.
OracleResult brute_force_oracle(const PlannerContext& ctx, const BudgetParams& budget);

enum class PatternKind { Circle, Ellipse, Meander, Hemisphere };

struct PatternParams {
    PatternKind kind = PatternKind::Circle;
    double radius = 11.0;        // circle/hemisphere; ellipse semi-major
    double radius_minor = 8.0;   // ellipse semi-minor
    double extent_x = 22.0;      // meander width
    double extent_y = 22.0;      // meander height
    int grid_x = 5;              // meander columns
    int grid_y = 4;              // meander rows
    double altitude = 9.0;       // fixed safe altitude for circle/ellipse/meander
    int viewpoint_count = 20;
    bool look_down = false;      // nadir survey orientation instead of look-at-roi
};

// Regular-pattern baselines. Circle/ellipse/meander fly at a fixed altitude
// ignoring the map; hemisphere snaps to nearest graph nodes and routes
// through free-space edges.
Trajectory pattern_trajectory(const PatternParams& params, const Scene& scene,
                              const PlannerContext* ctx = nullptr,
                              const BudgetParams* budget = nullptr);

// Expands consecutive selected nodes via routed shortest paths; intermediate
// nodes become sparse-match entries.
Trajectory assemble_trajectory(const PlannerContext& ctx, const Router& router,
                               const std::vector<int>& selected_order,
                               const BudgetParams& budget);

std::vector<Viewpoint> pattern_poses(const PatternParams& params, const Aabb& roi);

void save_trajectory_json(const Trajectory& trajectory, const std::string& path,
                          const std::string& parameter_hash = "");
Trajectory load_trajectory_json(const std::string& path);

}  // namespace plan3d

#endif  // PLAN3D_PLANNER_HPP_
