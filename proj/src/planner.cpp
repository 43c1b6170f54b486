#include "plan3d/planner.hpp"

#include "plan3d/config_json.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <queue>
#include <stdexcept>

#include <json.hpp>

namespace plan3d {

double total_information(const CoverageState& coverage) {
    double total = 0.0;
    for (const auto& [key, vi] : coverage.values) total += vi;
    return total;
}

double information_gain(const ViewpointObservation& observation, const CoverageState& coverage) {
    double gain = 0.0;
    for (const auto& [key, vi] : observation.entries)
        gain += std::min(vi, 1.0 - coverage.at(key));
    return gain;
}

void apply_viewpoint(CoverageState& coverage, const ViewpointObservation& observation) {
    for (const auto& [key, vi] : observation.entries) {
        double& value = coverage.values[key];
        value = std::min(1.0, value + vi);
    }
}

const Router::SourceCache& Router::dijkstra(int source) const {
    auto it = cache_.find(source);
    if (it != cache_.end()) return it->second;
    SourceCache sc;
    int n = graph_.size();
    sc.dist.assign(n, kInf);
    sc.parent.assign(n, -1);
    sc.dist[source] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, source});
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > sc.dist[u]) continue;
        for (int v : graph_.neighbors(u)) {
            double nd = d + graph_.edge(u, v).length + node_cost_;
            if (nd < sc.dist[v]) {
                sc.dist[v] = nd;
                sc.parent[v] = u;
                heap.push({nd, v});
            }
        }
    }
    return cache_.emplace(source, std::move(sc)).first->second;
}

double Router::distance(int a, int b) const {
    if (a == b) return 0.0;
    return dijkstra(a).dist[b];
}

std::optional<std::vector<int>> Router::path(int a, int b) const {
    if (a == b) return std::vector<int>{a};
    const SourceCache& sc = dijkstra(a);
    if (!std::isfinite(sc.dist[b])) return std::nullopt;
    std::vector<int> path;
    for (int v = b; v != -1; v = sc.parent[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return path;
}

LazyGainList make_lazy_gain_list(const PlannerContext& ctx, const CoverageState& coverage,
                                 std::uint64_t generation) {
    LazyGainList lazy;
    lazy.entries.reserve(ctx.graph->size());
    for (int i = 0; i < ctx.graph->size(); ++i)
        lazy.entries.push_back({i, information_gain((*ctx.observations)[i], coverage), generation});
    std::sort(lazy.entries.begin(), lazy.entries.end(),
              [](const LazyGainEntry& a, const LazyGainEntry& b) {
                  if (a.gain != b.gain) return a.gain > b.gain;
                  return a.node < b.node;
              });
    return lazy;
}

namespace {

// Stable position for a refreshed entry: gains descending, lowest id first
// among equal gains.
void bubble_down(std::vector<LazyGainEntry>& list, size_t index) {
    while (index + 1 < list.size()) {
        const LazyGainEntry& next = list[index + 1];
        const LazyGainEntry& cur = list[index];
        if (next.gain > cur.gain || (next.gain == cur.gain && next.node < cur.node)) {
            std::swap(list[index], list[index + 1]);
            ++index;
        } else {
            break;
        }
    }
}

}  // namespace

std::optional<int> select_middle_viewpoint(LazyGainList& lazy, const PlannerContext& ctx,
                                           const Router& router, int v_start, int v_end,
                                           double budget, const CoverageState& coverage,
                                           const std::vector<bool>& on_path,
                                           std::uint64_t generation) {
    auto valid = [&](const LazyGainEntry& e) {
        if (on_path[e.node]) return false;
        double through = router.distance(v_start, e.node) + router.distance(e.node, v_end);
        return through <= budget;
    };

    auto& list = lazy.entries;
    while (true) {
        size_t first = list.size();
        for (size_t i = 0; i < list.size(); ++i) {
            if (valid(list[i])) {
                first = i;
                break;
            }
        }
        if (first == list.size()) return std::nullopt;

        LazyGainEntry& head = list[first];
        if (head.stamp != generation) {
            head.gain = information_gain((*ctx.observations)[head.node], coverage);
            head.stamp = generation;
            bubble_down(list, first);
            continue;
        }

        // Fresh head. A later valid entry with an equal stale cached gain
        // could still tie and win on id, so refresh it first.
        size_t second = list.size();
        for (size_t i = first + 1; i < list.size(); ++i) {
            if (valid(list[i])) {
                second = i;
                break;
            }
        }
        if (second < list.size() && list[second].gain == head.gain &&
            list[second].stamp != generation) {
            list[second].gain =
                information_gain((*ctx.observations)[list[second].node], coverage);
            list[second].stamp = generation;
            bubble_down(list, second);
            continue;
        }
        if (head.gain > 0.0) return head.node;
        return std::nullopt;
    }
}

namespace {

int max_standalone_node(const PlannerContext& ctx) {
    CoverageState empty;
    int best = -1;
    double best_score = -1.0;
    for (int i = 0; i < ctx.graph->size(); ++i) {
        double score = information_gain((*ctx.observations)[i], empty);
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

struct RecursiveGreedySolver {
    const PlannerContext& ctx;
    Router& router;
    double per_viewpoint_cost;
    CoverageState coverage;
    std::vector<bool> on_path;
    std::uint64_t generation = 0;

    std::vector<int> recurse(int v_start, int v_end, double budget, LazyGainList lazy) {
        auto middle = select_middle_viewpoint(lazy, ctx, router, v_start, v_end, budget,
                                              coverage, on_path, generation);
        if (!middle) return {};
        int v_m = *middle;
        on_path[v_m] = true;
        apply_viewpoint(coverage, (*ctx.observations)[v_m]);
        ++generation;

        // Equal split, capped so the second part can still afford its leg to
        // v_end within this level's budget.
        double to_end = router.distance(v_m, v_end);
        double first_budget = std::min(budget / 2.0, budget - to_end);
        std::vector<int> part1 = recurse(v_start, v_m, first_budget, lazy);

        double spent = 0.0;
        int prev = v_start;
        for (int node : part1) {
            spent += router.distance(prev, node);
            prev = node;
        }
        spent += router.distance(prev, v_m);

        std::vector<int> part2 = recurse(v_m, v_end, budget - spent, lazy);

        part1.push_back(v_m);
        part1.insert(part1.end(), part2.begin(), part2.end());
        return part1;
    }
};

}  // namespace

Trajectory recursive_greedy(const PlannerContext& ctx, const BudgetParams& budget,
                            std::optional<int> start_node) {
    if (ctx.graph->size() == 0) throw std::runtime_error("recursive_greedy: empty graph");
    int v_i = start_node ? *start_node : max_standalone_node(ctx);

    Router router(*ctx.graph, budget.per_viewpoint_cost);
    RecursiveGreedySolver solver{ctx, router, budget.per_viewpoint_cost};
    solver.on_path.assign(ctx.graph->size(), false);
    solver.on_path[v_i] = true;
    apply_viewpoint(solver.coverage, (*ctx.observations)[v_i]);
    solver.generation = 1;

    LazyGainList lazy = make_lazy_gain_list(ctx, solver.coverage, solver.generation);
    double top_budget = budget.budget - budget.per_viewpoint_cost;
    std::vector<int> selected =
        top_budget > 0.0 ? solver.recurse(v_i, v_i, top_budget, std::move(lazy))
                         : std::vector<int>{};

    std::vector<int> order;
    order.push_back(v_i);
    order.insert(order.end(), selected.begin(), selected.end());
    if (!selected.empty()) order.push_back(v_i);  // closed tour
    return assemble_trajectory(ctx, router, order, budget);
}

namespace {

Trajectory sequential_greedy(const PlannerContext& ctx, const BudgetParams& budget,
                             std::optional<int> start_node, bool cost_benefit) {
    if (ctx.graph->size() == 0) throw std::runtime_error("greedy: empty graph");
    int v_i = start_node ? *start_node : max_standalone_node(ctx);
    Router router(*ctx.graph, budget.per_viewpoint_cost);

    CoverageState coverage;
    apply_viewpoint(coverage, (*ctx.observations)[v_i]);
    std::vector<bool> on_path(ctx.graph->size(), false);
    on_path[v_i] = true;

    double top_budget = budget.budget - budget.per_viewpoint_cost;
    std::vector<int> order{v_i};
    double legs_cost = 0.0;
    int last = v_i;
    while (true) {
        int best = -1;
        double best_score = 0.0;
        for (int v = 0; v < ctx.graph->size(); ++v) {
            if (on_path[v]) continue;
            double go = router.distance(last, v);
            double back = router.distance(v, v_i);
            if (!std::isfinite(go) || !std::isfinite(back)) continue;
            if (legs_cost + go + back > top_budget) continue;
            double gain = information_gain((*ctx.observations)[v], coverage);
            if (gain <= 0.0) continue;
            double score = gain;
            if (cost_benefit) {
                double incremental = go + back - router.distance(last, v_i);
                score = gain / std::max(incremental, 1e-9);
            }
            if (score > best_score) {
                best_score = score;
                best = v;
            }
        }
        if (best < 0) break;
        legs_cost += router.distance(last, best);
        last = best;
        on_path[best] = true;
        apply_viewpoint(coverage, (*ctx.observations)[best]);
        order.push_back(best);
    }
    if (order.size() > 1) order.push_back(v_i);
    return assemble_trajectory(ctx, router, order, budget);
}

}  // namespace

Trajectory greedy_baseline(const PlannerContext& ctx, const BudgetParams& budget,
                           std::optional<int> start_node) {
    return sequential_greedy(ctx, budget, start_node, false);
}

Trajectory cost_benefit_baseline(const PlannerContext& ctx, const BudgetParams& budget,
                                 std::optional<int> start_node) {
    return sequential_greedy(ctx, budget, start_node, true);
}

namespace {

struct OracleSearch {
    const PlannerContext& ctx;
    const Router& router;
    double top_budget;
    CoverageState coverage;
    std::vector<bool> used;
    std::vector<int> sequence;
    double best_score = -1.0;
    std::vector<int> best_order;

    using Undo = std::vector<std::pair<VoxelKey, double>>;

    Undo apply(const ViewpointObservation& obs) {
        Undo undo;
        for (const auto& [key, vi] : obs.entries) {
            double& value = coverage.values[key];
            undo.push_back({key, value});
            value = std::min(1.0, value + vi);
        }
        return undo;
    }

    void rollback(const Undo& undo) {
        for (auto it = undo.rbegin(); it != undo.rend(); ++it)
            coverage.values[it->first] = it->second;
    }

    void consider() {
        double score = total_information(coverage);
        if (score > best_score) {
            best_score = score;
            best_order = sequence;
        }
    }

    // Extends the current open sequence; feasibility requires being able to
    // close the tour back to the first node. The first node is the lowest id
    // in the subset, so each subset is enumerated once per distinct tour.
    void dfs(double legs_cost) {
        consider();
        int first = sequence.front();
        int last = sequence.back();
        for (int v = first + 1; v < ctx.graph->size(); ++v) {
            if (used[v]) continue;
            double go = router.distance(last, v);
            double back = router.distance(v, first);
            if (!std::isfinite(go) || !std::isfinite(back)) continue;
            if (legs_cost + go + back > top_budget) continue;
            used[v] = true;
            sequence.push_back(v);
            Undo undo = apply((*ctx.observations)[v]);
            dfs(legs_cost + go);
            rollback(undo);
            sequence.pop_back();
            used[v] = false;
        }
    }
};

}  // namespace

OracleResult brute_force_oracle(const PlannerContext& ctx, const BudgetParams& budget) {
    int n = ctx.graph->size();
    if (n == 0) throw std::runtime_error("brute_force_oracle: empty graph");
    if (n > 12) throw std::runtime_error("brute_force_oracle: instance too large");

    Router router(*ctx.graph, budget.per_viewpoint_cost);
    double top_budget = budget.budget - budget.per_viewpoint_cost;

    OracleSearch search{ctx, router, top_budget};
    search.used.assign(n, false);

    double best_score = -1.0;
    std::vector<int> best_order;
    for (int start = 0; start < n; ++start) {
        search.coverage = CoverageState{};
        search.sequence = {start};
        std::fill(search.used.begin(), search.used.end(), false);
        search.used[start] = true;
        auto undo = search.apply((*ctx.observations)[start]);
        search.best_score = -1.0;
        search.best_order.clear();
        search.dfs(0.0);
        search.rollback(undo);
        if (search.best_score > best_score) {
            best_score = search.best_score;
            best_order = search.best_order;
        }
    }

    std::vector<int> order = best_order;
    if (order.size() > 1) order.push_back(order.front());
    OracleResult result;
    result.score = best_score;
    result.trajectory = assemble_trajectory(ctx, router, order, budget);
    return result;
}

std::vector<Viewpoint> pattern_poses(const PatternParams& params, const Aabb& roi) {
    std::vector<Viewpoint> poses;
    Vec3 center = roi.center();
    std::mt19937_64 rng(0);  // sigma 0: exact look-at orientations

    auto look_at_pose = [&](const Vec3& position) {
        if (params.look_down) {
            Viewpoint vp;
            vp.position = position;
            vp.yaw = 0.0;
            vp.pitch = -M_PI / 2.0;
            return vp;
        }
        return sample_orientation(position, roi, rng, 0.0);
    };

    switch (params.kind) {
        case PatternKind::Circle:
        case PatternKind::Ellipse: {
            double rx = params.radius;
            double ry = params.kind == PatternKind::Circle ? params.radius : params.radius_minor;
            for (int i = 0; i < params.viewpoint_count; ++i) {
                double angle = 2.0 * M_PI * i / params.viewpoint_count;
                Vec3 p(center.x() + rx * std::cos(angle), center.y() + ry * std::sin(angle),
                       params.altitude);
                poses.push_back(look_at_pose(p));
            }
            break;
        }
        case PatternKind::Meander: {
            for (int row = 0; row < params.grid_y; ++row) {
                for (int k = 0; k < params.grid_x; ++k) {
                    int col = (row % 2 == 0) ? k : params.grid_x - 1 - k;
                    double fx = params.grid_x > 1 ? double(col) / (params.grid_x - 1) : 0.5;
                    double fy = params.grid_y > 1 ? double(row) / (params.grid_y - 1) : 0.5;
                    Vec3 p(center.x() + (fx - 0.5) * params.extent_x,
                           center.y() + (fy - 0.5) * params.extent_y, params.altitude);
                    poses.push_back(look_at_pose(p));
                }
            }
            break;
        }
        case PatternKind::Hemisphere: {
            // Fibonacci spiral on the upper hemisphere over the roi center.
            const double golden = M_PI * (3.0 - std::sqrt(5.0));
            for (int i = 0; i < params.viewpoint_count; ++i) {
                double z = (i + 0.5) / params.viewpoint_count;  // cos(polar), (0, 1)
                double sin_theta = std::sqrt(std::max(0.0, 1.0 - z * z));
                double phi = golden * i;
                Vec3 p = center + params.radius * Vec3(sin_theta * std::cos(phi),
                                                       sin_theta * std::sin(phi), z);
                poses.push_back(look_at_pose(p));
            }
            break;
        }
    }
    return poses;
}

Trajectory pattern_trajectory(const PatternParams& params, const Scene& scene,
                              const PlannerContext* ctx, const BudgetParams* budget) {
    std::vector<Viewpoint> poses = pattern_poses(params, scene.roi);
    double pvc = budget ? budget->per_viewpoint_cost : 9.0;

    if (params.kind == PatternKind::Hemisphere) {
        if (!ctx || ctx->graph->size() == 0)
            throw std::runtime_error("hemisphere pattern requires a viewpoint graph");
        Router router(*ctx->graph, pvc);
        const auto& nodes = ctx->graph->nodes();

        std::vector<int> snapped;
        for (const auto& pose : poses) {
            int best = 0;
            double best_d = kInf;
            for (const auto& node : nodes) {
                double d = (node.viewpoint.position - pose.position).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = node.id;
                }
            }
            if (snapped.empty() || snapped.back() != best) snapped.push_back(best);
        }
        std::vector<int> deduped;
        std::vector<bool> seen(nodes.size(), false);
        for (int id : snapped)
            if (!seen[id]) {
                seen[id] = true;
                deduped.push_back(id);
            }

        // Keep nodes reachable from the first; skip islands. Fly the pattern
        // until the budget runs out (router distances already charge the
        // per-viewpoint cost per hop, the start pose is charged once).
        std::vector<int> reachable;
        double spent = pvc;
        for (int id : deduped) {
            if (reachable.empty()) {
                reachable.push_back(id);
                continue;
            }
            double leg = router.distance(reachable.back(), id);
            if (!std::isfinite(leg)) continue;
            if (budget && spent + leg > budget->budget) break;
            spent += leg;
            reachable.push_back(id);
        }
        if (reachable.empty())
            throw std::runtime_error("hemisphere pattern: no reachable graph nodes");
        BudgetParams b = budget ? *budget : BudgetParams{};
        return assemble_trajectory(*ctx, router, reachable, b);
    }

    Trajectory trajectory;
    double spent = 0.0;
    for (const auto& pose : poses) {
        double leg = trajectory.entries.empty()
                         ? 0.0
                         : (pose.position - trajectory.entries.back().pose.position).norm();
        if (budget && spent + leg + pvc > budget->budget) break;
        spent += leg + pvc;
        if (!trajectory.entries.empty())
            trajectory.legs.push_back(Motion::from_waypoints(
                {trajectory.entries.back().pose.position, pose.position}));
        trajectory.entries.push_back({-1, EntryRole::Selected, pose});
    }
    trajectory.recompute_costs(pvc);
    return trajectory;
}

Trajectory assemble_trajectory(const PlannerContext& ctx, const Router& router,
                               const std::vector<int>& selected_order,
                               const BudgetParams& budget) {
    if (selected_order.empty()) throw std::runtime_error("assemble_trajectory: empty order");
    const auto& nodes = ctx.graph->nodes();

    Trajectory trajectory;
    trajectory.entries.push_back(
        {selected_order[0], EntryRole::Selected, nodes[selected_order[0]].viewpoint});

    for (size_t i = 1; i < selected_order.size(); ++i) {
        int a = selected_order[i - 1];
        int b = selected_order[i];
        auto path = router.path(a, b);
        if (!path) throw std::runtime_error("assemble_trajectory: disconnected pair");
        for (size_t k = 1; k < path->size(); ++k) {
            int from = (*path)[k - 1];
            int to = (*path)[k];
            Motion motion = ctx.graph->edge(from, to);
            if ((motion.waypoints.front() - nodes[from].viewpoint.position).squaredNorm() >
                (motion.waypoints.back() - nodes[from].viewpoint.position).squaredNorm())
                std::reverse(motion.waypoints.begin(), motion.waypoints.end());
            trajectory.legs.push_back(std::move(motion));
            EntryRole role = (k == path->size() - 1) ? EntryRole::Selected : EntryRole::SparseMatch;
            trajectory.entries.push_back({to, role, nodes[to].viewpoint});
        }
    }

    // Achieved score counts the planner-selected viewpoints once each.
    CoverageState coverage;
    std::vector<bool> counted(ctx.graph->size(), false);
    for (const auto& entry : trajectory.entries) {
        if (entry.node_id >= 0 && entry.role == EntryRole::Selected && !counted[entry.node_id]) {
            counted[entry.node_id] = true;
            apply_viewpoint(coverage, (*ctx.observations)[entry.node_id]);
        }
    }
    trajectory.achieved_score = total_information(coverage);
    trajectory.recompute_costs(budget.per_viewpoint_cost);
    return trajectory;
}

void save_trajectory_json(const Trajectory& trajectory, const std::string& path,
                          const std::string& parameter_hash) {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : trajectory.entries) {
        j["entries"].push_back(
            {{"node_id", e.node_id},
             {"role", e.role == EntryRole::Selected ? "selected" : "sparse_match"},
             {"position", {e.pose.position.x(), e.pose.position.y(), e.pose.position.z()}},
             {"yaw", e.pose.yaw},
             {"pitch", e.pose.pitch}});
    }
    j["legs"] = nlohmann::json::array();
    for (const auto& leg : trajectory.legs) {
        nlohmann::json wps = nlohmann::json::array();
        for (const auto& w : leg.waypoints) wps.push_back({w.x(), w.y(), w.z()});
        j["legs"].push_back({{"length", leg.length}, {"waypoints", wps}});
    }
    j["total_length"] = trajectory.total_length;
    j["budget_cost"] = trajectory.budget_cost;
    j["achieved_score"] = trajectory.achieved_score;
    if (!parameter_hash.empty()) j["parameter_hash"] = parameter_hash;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trajectory: " + path);
    out << j.dump(2) << '\n';
}

Trajectory load_trajectory_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trajectory: " + path);
    nlohmann::json j;
    in >> j;
    Trajectory trajectory;
    for (const auto& e : j.at("entries")) {
        TrajectoryEntry entry;
        entry.node_id = e.at("node_id");
        entry.role = e.at("role") == "selected" ? EntryRole::Selected : EntryRole::SparseMatch;
        entry.pose.position = vec3_from_json(e.at("position"));
        entry.pose.yaw = e.at("yaw");
        entry.pose.pitch = e.at("pitch");
        trajectory.entries.push_back(entry);
    }
    for (const auto& l : j.at("legs")) {
        std::vector<Vec3> wps;
        for (const auto& w : l.at("waypoints")) wps.push_back(vec3_from_json(w));
        trajectory.legs.push_back(Motion::from_waypoints(std::move(wps)));
    }
    trajectory.total_length = j.at("total_length");
    trajectory.budget_cost = j.at("budget_cost");
    trajectory.achieved_score = j.at("achieved_score");
    return trajectory;
}

}  // namespace plan3d
