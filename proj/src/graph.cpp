#include "plan3d/graph.hpp"

#include "plan3d/config_json.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace plan3d {

const ViewpointGraph::SourceCache& ViewpointGraph::dijkstra(int source) const {
    auto it = cache_.find(source);
    if (it != cache_.end()) return it->second;

    SourceCache sc;
    sc.dist.assign(nodes_.size(), kInf);
    sc.parent.assign(nodes_.size(), -1);
    sc.dist[source] = 0.0;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, source});
    while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > sc.dist[u]) continue;
        for (int v : adjacency_[u]) {
            double nd = d + edges_.at(make_edge_key(u, v)).length;
            if (nd < sc.dist[v]) {
                sc.dist[v] = nd;
                sc.parent[v] = u;
                heap.push({nd, v});
            }
        }
    }
    return cache_.emplace(source, std::move(sc)).first->second;
}

std::optional<std::pair<std::vector<int>, double>> ViewpointGraph::shortest_path(int a,
                                                                                 int b) const {
    if (a < 0 || a >= size() || b < 0 || b >= size())
        throw std::out_of_range("shortest_path: node id out of range");
    if (a == b) return std::make_pair(std::vector<int>{a}, 0.0);
    const SourceCache& sc = dijkstra(a);
    if (!std::isfinite(sc.dist[b])) return std::nullopt;
    std::vector<int> path;
    for (int v = b; v != -1; v = sc.parent[v]) path.push_back(v);
    std::reverse(path.begin(), path.end());
    return std::make_pair(std::move(path), sc.dist[b]);
}

double ViewpointGraph::shortest_distance(int a, int b) const {
    if (a == b) return 0.0;
    return dijkstra(a).dist[b];
}

double compute_step_size(const Vec3& position, const Aabb& roi, const SamplerParams& params) {
    return params.base_step * (1.0 + params.growth * roi.distance(position));
}

Viewpoint sample_orientation(const Vec3& position, const Aabb& roi, std::mt19937_64& rng,
                             double sigma_scale) {
    Vec3 to_center = roi.center() - position;
    double yaw_c = std::atan2(to_center.y(), to_center.x());
    double horiz = std::hypot(to_center.x(), to_center.y());
    double pitch_c = std::atan2(to_center.z(), horiz);

    // Angular half-range subtended by the roi corners.
    double sigma_yaw = 0.0, sigma_pitch = 0.0;
    if (roi.contains(position)) {
        sigma_yaw = M_PI;
        sigma_pitch = M_PI / 2.0;
    } else {
        for (int corner = 0; corner < 8; ++corner) {
            Vec3 c((corner & 1) ? roi.max.x() : roi.min.x(),
                   (corner & 2) ? roi.max.y() : roi.min.y(),
                   (corner & 4) ? roi.max.z() : roi.min.z());
            Vec3 d = c - position;
            sigma_yaw = std::max(sigma_yaw,
                                 std::abs(wrap_angle(std::atan2(d.y(), d.x()) - yaw_c)));
            sigma_pitch = std::max(
                sigma_pitch,
                std::abs(std::atan2(d.z(), std::hypot(d.x(), d.y())) - pitch_c));
        }
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    Viewpoint vp;
    vp.position = position;
    vp.yaw = wrap_angle(yaw_c + sigma_scale * sigma_yaw * gauss(rng));
    vp.pitch = std::clamp(pitch_c + sigma_scale * sigma_pitch * gauss(rng), -M_PI / 2.0, 0.0);
    return vp;
}

namespace {

bool position_allowed(const Vec3& p, const Scene& scene, const OccupancyMap& map,
                      const SamplerParams& params) {
    if (!scene.allowed_space.contains(p)) return false;
    for (const auto& zone : scene.no_fly_zones)
        if (zone.contains(p)) return false;
    return is_free_box(map, Aabb::from_center(p, params.clearance_half_extents()));
}

bool too_close(const Vec3& p, double step_p, const std::vector<Viewpoint>& existing,
               const std::vector<double>& steps, const SamplerParams& params) {
    for (size_t i = 0; i < existing.size(); ++i) {
        double threshold = params.min_separation_factor * std::min(step_p, steps[i]);
        if ((existing[i].position - p).squaredNorm() < threshold * threshold) return true;
    }
    return false;
}

}  // namespace

std::vector<Viewpoint> generate_viewpoints(const std::vector<Viewpoint>& seeds,
                                           const OccupancyMap& map, const Scene& scene,
                                           const SamplerParams& params) {
    if (seeds.empty()) throw std::invalid_argument("generate_viewpoints: no seeds");
    std::mt19937_64 rng(params.rng_seed);

    std::vector<Viewpoint> candidates;
    std::vector<double> steps;
    std::vector<Vec3> frontier;

    auto try_add = [&](const Vec3& p, bool keep_orientation, const Viewpoint& seed_vp) {
        if (int(candidates.size()) >= params.max_viewpoints) return;
        double step_p = compute_step_size(p, scene.roi, params);
        if (!position_allowed(p, scene, map, params)) return;
        if (too_close(p, step_p, candidates, steps, params)) return;
        Viewpoint vp = keep_orientation
                           ? seed_vp
                           : sample_orientation(p, scene.roi, rng, params.orientation_sigma_scale);
        vp.position = p;
        candidates.push_back(vp);
        steps.push_back(step_p);
        frontier.push_back(p);
    };

    bool any_seed_free = false;
    for (const auto& seed : seeds) {
        if (position_allowed(seed.position, scene, map, params)) any_seed_free = true;
        try_add(seed.position, true, seed);
    }
    if (!any_seed_free) throw std::runtime_error("generate_viewpoints: no seed in free space");

    static const Vec3 kAxial[6] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                   {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    int random_draw_failures = 0;
    const int max_random_failures = 1000;
    while (int(candidates.size()) < params.max_viewpoints) {
        if (!frontier.empty()) {
            // Random pop from the exploration front.
            size_t pick = size_t(unit(rng) * frontier.size());
            pick = std::min(pick, frontier.size() - 1);
            Vec3 ref = frontier[pick];
            frontier[pick] = frontier.back();
            frontier.pop_back();
            double step = compute_step_size(ref, scene.roi, params);
            for (const auto& dir : kAxial) try_add(ref + step * dir, false, {});
        } else if (int(candidates.size()) < params.min_viewpoints &&
                   random_draw_failures < max_random_failures) {
            Vec3 p;
            for (int i = 0; i < 3; ++i)
                p[i] = scene.allowed_space.min[i] +
                       unit(rng) * (scene.allowed_space.max[i] - scene.allowed_space.min[i]);
            size_t before = candidates.size();
            try_add(p, false, {});
            if (candidates.size() == before) ++random_draw_failures;
        } else {
            break;
        }
    }
    return candidates;
}

namespace {

struct RrtTree {
    std::vector<Vec3> points;
    std::vector<int> parent;
    std::vector<double> cost;

    int nearest(const Vec3& p) const {
        int best = 0;
        double best_d = (points[0] - p).squaredNorm();
        for (size_t i = 1; i < points.size(); ++i) {
            double d = (points[i] - p).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = int(i);
            }
        }
        return best;
    }
};

}  // namespace

std::optional<Motion> find_motion(const Vec3& a, const Vec3& b, const OccupancyMap& map,
                                  const Vec3& drone_half_extents, const Aabb& sample_space,
                                  const RrtParams& params) {
    if (is_free_segment(map, a, b, drone_half_extents, params.free_step))
        return Motion::from_waypoints({a, b});

    std::mt19937_64 rng(params.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Informed sampling: detours live near the endpoints, so draw samples
    // from the pair's bounding box inflated by a distance-scaled margin
    // rather than the whole allowed space.
    double margin = std::max(2.0 * params.step_size, 0.25 * (b - a).norm());
    Aabb region;
    for (int i = 0; i < 3; ++i) {
        region.min[i] = std::max(std::min(a[i], b[i]) - margin, sample_space.min[i]);
        region.max[i] = std::min(std::max(a[i], b[i]) + margin, sample_space.max[i]);
    }

    RrtTree tree;
    tree.points.push_back(a);
    tree.parent.push_back(-1);
    tree.cost.push_back(0.0);

    int goal_node = -1;
    double goal_cost = kInf;

    for (int iter = 0; iter < params.max_iterations; ++iter) {
        Vec3 sample;
        if (unit(rng) < params.goal_bias) {
            sample = b;
        } else {
            for (int i = 0; i < 3; ++i)
                sample[i] = region.min[i] + unit(rng) * (region.max[i] - region.min[i]);
        }
        int near = tree.nearest(sample);
        Vec3 from = tree.points[near];
        Vec3 delta = sample - from;
        double dist = delta.norm();
        if (dist < 1e-9) continue;
        Vec3 candidate = dist > params.step_size ? Vec3(from + delta * (params.step_size / dist))
                                                 : sample;
        if (!is_free_segment(map, from, candidate, drone_half_extents, params.free_step))
            continue;

        // Choose the best parent within the shrinking neighborhood radius.
        double n = double(tree.points.size());
        double radius = std::min(params.rewire_gamma * std::cbrt(std::log(n + 1.0) / (n + 1.0)),
                                 4.0 * params.step_size);
        int best_parent = near;
        double best_cost = tree.cost[near] + (candidate - from).norm();
        std::vector<int> neighborhood;
        for (size_t i = 0; i < tree.points.size(); ++i) {
            double d = (tree.points[i] - candidate).norm();
            if (d <= radius) {
                neighborhood.push_back(int(i));
                double c = tree.cost[i] + d;
                if (c < best_cost &&
                    is_free_segment(map, tree.points[i], candidate, drone_half_extents,
                                    params.free_step)) {
                    best_cost = c;
                    best_parent = int(i);
                }
            }
        }
        int node = int(tree.points.size());
        tree.points.push_back(candidate);
        tree.parent.push_back(best_parent);
        tree.cost.push_back(best_cost);

        // Rewire neighbors through the new node.
        for (int i : neighborhood) {
            double c = best_cost + (tree.points[i] - candidate).norm();
            if (c < tree.cost[i] &&
                is_free_segment(map, candidate, tree.points[i], drone_half_extents,
                                params.free_step)) {
                tree.parent[i] = node;
                tree.cost[i] = c;
            }
        }

        // Try to connect the new node to the goal.
        double to_goal = (b - candidate).norm();
        if (to_goal <= params.step_size &&
            is_free_segment(map, candidate, b, drone_half_extents, params.free_step)) {
            double c = best_cost + to_goal;
            if (c < goal_cost) {
                goal_cost = c;
                goal_node = node;
            }
        }
    }

    if (goal_node < 0) return std::nullopt;
    std::vector<Vec3> waypoints;
    waypoints.push_back(b);
    for (int v = goal_node; v != -1; v = tree.parent[v]) waypoints.push_back(tree.points[v]);
    std::reverse(waypoints.begin(), waypoints.end());
    return Motion::from_waypoints(std::move(waypoints));
}

void find_motions(ViewpointGraph& graph, const std::vector<ViewpointObservation>& observations,
                  const OccupancyMap& map, const Aabb& sample_space,
                  const EdgeBuildParams& params) {
    const auto& nodes = graph.nodes();
    const int n = graph.size();

    // Candidate pairs: K nearest neighbors per node, deduplicated.
    std::vector<EdgeKey> pairs;
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> dists;
        dists.reserve(n - 1);
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            dists.push_back({(nodes[j].viewpoint.position - nodes[i].viewpoint.position).norm(), j});
        }
        int k = std::min<int>(params.k_neighbors, int(dists.size()));
        std::partial_sort(dists.begin(), dists.begin() + k, dists.end());
        for (int t = 0; t < k; ++t) pairs.push_back(make_edge_key(i, dists[t].second));
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    std::vector<std::optional<Motion>> motions(pairs.size());
    auto work = [&](size_t begin, size_t end) {
        for (size_t p = begin; p < end; ++p) {
            auto [i, j] = pairs[p];
            if (!matchable(observations[i].lowres_set, observations[j].lowres_set,
                           params.matchability_alpha))
                continue;
            RrtParams rrt = params.rrt;
            // Per-pair seed keeps results independent of scheduling.
            rrt.rng_seed = params.rrt.rng_seed * 1000003ULL + std::uint64_t(i) * 2654435761ULL +
                           std::uint64_t(j);
            motions[p] = find_motion(nodes[i].viewpoint.position, nodes[j].viewpoint.position,
                                     map, params.drone_half_extents, sample_space, rrt);
        }
    };

    int threads = std::max(1, params.num_threads);
    if (threads == 1 || pairs.size() < 2 * size_t(threads)) {
        work(0, pairs.size());
    } else {
        std::vector<std::thread> workers;
        size_t chunk = (pairs.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            size_t begin = t * chunk;
            size_t end = std::min(pairs.size(), begin + chunk);
            if (begin >= end) break;
            workers.emplace_back(work, begin, end);
        }
        for (auto& w : workers) w.join();
    }

    for (size_t p = 0; p < pairs.size(); ++p)
        if (motions[p]) graph.add_edge(pairs[p].first, pairs[p].second, std::move(*motions[p]));
}

void save_graph_json(const ViewpointGraph& graph, const std::string& path) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (const auto& node : graph.nodes()) {
        j["nodes"].push_back({{"id", node.id},
                              {"position", {node.viewpoint.position.x(),
                                            node.viewpoint.position.y(),
                                            node.viewpoint.position.z()}},
                              {"yaw", node.viewpoint.yaw},
                              {"pitch", node.viewpoint.pitch}});
    }
    j["edges"] = nlohmann::json::array();
    for (const auto& [key, motion] : graph.edges()) {
        nlohmann::json wps = nlohmann::json::array();
        for (const auto& w : motion.waypoints) wps.push_back({w.x(), w.y(), w.z()});
        j["edges"].push_back(
            {{"a", key.first}, {"b", key.second}, {"length", motion.length}, {"waypoints", wps}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write graph: " + path);
    out << j.dump(2) << '\n';
}

ViewpointGraph load_graph_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open graph: " + path);
    nlohmann::json j;
    in >> j;
    ViewpointGraph graph;
    for (const auto& n : j.at("nodes")) {
        Viewpoint vp;
        vp.position = vec3_from_json(n.at("position"));
        vp.yaw = n.at("yaw");
        vp.pitch = n.at("pitch");
        graph.add_node(vp);
    }
    for (const auto& e : j.at("edges")) {
        std::vector<Vec3> wps;
        for (const auto& w : e.at("waypoints")) wps.push_back(vec3_from_json(w));
        graph.add_edge(e.at("a"), e.at("b"), Motion::from_waypoints(std::move(wps)));
    }
    return graph;
}

}  // namespace plan3d
