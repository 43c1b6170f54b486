#include "plan3d/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "plan3d/config_json.hpp"
#include "plan3d/procedural.hpp"

namespace plan3d {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& scope) {
    if (!j.is_object()) throw std::runtime_error("config: " + scope + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key))
            throw std::runtime_error("config: unknown key '" + key + "' in " + scope);
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

PatternKind pattern_kind_from_string(const std::string& name) {
    if (name == "circle") return PatternKind::Circle;
    if (name == "ellipse") return PatternKind::Ellipse;
    if (name == "meander") return PatternKind::Meander;
    if (name == "hemisphere") return PatternKind::Hemisphere;
    throw std::runtime_error("config: unknown pattern kind '" + name + "'");
}

std::string pattern_kind_to_string(PatternKind kind) {
    switch (kind) {
        case PatternKind::Circle: return "circle";
        case PatternKind::Ellipse: return "ellipse";
        case PatternKind::Meander: return "meander";
        case PatternKind::Hemisphere: return "hemisphere";
    }
    return "circle";
}

PatternParams pattern_from_json(const json& j, PatternParams defaults, const std::string& scope) {
    check_keys(j,
               {"kind", "radius", "radius_minor", "extent_x", "extent_y", "grid_x", "grid_y",
                "altitude", "viewpoint_count", "look_down"},
               scope);
    PatternParams p = defaults;
    if (j.contains("kind")) p.kind = pattern_kind_from_string(j.at("kind"));
    read_field(j, "radius", p.radius);
    read_field(j, "radius_minor", p.radius_minor);
    read_field(j, "extent_x", p.extent_x);
    read_field(j, "extent_y", p.extent_y);
    read_field(j, "grid_x", p.grid_x);
    read_field(j, "grid_y", p.grid_y);
    read_field(j, "altitude", p.altitude);
    read_field(j, "viewpoint_count", p.viewpoint_count);
    read_field(j, "look_down", p.look_down);
    return p;
}

json pattern_to_json(const PatternParams& p) {
    return {{"kind", pattern_kind_to_string(p.kind)},
            {"radius", p.radius},
            {"radius_minor", p.radius_minor},
            {"extent_x", p.extent_x},
            {"extent_y", p.extent_y},
            {"grid_x", p.grid_x},
            {"grid_y", p.grid_y},
            {"altitude", p.altitude},
            {"viewpoint_count", p.viewpoint_count},
            {"look_down", p.look_down}};
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
    check_keys(j,
               {"scene", "camera", "render", "occupancy", "information", "sampler", "rrt",
                "edges", "budget", "fusion", "ground_truth", "initial_scan", "circle", "meander",
                "hemisphere", "method", "metric_delta", "include_initial_scan", "rng_seed",
                "num_threads", "rounds", "output_dir"},
               "top level");
    PipelineConfig c;

    if (j.contains("scene")) {
        const json& s = j.at("scene");
        check_keys(s, {"mesh", "builtin", "roi", "allowed_space", "no_fly_zones"}, "scene");
        read_field(s, "mesh", c.scene_mesh);
        read_field(s, "builtin", c.scene_builtin);
        if (s.contains("roi") || s.contains("allowed_space")) {
            SceneConfig boxes;
            boxes.roi = aabb_from_json(s.at("roi"));
            boxes.allowed_space = aabb_from_json(s.at("allowed_space"));
            if (s.contains("no_fly_zones"))
                for (const auto& z : s.at("no_fly_zones"))
                    boxes.no_fly_zones.push_back(aabb_from_json(z));
            c.scene_boxes = boxes;
        }
        if (!c.scene_mesh.empty() && !c.scene_boxes)
            throw std::runtime_error("config: scene.mesh requires roi and allowed_space");
    }

    if (j.contains("camera")) {
        const json& cam = j.at("camera");
        check_keys(cam, {"width", "height", "focal_length"}, "camera");
        read_field(cam, "width", c.camera.width);
        read_field(cam, "height", c.camera.height);
        read_field(cam, "focal_length", c.camera.focal_length);
        c.information.focal_length = c.camera.focal_length;
    }

    if (j.contains("render")) {
        const json& r = j.at("render");
        check_keys(r,
                   {"mapping_scale", "observation_scale", "evaluation_scale", "lowres_width",
                    "lowres_height"},
                   "render");
        read_field(r, "mapping_scale", c.mapping_scale);
        read_field(r, "observation_scale", c.observation_scale);
        read_field(r, "evaluation_scale", c.evaluation_scale);
        read_field(r, "lowres_width", c.lowres_width);
        read_field(r, "lowres_height", c.lowres_height);
    }

    if (j.contains("occupancy")) {
        const json& o = j.at("occupancy");
        check_keys(o,
                   {"voxel_size", "p_hit", "p_miss", "clamp_min", "clamp_max", "oc_free",
                    "oc_occupied", "max_range"},
                   "occupancy");
        read_field(o, "voxel_size", c.occupancy.voxel_size);
        read_field(o, "p_hit", c.occupancy.p_hit);
        read_field(o, "p_miss", c.occupancy.p_miss);
        read_field(o, "clamp_min", c.occupancy.clamp_min);
        read_field(o, "clamp_max", c.occupancy.clamp_max);
        read_field(o, "oc_free", c.occupancy.oc_free);
        read_field(o, "oc_occupied", c.occupancy.oc_occupied);
        read_field(o, "max_range", c.occupancy.max_range);
    }

    if (j.contains("information")) {
        const json& i = j.at("information");
        check_keys(i,
                   {"xi", "beta_i_threshold", "beta_i_falloff", "beta_r_threshold",
                    "beta_r_falloff", "crease_distance", "crease_fallback_vi_i", "max_ray_range"},
                   "information");
        read_field(i, "xi", c.information.xi);
        read_field(i, "beta_i_threshold", c.information.beta_i_threshold);
        read_field(i, "beta_i_falloff", c.information.beta_i_falloff);
        read_field(i, "beta_r_threshold", c.information.beta_r_threshold);
        read_field(i, "beta_r_falloff", c.information.beta_r_falloff);
        read_field(i, "crease_distance", c.information.crease_distance);
        read_field(i, "crease_fallback_vi_i", c.information.crease_fallback_vi_i);
        read_field(i, "max_ray_range", c.information.max_ray_range);
    }

    if (j.contains("sampler")) {
        const json& s = j.at("sampler");
        check_keys(s,
                   {"base_step", "growth", "min_separation_factor", "min_viewpoints",
                    "max_viewpoints", "drone_box_size", "surface_clearance",
                    "orientation_sigma_scale"},
                   "sampler");
        read_field(s, "base_step", c.sampler.base_step);
        read_field(s, "growth", c.sampler.growth);
        read_field(s, "min_separation_factor", c.sampler.min_separation_factor);
        read_field(s, "min_viewpoints", c.sampler.min_viewpoints);
        read_field(s, "max_viewpoints", c.sampler.max_viewpoints);
        read_field(s, "drone_box_size", c.sampler.drone_box_size);
        read_field(s, "surface_clearance", c.sampler.surface_clearance);
        read_field(s, "orientation_sigma_scale", c.sampler.orientation_sigma_scale);
    }

    if (j.contains("rrt")) {
        const json& r = j.at("rrt");
        check_keys(r, {"max_iterations", "goal_bias", "step_size", "rewire_gamma", "free_step"},
                   "rrt");
        read_field(r, "max_iterations", c.rrt.max_iterations);
        read_field(r, "goal_bias", c.rrt.goal_bias);
        read_field(r, "step_size", c.rrt.step_size);
        read_field(r, "rewire_gamma", c.rrt.rewire_gamma);
        read_field(r, "free_step", c.rrt.free_step);
    }

    if (j.contains("edges")) {
        const json& e = j.at("edges");
        check_keys(e, {"k_neighbors", "matchability_alpha"}, "edges");
        read_field(e, "k_neighbors", c.edges.k_neighbors);
        read_field(e, "matchability_alpha", c.edges.matchability_alpha);
    }

    if (j.contains("budget")) {
        const json& b = j.at("budget");
        check_keys(b, {"budget", "per_viewpoint_cost"}, "budget");
        read_field(b, "budget", c.budget.budget);
        read_field(b, "per_viewpoint_cost", c.budget.per_viewpoint_cost);
    }

    if (j.contains("fusion")) {
        const json& f = j.at("fusion");
        check_keys(f,
                   {"max_distance", "max_incidence", "min_support", "support_radius",
                    "fusion_voxel"},
                   "fusion");
        read_field(f, "max_distance", c.fusion.max_distance);
        read_field(f, "max_incidence", c.fusion.max_incidence);
        read_field(f, "min_support", c.fusion.min_support);
        read_field(f, "support_radius", c.fusion.support_radius);
        read_field(f, "fusion_voxel", c.fusion.fusion_voxel);
    }

    if (j.contains("ground_truth")) {
        const json& g = j.at("ground_truth");
        check_keys(g, {"max_triangle_area", "samples_per_triangle", "resample_voxel"},
                   "ground_truth");
        read_field(g, "max_triangle_area", c.ground_truth.max_triangle_area);
        read_field(g, "samples_per_triangle", c.ground_truth.samples_per_triangle);
        read_field(g, "resample_voxel", c.ground_truth.resample_voxel);
    }

    if (j.contains("initial_scan"))
        c.initial_scan = pattern_from_json(j.at("initial_scan"), c.initial_scan, "initial_scan");
    if (j.contains("circle"))
        c.circle_pattern = pattern_from_json(j.at("circle"), c.circle_pattern, "circle");
    if (j.contains("meander"))
        c.meander_pattern = pattern_from_json(j.at("meander"), c.meander_pattern, "meander");
    if (j.contains("hemisphere"))
        c.hemisphere_pattern =
            pattern_from_json(j.at("hemisphere"), c.hemisphere_pattern, "hemisphere");

    read_field(j, "method", c.method);
    read_field(j, "metric_delta", c.metric_delta);
    read_field(j, "include_initial_scan", c.include_initial_scan);
    read_field(j, "rng_seed", c.rng_seed);
    read_field(j, "num_threads", c.num_threads);
    read_field(j, "rounds", c.rounds);
    read_field(j, "output_dir", c.output_dir);
    return c;
}

nlohmann::json pipeline_config_to_json(const PipelineConfig& c) {
    json scene = {{"mesh", c.scene_mesh}, {"builtin", c.scene_builtin}};
    if (c.scene_boxes) {
        scene["roi"] = aabb_to_json(c.scene_boxes->roi);
        scene["allowed_space"] = aabb_to_json(c.scene_boxes->allowed_space);
        json zones = json::array();
        for (const auto& z : c.scene_boxes->no_fly_zones) zones.push_back(aabb_to_json(z));
        scene["no_fly_zones"] = zones;
    }
    return {
        {"scene", scene},
        {"camera",
         {{"width", c.camera.width},
          {"height", c.camera.height},
          {"focal_length", c.camera.focal_length}}},
        {"render",
         {{"mapping_scale", c.mapping_scale},
          {"observation_scale", c.observation_scale},
          {"evaluation_scale", c.evaluation_scale},
          {"lowres_width", c.lowres_width},
          {"lowres_height", c.lowres_height}}},
        {"occupancy",
         {{"voxel_size", c.occupancy.voxel_size},
          {"p_hit", c.occupancy.p_hit},
          {"p_miss", c.occupancy.p_miss},
          {"clamp_min", c.occupancy.clamp_min},
          {"clamp_max", c.occupancy.clamp_max},
          {"oc_free", c.occupancy.oc_free},
          {"oc_occupied", c.occupancy.oc_occupied},
          {"max_range", c.occupancy.max_range}}},
        {"information",
         {{"xi", c.information.xi},
          {"beta_i_threshold", c.information.beta_i_threshold},
          {"beta_i_falloff", c.information.beta_i_falloff},
          {"beta_r_threshold", c.information.beta_r_threshold},
          {"beta_r_falloff", c.information.beta_r_falloff},
          {"crease_distance", c.information.crease_distance},
          {"crease_fallback_vi_i", c.information.crease_fallback_vi_i},
          {"max_ray_range", c.information.max_ray_range}}},
        {"sampler",
         {{"base_step", c.sampler.base_step},
          {"growth", c.sampler.growth},
          {"min_separation_factor", c.sampler.min_separation_factor},
          {"min_viewpoints", c.sampler.min_viewpoints},
          {"max_viewpoints", c.sampler.max_viewpoints},
          {"drone_box_size", c.sampler.drone_box_size},
          {"surface_clearance", c.sampler.surface_clearance},
          {"orientation_sigma_scale", c.sampler.orientation_sigma_scale}}},
        {"rrt",
         {{"max_iterations", c.rrt.max_iterations},
          {"goal_bias", c.rrt.goal_bias},
          {"step_size", c.rrt.step_size},
          {"rewire_gamma", c.rrt.rewire_gamma},
          {"free_step", c.rrt.free_step}}},
        {"edges",
         {{"k_neighbors", c.edges.k_neighbors},
          {"matchability_alpha", c.edges.matchability_alpha}}},
        {"budget", {{"budget", c.budget.budget}, {"per_viewpoint_cost", c.budget.per_viewpoint_cost}}},
        {"fusion",
         {{"max_distance", c.fusion.max_distance},
          {"max_incidence", c.fusion.max_incidence},
          {"min_support", c.fusion.min_support},
          {"support_radius", c.fusion.support_radius},
          {"fusion_voxel", c.fusion.fusion_voxel}}},
        {"ground_truth",
         {{"max_triangle_area", c.ground_truth.max_triangle_area},
          {"samples_per_triangle", c.ground_truth.samples_per_triangle},
          {"resample_voxel", c.ground_truth.resample_voxel}}},
        {"initial_scan", pattern_to_json(c.initial_scan)},
        {"circle", pattern_to_json(c.circle_pattern)},
        {"meander", pattern_to_json(c.meander_pattern)},
        {"hemisphere", pattern_to_json(c.hemisphere_pattern)},
        {"method", c.method},
        {"metric_delta", c.metric_delta},
        {"include_initial_scan", c.include_initial_scan},
        {"rng_seed", c.rng_seed},
        {"num_threads", c.num_threads},
        {"rounds", c.rounds},
        {"output_dir", c.output_dir},
    };
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    json j;
    in >> j;
    return pipeline_config_from_json(j);
}

std::uint64_t fnv1a_bytes(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 14695981039346656037ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::uint64_t fnv1a_string(const std::string& text) { return fnv1a_bytes(text.data(), text.size()); }

std::optional<std::uint64_t> fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return fnv1a_string(buffer.str());
}

std::string config_hash(const PipelineConfig& config) {
    std::ostringstream out;
    out << std::hex << fnv1a_string(pipeline_config_to_json(config).dump());
    return out.str();
}

bool RunManifest::stage_current(const std::string& stage, const std::string& params_hash) const {
    auto it = stages.find(stage);
    if (it == stages.end()) return false;
    if (it->second.params_hash != params_hash) return false;
    for (const auto& [file, hash] : it->second.outputs) {
        auto current = fnv1a_file(file);
        if (!current) return false;
        std::ostringstream h;
        h << std::hex << *current;
        if (h.str() != hash) return false;
    }
    return true;
}

void RunManifest::record_stage(const std::string& stage, const std::string& params_hash,
                               const std::vector<std::string>& output_files, double seconds) {
    StageRecord record;
    record.params_hash = params_hash;
    record.seconds = seconds;
    for (const auto& file : output_files) {
        auto hash = fnv1a_file(file);
        if (!hash) throw std::runtime_error("manifest: missing stage output " + file);
        std::ostringstream h;
        h << std::hex << *hash;
        record.outputs[file] = h.str();
    }
    stages[stage] = std::move(record);
}

void save_manifest(const RunManifest& manifest, const std::string& path) {
    json j;
    for (const auto& [stage, record] : manifest.stages) {
        j[stage] = {{"params_hash", record.params_hash},
                    {"outputs", record.outputs},
                    {"seconds", record.seconds}};
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    out << j.dump(2) << '\n';
}

RunManifest load_manifest(const std::string& path) {
    RunManifest manifest;
    std::ifstream in(path);
    if (!in) return manifest;  // fresh run
    json j;
    in >> j;
    for (const auto& [stage, record] : j.items()) {
        StageRecord r;
        r.params_hash = record.at("params_hash");
        r.seconds = record.at("seconds");
        for (const auto& [file, hash] : record.at("outputs").items())
            r.outputs[file] = hash.get<std::string>();
        manifest.stages[stage] = std::move(r);
    }
    return manifest;
}

Scene scene_from_config(const PipelineConfig& config) {
    if (!config.scene_mesh.empty()) return load_scene(config.scene_mesh, *config.scene_boxes);
    if (config.scene_builtin == "courtyard") return make_courtyard_scene();
    if (config.scene_builtin == "cube") return make_cube_scene();
    throw std::runtime_error("config: unknown builtin scene '" + config.scene_builtin + "'");
}

CameraIntrinsics mapping_intrinsics(const PipelineConfig& config) {
    return config.camera.scaled(config.mapping_scale);
}

CameraIntrinsics observation_intrinsics(const PipelineConfig& config) {
    return config.camera.scaled(config.observation_scale);
}

CameraIntrinsics evaluation_intrinsics(const PipelineConfig& config) {
    return config.camera.scaled(config.evaluation_scale);
}

CameraIntrinsics lowres_intrinsics(const PipelineConfig& config) {
    double scale = double(config.lowres_width) / config.camera.width;
    return {config.lowres_width, config.lowres_height, config.camera.focal_length * scale};
}

namespace {

void integrate_poses(OccupancyMap& map, const Scene& scene,
                     const std::vector<Viewpoint>& poses, const CameraIntrinsics& intrinsics,
                     double max_range, int num_threads) {
    for (const auto& pose : poses) {
        DepthNormalImage image = render_depth_normal(scene, pose, intrinsics, num_threads);
        integrate_depth_map(map, image, intrinsics, max_range);
    }
}

}  // namespace

InitScanResult run_init_scan(const PipelineConfig& config, const Scene& scene) {
    InitScanResult result;
    result.poses = pattern_poses(config.initial_scan, scene.roi);
    result.map = OccupancyMap(config.occupancy);
    result.map.set_bounds(scene.allowed_space);
    integrate_poses(result.map, scene, result.poses, mapping_intrinsics(config),
                    config.occupancy.max_range, config.num_threads);
    // The flown corridor is known free: carve the drone clearance box along
    // the pattern, so candidate generation has free seeds even where the
    // inward-facing cameras never observed the space behind themselves.
    Vec3 clearance = config.sampler.clearance_half_extents();
    for (size_t i = 0; i < result.poses.size(); ++i) {
        const Vec3& a = result.poses[i].position;
        const Vec3& b = result.poses[(i + 1) % result.poses.size()].position;
        double len = (b - a).norm();
        int steps = std::max(1, int(std::ceil(len / config.occupancy.voxel_size)));
        for (int s = 0; s <= steps; ++s) {
            Vec3 p = a + (b - a) * (double(s) / steps);
            carve_free_box(result.map, Aabb::from_center(p, clearance));
        }
    }
    for (const auto& pose : result.poses) {
        if (result.map.classify(result.map.key_of(pose.position)) == VoxelClass::Occupied)
            throw std::runtime_error("init-scan: pattern pose in occupied space");
    }
    result.histogram = class_histogram(result.map);
    return result;
}

namespace {

std::vector<ViewpointObservation> compute_all_observations(const PipelineConfig& config,
                                                           const Scene& scene,
                                                           const OccupancyMap& map,
                                                           const ViewpointGraph& graph) {
    std::vector<ViewpointObservation> observations(graph.size());
    CameraIntrinsics obs_intr = observation_intrinsics(config);
    CameraIntrinsics low_intr = lowres_intrinsics(config);
    int n = graph.size();
    int threads = std::max(1, std::min(config.num_threads, n));
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
            observations[i] = compute_observation(scene, map, graph.nodes()[i].viewpoint,
                                                  obs_intr, low_intr, config.information);
            observations[i].viewpoint_id = i;
        }
    };
    if (threads == 1) {
        worker();
    } else {
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return observations;
}

}  // namespace

Trajectory solve_method(const std::string& method, const PipelineConfig& config,
                        const Scene& scene, const PlannerContext& ctx) {
    if (method == "recursive_greedy") return recursive_greedy(ctx, config.budget);
    if (method == "greedy") return greedy_baseline(ctx, config.budget);
    if (method == "cost_benefit") return cost_benefit_baseline(ctx, config.budget);
    if (method == "circle")
        return pattern_trajectory(config.circle_pattern, scene, nullptr, &config.budget);
    if (method == "meander")
        return pattern_trajectory(config.meander_pattern, scene, nullptr, &config.budget);
    if (method == "hemisphere")
        return pattern_trajectory(config.hemisphere_pattern, scene, &ctx, &config.budget);
    throw std::runtime_error("unknown method '" + method + "'");
}

PlanResult run_plan(const PipelineConfig& config, const Scene& scene, const OccupancyMap& map,
                    const std::vector<Viewpoint>& seeds, const std::string& method) {
    PlanResult result;

    SamplerParams sampler = config.sampler;
    sampler.rng_seed = config.rng_seed;
    std::vector<Viewpoint> candidates = generate_viewpoints(seeds, map, scene, sampler);
    if (candidates.empty()) throw std::runtime_error("plan: empty viewpoint graph");
    for (const auto& vp : candidates) result.graph.add_node(vp);

    result.observations = compute_all_observations(config, scene, map, result.graph);

    EdgeBuildParams edges = config.edges;
    edges.rrt = config.rrt;
    edges.rrt.rng_seed = config.rng_seed;
    edges.drone_half_extents = sampler.clearance_half_extents();
    edges.num_threads = config.num_threads;
    find_motions(result.graph, result.observations, map, scene.allowed_space, edges);

    PlannerContext ctx{&result.graph, &result.observations};
    result.trajectory = solve_method(method, config, scene, ctx);
    return result;
}

MetricsReport run_evaluate(const PipelineConfig& config, const Scene& scene,
                           const Trajectory& trajectory,
                           const std::vector<Viewpoint>& initial_poses) {
    Trajectory capture = trajectory;
    for (const auto& pose : initial_poses)
        capture.entries.push_back({-1, EntryRole::SparseMatch, pose});

    CameraIntrinsics intr = evaluation_intrinsics(config);
    std::vector<DepthNormalImage> images =
        simulate_capture(scene, capture, intr, config.num_threads);
    std::vector<Vec3> reconstruction =
        fuse_depth_maps(images, config.fusion, intr, scene.roi, config.num_threads);

    GroundTruthParams gt_params = config.ground_truth;
    gt_params.rng_seed = config.rng_seed;
    std::vector<Vec3> ground_truth = sample_ground_truth_points(scene, gt_params);
    return precision_recall_f1(reconstruction, ground_truth, config.metric_delta);
}

std::vector<ComparisonRow> run_comparison(const Scene& scene,
                                          const std::vector<std::string>& methods,
                                          const BudgetParams& budget,
                                          const PipelineConfig& base_config) {
    PipelineConfig config = base_config;
    config.budget = budget;

    InitScanResult init = run_init_scan(config, scene);
    // Graph and observations are method-independent; build them once.
    PlanResult shared = run_plan(config, scene, init.map, init.poses, "greedy");
    PlannerContext ctx{&shared.graph, &shared.observations};

    std::vector<ComparisonRow> rows;
    for (const auto& method : methods) {
        Trajectory trajectory = solve_method(method, config, scene, ctx);
        std::vector<Viewpoint> extra =
            config.include_initial_scan ? init.poses : std::vector<Viewpoint>{};
        ComparisonRow row;
        row.method = method;
        row.metrics = run_evaluate(config, scene, trajectory, extra);
        row.achieved_score = trajectory.achieved_score;
        row.budget_cost = trajectory.budget_cost;
        row.total_length = trajectory.total_length;
        row.viewpoint_count = int(trajectory.entries.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

IterateResult run_iterate(const PipelineConfig& config, const Scene& scene, int rounds) {
    if (rounds < 1) throw std::runtime_error("iterate: rounds must be >= 1");
    InitScanResult init = run_init_scan(config, scene);

    IterateResult result;
    result.map = std::move(init.map);
    std::vector<Viewpoint> seeds = init.poses;
    for (int round = 0; round < rounds; ++round) {
        PlanResult plan = run_plan(config, scene, result.map, seeds, config.method);
        std::vector<Viewpoint> captured;
        for (const auto& entry : plan.trajectory.entries) captured.push_back(entry.pose);
        integrate_poses(result.map, scene, captured, mapping_intrinsics(config),
                        config.occupancy.max_range, config.num_threads);
        seeds = captured;
        result.rounds.push_back({std::move(plan.trajectory), class_histogram(result.map)});
    }
    return result;
}

}  // namespace plan3d
