#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plan3d/config_json.hpp"
#include "plan3d/evaluation.hpp"
#include "plan3d/pipeline.hpp"
#include "plan3d/procedural.hpp"

namespace fs = std::filesystem;
using namespace plan3d;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitIo = 3;

int classify_error(const std::string& message) {
    for (const char* marker : {"cannot open", "cannot write", "missing", "bad magic"})
        if (message.find(marker) != std::string::npos) return kExitIo;
    return kExitInfeasible;
}

void save_poses_json(const std::vector<Viewpoint>& poses, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& p : poses)
        j.push_back({{"position", {p.position.x(), p.position.y(), p.position.z()}},
                     {"yaw", p.yaw},
                     {"pitch", p.pitch}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write poses: " + path);
    out << j.dump(2) << '\n';
}

std::vector<Viewpoint> load_poses_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open poses: " + path);
    nlohmann::json j;
    in >> j;
    std::vector<Viewpoint> poses;
    for (const auto& p : j) {
        Viewpoint vp;
        vp.position = vec3_from_json(p.at("position"));
        vp.yaw = p.at("yaw");
        vp.pitch = p.at("pitch");
        poses.push_back(vp);
    }
    return poses;
}

struct Paths {
    fs::path out;
    fs::path manifest() const { return out / "manifest.json"; }
    fs::path config_snapshot() const { return out / "config.json"; }
    fs::path map() const { return out / "map.bin"; }
    fs::path init_poses() const { return out / "init_poses.json"; }
    fs::path graph() const { return out / "graph.json"; }
    fs::path observations() const { return out / "observations.bin"; }
    fs::path trajectory() const { return out / "trajectory.json"; }
    fs::path metrics() const { return out / "metrics.json"; }
    fs::path comparison_txt() const { return out / "comparison.txt"; }
    fs::path comparison_json() const { return out / "comparison.json"; }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_config_snapshot(const PipelineConfig& config, const Paths& paths) {
    nlohmann::json j = pipeline_config_to_json(config);
    j["parameter_hash"] = config_hash(config);
    std::ofstream out(paths.config_snapshot());
    if (!out) throw std::runtime_error("cannot write config snapshot");
    out << j.dump(2) << '\n';
}

int cmd_init_scan(const PipelineConfig& config, const Paths& paths) {
    RunManifest manifest = load_manifest(paths.manifest().string());
    std::string hash = config_hash(config);
    if (manifest.stage_current("init-scan", hash)) {
        std::cout << "init-scan: up to date\n";
        return kExitOk;
    }
    auto start = std::chrono::steady_clock::now();
    Scene scene = scene_from_config(config);
    InitScanResult result = run_init_scan(config, scene);
    save_occupancy_map(result.map, paths.map().string());
    save_poses_json(result.poses, paths.init_poses().string());
    manifest.record_stage("init-scan", hash,
                          {paths.map().string(), paths.init_poses().string()},
                          seconds_since(start));
    save_manifest(manifest, paths.manifest().string());
    std::cout << "init-scan: " << result.poses.size() << " poses, voxels free "
              << result.histogram.free << " occupied " << result.histogram.occupied
              << " unknown " << result.histogram.unknown << '\n';
    return kExitOk;
}

int cmd_plan(const PipelineConfig& config, const Paths& paths) {
    RunManifest manifest = load_manifest(paths.manifest().string());
    std::string hash = config_hash(config);
    if (manifest.stage_current("plan", hash)) {
        std::cout << "plan: up to date\n";
        return kExitOk;
    }
    auto start = std::chrono::steady_clock::now();
    Scene scene = scene_from_config(config);
    OccupancyMap map = load_occupancy_map(paths.map().string());
    std::vector<Viewpoint> seeds = load_poses_json(paths.init_poses().string());
    PlanResult result = run_plan(config, scene, map, seeds, config.method);
    save_graph_json(result.graph, paths.graph().string());
    save_observations(result.observations, paths.observations().string());
    save_trajectory_json(result.trajectory, paths.trajectory().string(), hash);
    manifest.record_stage("plan", hash,
                          {paths.graph().string(), paths.observations().string(),
                           paths.trajectory().string()},
                          seconds_since(start));
    save_manifest(manifest, paths.manifest().string());
    std::cout << "plan: " << result.graph.size() << " candidates, "
              << result.graph.edges().size() << " edges, score "
              << result.trajectory.achieved_score << ", budget cost "
              << result.trajectory.budget_cost << '\n';
    return kExitOk;
}

int cmd_evaluate(const PipelineConfig& config, const Paths& paths) {
    Scene scene = scene_from_config(config);
    Trajectory trajectory = load_trajectory_json(paths.trajectory().string());
    std::vector<Viewpoint> initial;
    if (config.include_initial_scan && fs::exists(paths.init_poses()))
        initial = load_poses_json(paths.init_poses().string());
    MetricsReport metrics = run_evaluate(config, scene, trajectory, initial);
    std::ofstream out(paths.metrics());
    if (!out) throw std::runtime_error("cannot write metrics");
    out << metrics_to_json_string(metrics) << '\n';
    std::cout << "P " << metrics.precision << "  R " << metrics.recall << "  F "
              << metrics.f_score << "  (delta " << metrics.delta << " m)\n";
    return kExitOk;
}

int cmd_compare(const PipelineConfig& config, const Paths& paths,
                std::vector<std::string> methods) {
    if (methods.empty())
        methods = {"recursive_greedy", "greedy", "cost_benefit", "circle", "meander",
                   "hemisphere"};
    Scene scene = scene_from_config(config);
    std::vector<ComparisonRow> rows = run_comparison(scene, methods, config.budget, config);
    std::string table = format_comparison_table(rows);
    std::ofstream txt(paths.comparison_txt());
    if (!txt) throw std::runtime_error("cannot write comparison table");
    txt << table;
    std::ofstream js(paths.comparison_json());
    if (!js) throw std::runtime_error("cannot write comparison json");
    js << comparison_to_json_string(rows) << '\n';
    std::cout << table;
    return kExitOk;
}

int cmd_iterate(const PipelineConfig& config, const Paths& paths, int rounds) {
    Scene scene = scene_from_config(config);
    IterateResult result = run_iterate(config, scene, rounds);
    save_occupancy_map(result.map, paths.map().string());
    std::string hash = config_hash(config);
    for (size_t r = 0; r < result.rounds.size(); ++r) {
        fs::path traj = paths.out / ("trajectory_round" + std::to_string(r + 1) + ".json");
        save_trajectory_json(result.rounds[r].trajectory, traj.string(), hash);
        const ClassHistogram& h = result.rounds[r].histogram;
        std::cout << "round " << (r + 1) << ": score "
                  << result.rounds[r].trajectory.achieved_score << ", voxels free " << h.free
                  << " occupied " << h.occupied << " unknown " << h.unknown << '\n';
    }
    if (!result.rounds.empty())
        save_trajectory_json(result.rounds.back().trajectory, paths.trajectory().string(), hash);
    return kExitOk;
}

int cmd_export(const PipelineConfig& config, const Paths& paths) {
    Scene scene = scene_from_config(config);
    export_scene(scene, (paths.out / "scene.obj").string(),
                 (paths.out / "scene_config.json").string());
    GroundTruthParams gt = config.ground_truth;
    gt.rng_seed = config.rng_seed;
    save_point_cloud_ply((paths.out / "ground_truth.ply").string(),
                         sample_ground_truth_points(scene, gt));
    if (fs::exists(paths.map())) {
        OccupancyMap map = load_occupancy_map(paths.map().string());
        export_occupancy_ply(map, (paths.out / "occupancy.ply").string());
    }
    std::cout << "export: wrote scene, ground truth"
              << (fs::exists(paths.map()) ? ", occupancy" : "") << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plan3d: budget-constrained viewpoint trajectory planning pipeline"};
    app.require_subcommand(1);

    std::string config_path, method_flag, out_flag;
    std::uint64_t seed_flag = 0;
    int threads_flag = 0, rounds = 1;
    double budget_flag = 0.0;
    std::vector<std::string> methods;

    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--seed", seed_flag, "rng seed override");
    app.add_option("--threads", threads_flag, "worker thread count");
    app.add_option("--budget", budget_flag, "budget override, meters");
    app.add_option("--method", method_flag, "solver/baseline method");
    app.add_option("--out", out_flag, "output directory");

    CLI::App* sub_init = app.add_subcommand("init-scan", "fly the initial pattern, build the map");
    CLI::App* sub_plan = app.add_subcommand("plan", "build graph and plan a trajectory");
    CLI::App* sub_eval = app.add_subcommand("evaluate", "simulate, fuse, score");
    CLI::App* sub_cmp = app.add_subcommand("compare", "run all methods and tabulate");
    sub_cmp->add_option("--methods", methods, "methods to compare")->delimiter(',');
    CLI::App* sub_iter = app.add_subcommand("iterate", "alternate plan/capture/integrate");
    sub_iter->add_option("--rounds", rounds, "iteration rounds");
    CLI::App* sub_export = app.add_subcommand("export", "dump scene/GT/occupancy artifacts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        PipelineConfig config;
        if (!config_path.empty()) config = load_pipeline_config(config_path);

        if (const char* env = std::getenv("PLAN3D_OUT")) config.output_dir = env;
        if (const char* env = std::getenv("PLAN3D_THREADS")) config.num_threads = std::atoi(env);
        if (app.count("--seed")) config.rng_seed = seed_flag;
        if (app.count("--threads")) config.num_threads = threads_flag;
        if (app.count("--budget")) config.budget.budget = budget_flag;
        if (app.count("--method")) config.method = method_flag;
        if (app.count("--out")) config.output_dir = out_flag;
        if (config.num_threads < 1) config.num_threads = 1;

        Paths paths{fs::path(config.output_dir)};
        fs::create_directories(paths.out);
        write_config_snapshot(config, paths);

        if (sub_init->parsed()) return cmd_init_scan(config, paths);
        if (sub_plan->parsed()) return cmd_plan(config, paths);
        if (sub_eval->parsed()) return cmd_evaluate(config, paths);
        if (sub_cmp->parsed()) return cmd_compare(config, paths, methods);
        if (sub_iter->parsed()) return cmd_iterate(config, paths, rounds);
        if (sub_export->parsed()) return cmd_export(config, paths);
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return classify_error(e.what());
    }
}
