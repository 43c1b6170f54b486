#ifndef PLAN3D_PIPELINE_HPP_
#define PLAN3D_PIPELINE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plan3d/evaluation.hpp"
#include "plan3d/graph.hpp"
#include "plan3d/occupancy.hpp"
#include "plan3d/planner.hpp"
#include "plan3d/scene.hpp"
#include "plan3d/visibility.hpp"

namespace plan3d {

// Full parameter snapshot for a pipeline run. Every field has a usable
// default, so a minimal config is just a scene plus a budget. Unknown JSON
// keys are rejected.
struct PipelineConfig {
    // Scene: either a mesh path with explicit boxes, or a bundled builtin.
    std::string scene_mesh;                  // OBJ/PLY; empty selects the builtin
    std::string scene_builtin = "courtyard"; // courtyard | cube
    std::optional<SceneConfig> scene_boxes;  // required with scene_mesh

    CameraIntrinsics camera;          // full capture resolution
    double mapping_scale = 0.5;       // render scale for map integration
    double observation_scale = 0.25;  // render scale for candidate ray casts
    double evaluation_scale = 0.5;    // render scale for reconstruction capture
    int lowres_width = 60;            // registration-overlap render
    int lowres_height = 45;

    OccupancyParams occupancy;
    InformationParams information;
    SamplerParams sampler;
    RrtParams rrt;
    EdgeBuildParams edges;
    BudgetParams budget;
    FusionParams fusion;
    GroundTruthParams ground_truth;

    PatternParams initial_scan;  // default: circle of 20 poses
    PatternParams circle_pattern;
    PatternParams meander_pattern{PatternKind::Meander};
    PatternParams hemisphere_pattern{PatternKind::Hemisphere};

    std::string method = "recursive_greedy";
    double metric_delta = 0.1;  // meters, precision/recall closeness
    bool include_initial_scan = true;
    std::uint64_t rng_seed = 1;
    int num_threads = 1;
    int rounds = 1;
    std::string output_dir = "out";
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::json pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::string& path);

// FNV-1a content hashes used by the run manifest and for the parameter
// snapshot hash embedded in stage artifacts.
std::uint64_t fnv1a_bytes(const void* data, std::size_t size);
std::uint64_t fnv1a_string(const std::string& text);
std::optional<std::uint64_t> fnv1a_file(const std::string& path);
std::string config_hash(const PipelineConfig& config);

struct StageRecord {
    std::string params_hash;
    std::map<std::string, std::string> outputs;  // file -> content hash
    double seconds = 0.0;
};

// Per-stage bookkeeping: a stage reruns only when its parameter hash changed
// or an output file is missing or was modified.
struct RunManifest {
    std::map<std::string, StageRecord> stages;

    bool stage_current(const std::string& stage, const std::string& params_hash) const;
    void record_stage(const std::string& stage, const std::string& params_hash,
                      const std::vector<std::string>& output_files, double seconds);
};

void save_manifest(const RunManifest& manifest, const std::string& path);
RunManifest load_manifest(const std::string& path);

Scene scene_from_config(const PipelineConfig& config);

// Derived camera setups.
CameraIntrinsics mapping_intrinsics(const PipelineConfig& config);
CameraIntrinsics observation_intrinsics(const PipelineConfig& config);
CameraIntrinsics evaluation_intrinsics(const PipelineConfig& config);
CameraIntrinsics lowres_intrinsics(const PipelineConfig& config);

struct InitScanResult {
    std::vector<Viewpoint> poses;
    OccupancyMap map;
    ClassHistogram histogram;
};

// Flies the configured initial pattern, renders depth maps and integrates
// them into a fresh map. Throws if a pattern pose ends up in occupied space.
InitScanResult run_init_scan(const PipelineConfig& config, const Scene& scene);

struct PlanResult {
    ViewpointGraph graph;
    std::vector<ViewpointObservation> observations;
    Trajectory trajectory;
};

// Candidate generation, observation ray casts, graph construction and the
// configured solver. Seeds are the initial-scan poses plus any prior-round
// viewpoints.
PlanResult run_plan(const PipelineConfig& config, const Scene& scene, const OccupancyMap& map,
                    const std::vector<Viewpoint>& seeds, const std::string& method);

// Solver / baseline dispatch by method name.
Trajectory solve_method(const std::string& method, const PipelineConfig& config,
                        const Scene& scene, const PlannerContext& ctx);

// Simulates capture along the trajectory (optionally with the initial-scan
// poses), fuses, and scores against the sampled ground truth.
MetricsReport run_evaluate(const PipelineConfig& config, const Scene& scene,
                           const Trajectory& trajectory,
                           const std::vector<Viewpoint>& initial_poses);

// Full pipeline per method from a shared initial scan, map, graph and
// observations; one row per method.
std::vector<ComparisonRow> run_comparison(const Scene& scene,
                                          const std::vector<std::string>& methods,
                                          const BudgetParams& budget,
                                          const PipelineConfig& config);

struct IterateRound {
    Trajectory trajectory;
    ClassHistogram histogram;  // map state after integrating the round
};

struct IterateResult {
    OccupancyMap map;
    std::vector<IterateRound> rounds;
};

// Alternates plan -> capture -> integrate, seeding each round's candidate
// generation with the prior round's viewpoints.
IterateResult run_iterate(const PipelineConfig& config, const Scene& scene, int rounds);

}  // namespace plan3d

#endif  // PLAN3D_PIPELINE_HPP_
