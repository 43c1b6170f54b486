#ifndef PLAN3D_EVALUATION_HPP_
#define PLAN3D_EVALUATION_HPP_

#include <string>
#include <vector>

#include "plan3d/planner.hpp"
#include "plan3d/scene.hpp"

namespace plan3d {

struct FusionParams {
    double max_distance = 80.0;        // meters, depth cutoff
    double max_incidence = 70.0;       // degrees between view ray and surface normal
    int min_support = 3;               // measurements within support_radius, self included
    double support_radius = 0.1;       // meters; free parameter, flagged in reports
    double fusion_voxel = 0.05;        // meters, mean-pooling grid
};

struct MetricsReport {
    double precision = 0.0;  // percent
    double recall = 0.0;     // percent
    double f_score = 0.0;    // percent, 2PR/(P+R)
    double delta = 0.1;      // meters
    std::size_t reconstruction_matched = 0;
    std::size_t reconstruction_total = 0;
    std::size_t ground_truth_matched = 0;
    std::size_t ground_truth_total = 0;
    bool empty_input = false;  // either cloud was empty; metrics defined zero
};

inline double f_score_of(double precision, double recall) {
    double sum = precision + recall;
    return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

// One rendered depth/normal image per trajectory entry (both roles).
std::vector<DepthNormalImage> simulate_capture(const Scene& scene, const Trajectory& trajectory,
                                               const CameraIntrinsics& intrinsics,
                                               int num_threads = 1);

// Back-projects depth pixels passing the distance and incidence filters,
// drops points with fewer than min_support measurements within
// support_radius, mean-pools on the fusion voxel grid and clips to roi.
std::vector<Vec3> fuse_depth_maps(const std::vector<DepthNormalImage>& images,
                                  const FusionParams& params, const CameraIntrinsics& intrinsics,
                                  const Aabb& roi, int num_threads = 1);

MetricsReport precision_recall_f1(const std::vector<Vec3>& reconstruction,
                                  const std::vector<Vec3>& ground_truth, double delta);

std::string metrics_to_json_string(const MetricsReport& report);
MetricsReport metrics_from_json_string(const std::string& text);

struct ComparisonRow {
    std::string method;
    MetricsReport metrics;
    double achieved_score = 0.0;
    double budget_cost = 0.0;
    double total_length = 0.0;
    int viewpoint_count = 0;
};

// Aligned-column text table; parses back losslessly via parse_comparison_table.
std::string format_comparison_table(const std::vector<ComparisonRow>& rows);
std::vector<ComparisonRow> parse_comparison_table(const std::string& table);
std::string comparison_to_json_string(const std::vector<ComparisonRow>& rows);

}  // namespace plan3d

#endif  // PLAN3D_EVALUATION_HPP_
