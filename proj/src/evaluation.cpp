#include "plan3d/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "plan3d/occupancy.hpp"

namespace plan3d {

std::vector<DepthNormalImage> simulate_capture(const Scene& scene, const Trajectory& trajectory,
                                               const CameraIntrinsics& intrinsics,
                                               int num_threads) {
    std::vector<DepthNormalImage> images;
    images.reserve(trajectory.entries.size());
    for (const auto& entry : trajectory.entries)
        images.push_back(render_depth_normal(scene, entry.pose, intrinsics, num_threads));
    return images;
}

namespace {

// Uniform-grid spatial hash over points, fixed cell size.
class PointGrid {
public:
    PointGrid(const std::vector<Vec3>& points, double cell) : points_(points), cell_(cell) {
        cells_.reserve(points.size());
        for (int i = 0; i < int(points.size()); ++i) cells_[key_of(points[i])].push_back(i);
    }

    // True if at least min_count points lie within radius of p (early exit).
    bool has_at_least(const Vec3& p, double radius, int min_count) const {
        double r2 = radius * radius;
        VoxelKey center = key_of(p);
        int count = 0;
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    auto it = cells_.find({center.ix + dx, center.iy + dy, center.iz + dz});
                    if (it == cells_.end()) continue;
                    for (int idx : it->second) {
                        if ((points_[idx] - p).squaredNorm() <= r2 && ++count >= min_count)
                            return true;
                    }
                }
        return false;
    }

    bool has_any(const Vec3& p, double radius) const { return has_at_least(p, radius, 1); }

private:
    VoxelKey key_of(const Vec3& p) const {
        return {std::int32_t(std::floor(p.x() / cell_)), std::int32_t(std::floor(p.y() / cell_)),
                std::int32_t(std::floor(p.z() / cell_))};
    }

    const std::vector<Vec3>& points_;
    double cell_;
    std::unordered_map<VoxelKey, std::vector<int>, VoxelKeyHash> cells_;
};

void parallel_for(int n, int num_threads, const std::function<void(int, int)>& body) {
    int threads = std::max(1, std::min(num_threads, n));
    if (threads == 1) {
        body(0, n);
        return;
    }
    std::vector<std::thread> pool;
    int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        int begin = t * chunk;
        int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(body, begin, end);
    }
    for (auto& th : pool) th.join();
}

}  // namespace

std::vector<Vec3> fuse_depth_maps(const std::vector<DepthNormalImage>& images,
                                  const FusionParams& params, const CameraIntrinsics& intrinsics,
                                  const Aabb& roi, int num_threads) {
    double cos_max = std::cos(params.max_incidence * M_PI / 180.0);

    std::vector<std::vector<Vec3>> per_image(images.size());
    parallel_for(int(images.size()), num_threads, [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const DepthNormalImage& img = images[i];
            auto& out = per_image[i];
            for (int v = 0; v < img.height; ++v) {
                for (int u = 0; u < img.width; ++u) {
                    double d = img.depth_at(u, v);
                    if (!std::isfinite(d) || d > params.max_distance) continue;
                    Vec3 dir = img.pose.pixel_ray(u, v, intrinsics);
                    // Normals face the camera, so -dir·n = cos(incidence).
                    if (-dir.dot(img.normal_at(u, v)) < cos_max) continue;
                    out.push_back(img.pose.position + d * dir);
                }
            }
        }
    });

    std::vector<Vec3> candidates;
    for (auto& pts : per_image) candidates.insert(candidates.end(), pts.begin(), pts.end());

    std::vector<Vec3> supported;
    if (params.min_support <= 1) {
        supported = std::move(candidates);
    } else {
        PointGrid grid(candidates, params.support_radius);
        std::vector<char> keep(candidates.size(), 0);
        parallel_for(int(candidates.size()), num_threads, [&](int begin, int end) {
            for (int i = begin; i < end; ++i)
                keep[i] = grid.has_at_least(candidates[i], params.support_radius,
                                            params.min_support);
        });
        for (int i = 0; i < int(candidates.size()); ++i)
            if (keep[i]) supported.push_back(candidates[i]);
    }

    std::unordered_map<VoxelKey, std::pair<Vec3, int>, VoxelKeyHash> pooled;
    double vs = params.fusion_voxel;
    for (const auto& p : supported) {
        VoxelKey key{std::int32_t(std::floor(p.x() / vs)), std::int32_t(std::floor(p.y() / vs)),
                     std::int32_t(std::floor(p.z() / vs))};
        auto& [sum, count] = pooled[key];
        if (count == 0) sum = Vec3::Zero();
        sum += p;
        ++count;
    }

    std::vector<Vec3> fused;
    fused.reserve(pooled.size());
    for (const auto& [key, acc] : pooled) {
        Vec3 mean = acc.first / double(acc.second);
        if (roi.contains(mean)) fused.push_back(mean);
    }
    std::sort(fused.begin(), fused.end(), [](const Vec3& a, const Vec3& b) {
        if (a.x() != b.x()) return a.x() < b.x();
        if (a.y() != b.y()) return a.y() < b.y();
        return a.z() < b.z();
    });
    return fused;
}

MetricsReport precision_recall_f1(const std::vector<Vec3>& reconstruction,
                                  const std::vector<Vec3>& ground_truth, double delta) {
    MetricsReport report;
    report.delta = delta;
    report.reconstruction_total = reconstruction.size();
    report.ground_truth_total = ground_truth.size();
    if (reconstruction.empty() || ground_truth.empty()) {
        report.empty_input = true;
        return report;
    }

    PointGrid gt_grid(ground_truth, delta);
    for (const auto& p : reconstruction)
        if (gt_grid.has_any(p, delta)) ++report.reconstruction_matched;

    PointGrid rec_grid(reconstruction, delta);
    for (const auto& p : ground_truth)
        if (rec_grid.has_any(p, delta)) ++report.ground_truth_matched;

    report.precision = 100.0 * double(report.reconstruction_matched) / double(reconstruction.size());
    report.recall = 100.0 * double(report.ground_truth_matched) / double(ground_truth.size());
    report.f_score = f_score_of(report.precision, report.recall);
    return report;
}

std::string metrics_to_json_string(const MetricsReport& report) {
    nlohmann::json j = {{"precision", report.precision},
                        {"recall", report.recall},
                        {"f_score", report.f_score},
                        {"delta", report.delta},
                        {"reconstruction_matched", report.reconstruction_matched},
                        {"reconstruction_total", report.reconstruction_total},
                        {"ground_truth_matched", report.ground_truth_matched},
                        {"ground_truth_total", report.ground_truth_total},
                        {"empty_input", report.empty_input}};
    return j.dump(2);
}

MetricsReport metrics_from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MetricsReport r;
    r.precision = j.at("precision");
    r.recall = j.at("recall");
    r.f_score = j.at("f_score");
    r.delta = j.at("delta");
    r.reconstruction_matched = j.at("reconstruction_matched");
    r.reconstruction_total = j.at("reconstruction_total");
    r.ground_truth_matched = j.at("ground_truth_matched");
    r.ground_truth_total = j.at("ground_truth_total");
    r.empty_input = j.at("empty_input");
    return r;
}

std::string format_comparison_table(const std::vector<ComparisonRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(18) << "method" << std::right << std::setw(9) << "P"
        << std::setw(9) << "R" << std::setw(9) << "F" << std::setw(12) << "score"
        << std::setw(12) << "length" << std::setw(12) << "budget" << std::setw(7) << "views"
        << '\n';
    out << std::fixed;
    for (const auto& row : rows) {
        out << std::left << std::setw(18) << row.method << std::right << std::setprecision(2)
            << std::setw(9) << row.metrics.precision << std::setw(9) << row.metrics.recall
            << std::setw(9) << row.metrics.f_score << std::setw(12) << row.achieved_score
            << std::setw(12) << row.total_length << std::setw(12) << row.budget_cost
            << std::setw(7) << row.viewpoint_count << '\n';
    }
    return out.str();
}

std::vector<ComparisonRow> parse_comparison_table(const std::string& table) {
    std::istringstream in(table);
    std::string line;
    std::getline(in, line);  // header
    std::vector<ComparisonRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ComparisonRow row;
        ls >> row.method >> row.metrics.precision >> row.metrics.recall >> row.metrics.f_score >>
            row.achieved_score >> row.total_length >> row.budget_cost >> row.viewpoint_count;
        if (!ls.fail()) rows.push_back(row);
    }
    return rows;
}

std::string comparison_to_json_string(const std::vector<ComparisonRow>& rows) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& row : rows) {
        j.push_back({{"method", row.method},
                     {"metrics", nlohmann::json::parse(metrics_to_json_string(row.metrics))},
                     {"achieved_score", row.achieved_score},
                     {"total_length", row.total_length},
                     {"budget_cost", row.budget_cost},
                     {"viewpoint_count", row.viewpoint_count}});
    }
    return j.dump(2);
}

}  // namespace plan3d
