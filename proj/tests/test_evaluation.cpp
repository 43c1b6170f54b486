#include <doctest.h>

#include <cmath>

#include "plan3d/evaluation.hpp"
#include "plan3d/procedural.hpp"

using namespace plan3d;

namespace {

Scene make_wall_scene() {
    std::vector<Triangle> tris = {{{10, -100, -100}, {10, 100, -100}, {10, 100, 100}},
                                  {{10, -100, -100}, {10, 100, 100}, {10, -100, 100}}};
    SceneConfig cfg;
    cfg.roi = {{9, -20, -20}, {11, 20, 20}};
    cfg.allowed_space = {{-100, -100, -100}, {100, 100, 100}};
    return make_scene(tris, cfg);
}

}  // namespace

TEST_CASE("F-score formula reproduces the reference precision/recall pairs") {
    CHECK(f_score_of(97.22, 62.53) == doctest::Approx(76.11).epsilon(0.0002));
    CHECK(f_score_of(96.56, 67.16) == doctest::Approx(79.22).epsilon(0.0002));
    CHECK(f_score_of(100.0, 100.0) == doctest::Approx(100.0));
    CHECK(f_score_of(0.0, 0.0) == 0.0);
    CHECK(f_score_of(50.0, 50.0) == doctest::Approx(50.0));
}

TEST_CASE("precision_recall_f1: identical clouds score 100 everywhere") {
    std::vector<Vec3> cloud;
    for (int i = 0; i < 50; ++i) cloud.push_back(Vec3(0.3 * i, 0.1 * i, 0.0));
    MetricsReport r = precision_recall_f1(cloud, cloud, 0.1);
    CHECK(r.precision == doctest::Approx(100.0));
    CHECK(r.recall == doctest::Approx(100.0));
    CHECK(r.f_score == doctest::Approx(100.0));
    CHECK(!r.empty_input);
}

TEST_CASE("precision_recall_f1: hand-crafted partial match") {
    // One reconstruction point within delta of one ground-truth point; the
    // other points on both sides are unmatched.
    std::vector<Vec3> rec = {{0, 0, 0}, {1, 0, 0}};
    std::vector<Vec3> gt = {{0, 0, 0.05}, {5, 5, 5}};
    MetricsReport r = precision_recall_f1(rec, gt, 0.1);
    CHECK(r.reconstruction_matched == 1);
    CHECK(r.ground_truth_matched == 1);
    CHECK(r.precision == doctest::Approx(50.0));
    CHECK(r.recall == doctest::Approx(50.0));
    CHECK(r.f_score == doctest::Approx(50.0));

    // Tighter delta removes the match.
    MetricsReport tight = precision_recall_f1(rec, gt, 0.04);
    CHECK(tight.precision == doctest::Approx(0.0));
    CHECK(tight.recall == doctest::Approx(0.0));
    CHECK(tight.f_score == 0.0);
}

TEST_CASE("precision_recall_f1: empty inputs are flagged and score zero") {
    std::vector<Vec3> some = {{0, 0, 0}};
    MetricsReport a = precision_recall_f1({}, some, 0.1);
    CHECK(a.empty_input);
    CHECK(a.precision == 0.0);
    CHECK(a.f_score == 0.0);
    MetricsReport b = precision_recall_f1(some, {}, 0.1);
    CHECK(b.empty_input);
}

TEST_CASE("simulate_capture: one image per entry, identical to direct rendering") {
    Scene scene = make_wall_scene();
    CameraIntrinsics cam{21, 15, 100.0};

    Trajectory t;
    Viewpoint vp;
    t.entries.push_back({-1, EntryRole::Selected, vp});
    auto images = simulate_capture(scene, t, cam);
    REQUIRE(images.size() == 1);

    DepthNormalImage direct = render_depth_normal(scene, vp, cam);
    REQUIRE(images[0].depth.size() == direct.depth.size());
    for (size_t i = 0; i < direct.depth.size(); ++i) CHECK(images[0].depth[i] == direct.depth[i]);

    // Both entry roles are captured.
    Viewpoint vp2;
    vp2.position = Vec3(0, 2, 0);
    t.entries.push_back({-1, EntryRole::SparseMatch, vp2});
    CHECK(simulate_capture(scene, t, cam).size() == 2);
}

TEST_CASE("fuse_depth_maps: wall pixels survive and land on the wall plane") {
    Scene scene = make_wall_scene();
    CameraIntrinsics cam{21, 15, 100.0};
    Trajectory t;
    Viewpoint vp;
    t.entries.push_back({-1, EntryRole::Selected, vp});
    auto images = simulate_capture(scene, t, cam);

    FusionParams params;
    params.min_support = 1;
    auto cloud = fuse_depth_maps(images, params, cam, scene.roi);
    CHECK(!cloud.empty());
    for (const auto& p : cloud) {
        CHECK(p.x() == doctest::Approx(10.0).epsilon(1e-9));
        CHECK(scene.roi.contains(p));
    }

    // The support filter can only remove points.
    FusionParams strict = params;
    strict.min_support = 3;
    auto filtered = fuse_depth_maps(images, strict, cam, scene.roi);
    CHECK(filtered.size() <= cloud.size());
    CHECK(!filtered.empty());  // 0.1 m pixel spacing at 10 m keeps neighbors in range
}

TEST_CASE("fuse_depth_maps rejects grazing incidence") {
    Scene scene = make_wall_scene();
    CameraIntrinsics cam{21, 15, 100.0};
    // A pose just off the wall plane sees it at >70 degrees almost everywhere.
    Viewpoint grazing;
    grazing.position = Vec3(9.9, -19, 0);
    grazing.yaw = M_PI / 2.0;  // looking along +y, nearly parallel to the wall
    Trajectory t;
    t.entries.push_back({-1, EntryRole::Selected, grazing});
    auto images = simulate_capture(scene, t, cam);

    FusionParams params;
    params.min_support = 1;
    auto cloud = fuse_depth_maps(images, params, cam, scene.roi);
    // Frontal capture of the same wall keeps far more surface.
    Trajectory frontal;
    frontal.entries.push_back({-1, EntryRole::Selected, Viewpoint{}});
    auto frontal_cloud =
        fuse_depth_maps(simulate_capture(scene, frontal, cam), params, cam, scene.roi);
    CHECK(cloud.size() < frontal_cloud.size() / 4);
}

TEST_CASE("metrics JSON round trip") {
    MetricsReport r;
    r.precision = 97.22;
    r.recall = 62.53;
    r.f_score = f_score_of(r.precision, r.recall);
    r.delta = 0.1;
    r.reconstruction_matched = 1234;
    r.reconstruction_total = 1300;
    r.ground_truth_matched = 900;
    r.ground_truth_total = 1500;

    MetricsReport back = metrics_from_json_string(metrics_to_json_string(r));
    CHECK(back.precision == doctest::Approx(r.precision));
    CHECK(back.recall == doctest::Approx(r.recall));
    CHECK(back.f_score == doctest::Approx(r.f_score));
    CHECK(back.delta == doctest::Approx(r.delta));
    CHECK(back.reconstruction_matched == r.reconstruction_matched);
    CHECK(back.reconstruction_total == r.reconstruction_total);
    CHECK(back.ground_truth_matched == r.ground_truth_matched);
    CHECK(back.ground_truth_total == r.ground_truth_total);
    CHECK(back.empty_input == r.empty_input);
}

TEST_CASE("comparison table: one row per method, lossless at table precision") {
    std::vector<ComparisonRow> rows;
    const char* methods[] = {"recursive_greedy", "greedy", "circle", "meander", "hemisphere"};
    double value = 10.0;
    for (const char* m : methods) {
        ComparisonRow row;
        row.method = m;
        row.metrics.precision = value;
        row.metrics.recall = value + 0.25;
        row.metrics.f_score = value + 0.5;
        row.achieved_score = value * 10.0;
        row.total_length = value * 2.0;
        row.budget_cost = value * 3.0;
        row.viewpoint_count = int(value);
        rows.push_back(row);
        value += 7.25;
    }

    std::string table = format_comparison_table(rows);
    auto parsed = parse_comparison_table(table);
    REQUIRE(parsed.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].method == rows[i].method);
        CHECK(parsed[i].metrics.precision == doctest::Approx(rows[i].metrics.precision));
        CHECK(parsed[i].metrics.recall == doctest::Approx(rows[i].metrics.recall));
        CHECK(parsed[i].metrics.f_score == doctest::Approx(rows[i].metrics.f_score));
        CHECK(parsed[i].achieved_score == doctest::Approx(rows[i].achieved_score));
        CHECK(parsed[i].total_length == doctest::Approx(rows[i].total_length));
        CHECK(parsed[i].budget_cost == doctest::Approx(rows[i].budget_cost));
        CHECK(parsed[i].viewpoint_count == rows[i].viewpoint_count);
    }

    // JSON export includes every method once.
    std::string json_text = comparison_to_json_string(rows);
    for (const char* m : methods) CHECK(json_text.find(m) != std::string::npos);
}
