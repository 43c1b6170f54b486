#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "plan3d/occupancy.hpp"

using namespace plan3d;

namespace {

std::set<VoxelKey> to_set(const std::vector<VoxelKey>& keys) {
    return std::set<VoxelKey>(keys.begin(), keys.end());
}

}  // namespace

TEST_CASE("log-odds conversions round trip") {
    for (double p : {0.12, 0.25, 0.4, 0.5, 0.7, 0.75, 0.97})
        CHECK(log_odds_to_prob(prob_to_log_odds(p)) == doctest::Approx(p).epsilon(1e-12));
    CHECK(prob_to_log_odds(0.5) == doctest::Approx(0.0));
}

TEST_CASE("sensor model: one hit raises the prior to 0.7, one miss lowers it to 0.4") {
    OccupancyMap map{OccupancyParams{}};
    VoxelKey a{1, 2, 3}, b{4, 5, 6};
    CHECK(map.occupancy(a) == doctest::Approx(0.5));

    map.update_hit(a);
    // Compare in log-odds space: a single Bayes step from the 0.5 prior.
    CHECK(std::abs(prob_to_log_odds(map.occupancy(a)) - prob_to_log_odds(0.7)) < 1e-9);

    map.update_miss(b);
    CHECK(std::abs(prob_to_log_odds(map.occupancy(b)) - prob_to_log_odds(0.4)) < 1e-9);
}

TEST_CASE("sensor model: hit then miss equals the direct log-odds sum") {
    OccupancyMap map{OccupancyParams{}};
    VoxelKey k{0, 0, 0};
    map.update_hit(k);
    map.update_miss(k);
    double expected = log_odds_to_prob(prob_to_log_odds(0.7) + prob_to_log_odds(0.4));
    CHECK(std::abs(map.occupancy(k) - expected) < 0.001);
}

TEST_CASE("sensor model: clamps hold at [0.12, 0.97] under 100 repeated updates") {
    OccupancyMap map{OccupancyParams{}};
    VoxelKey hi{1, 0, 0}, lo{2, 0, 0};
    for (int i = 0; i < 100; ++i) {
        map.update_hit(hi);
        map.update_miss(lo);
    }
    CHECK(map.occupancy(hi) == doctest::Approx(0.97).epsilon(1e-9));
    CHECK(map.occupancy(lo) == doctest::Approx(0.12).epsilon(1e-9));
}

TEST_CASE("classification thresholds against the update counts they imply") {
    OccupancyMap map{OccupancyParams{}};
    VoxelKey k{0, 0, 0};
    CHECK(map.classify(k) == VoxelClass::Unknown);  // prior 0.5

    // One miss: 0.4 is still above oc_free = 0.25, so Unknown.
    map.update_miss(k);
    CHECK(map.classify(k) == VoxelClass::Unknown);
    // Log-odds arithmetic: p < 0.25 needs l < ln(1/3) = -1.0986; each miss
    // adds ln(0.4/0.6) = -0.4055, so the third miss crosses the threshold.
    map.update_miss(k);
    CHECK(map.classify(k) == VoxelClass::Unknown);
    map.update_miss(k);
    CHECK(map.classify(k) == VoxelClass::Free);

    // Occupied side: one hit gives 0.7 < oc_occupied = 0.75, two hits cross.
    VoxelKey h{1, 1, 1};
    map.update_hit(h);
    CHECK(map.classify(h) == VoxelClass::Unknown);
    map.update_hit(h);
    CHECK(map.classify(h) == VoxelClass::Occupied);
}

TEST_CASE("out-of-bounds voxels classify as occupied") {
    OccupancyMap map{OccupancyParams{}};
    map.set_bounds(Aabb{{0, 0, 0}, {10, 10, 10}});
    VoxelKey outside = map.key_of(Vec3(-5, 5, 5));
    CHECK(map.classify(outside) == VoxelClass::Occupied);
    VoxelKey inside = map.key_of(Vec3(5, 5, 5));
    CHECK(map.classify(inside) == VoxelClass::Unknown);
}

TEST_CASE("traverse_ray: axial ray of 3 voxels and the zero-length ray") {
    OccupancyMap map{OccupancyParams{}};
    const double vs = map.voxel_size();
    Vec3 origin = map.center_of({0, 0, 0});
    auto keys = traverse_ray(map, origin, Vec3(1, 0, 0), 3.0 * vs);
    REQUIRE(keys.size() == 4);
    for (int i = 0; i < 4; ++i) CHECK(keys[i] == VoxelKey{i, 0, 0});
    CHECK(keys.front() == map.key_of(origin));

    auto zero = traverse_ray(map, origin, Vec3(0, 1, 0), 0.0);
    REQUIRE(zero.size() == 1);
    CHECK(zero[0] == map.key_of(origin));
}

namespace {

// Independent geometric oracle: a voxel belongs to the traversal exactly when
// the segment's parameter interval inside the voxel's box is nonempty (slab
// test). Unlike point sampling, this also catches corner-grazing voxels the
// segment crosses for an arbitrarily short distance.
std::set<VoxelKey> slab_oracle(const OccupancyMap& map, const Vec3& origin, const Vec3& dir,
                               double length) {
    std::set<VoxelKey> out;
    out.insert(map.key_of(origin));
    if (length <= 0.0) return out;
    const double vs = map.voxel_size();
    Vec3 end = origin + length * dir;
    VoxelKey lo = map.key_of(origin.cwiseMin(end));
    VoxelKey hi = map.key_of(origin.cwiseMax(end));
    for (std::int32_t x = lo.ix - 1; x <= hi.ix + 1; ++x)
        for (std::int32_t y = lo.iy - 1; y <= hi.iy + 1; ++y)
            for (std::int32_t z = lo.iz - 1; z <= hi.iz + 1; ++z) {
                double tmin = 0.0, tmax = length;
                std::int32_t idx[3] = {x, y, z};
                bool skip = false;
                for (int axis = 0; axis < 3 && !skip; ++axis) {
                    double b0 = idx[axis] * vs, b1 = (idx[axis] + 1) * vs;
                    if (dir[axis] == 0.0) {
                        if (origin[axis] < b0 || origin[axis] >= b1) skip = true;
                        continue;
                    }
                    double t0 = (b0 - origin[axis]) / dir[axis];
                    double t1 = (b1 - origin[axis]) / dir[axis];
                    if (t0 > t1) std::swap(t0, t1);
                    tmin = std::max(tmin, t0);
                    tmax = std::min(tmax, t1);
                    if (tmin >= tmax) skip = true;
                }
                if (!skip && tmin < tmax) out.insert({x, y, z});
            }
    return out;
}

}  // namespace

TEST_CASE("traverse_ray equals the segment/voxel intersection oracle on 500 random segments") {
    OccupancyMap map{OccupancyParams{}};
    const double vs = map.voxel_size();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> coord(-3.0, 3.0);
    std::uniform_real_distribution<double> len(0.0, 6.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (int i = 0; i < 500; ++i) {
        Vec3 origin(coord(rng), coord(rng), coord(rng));
        Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
        if (dir.norm() < 1e-6) dir = Vec3(1, 0, 0);
        dir.normalize();
        double length = len(rng);

        auto exact = to_set(traverse_ray(map, origin, dir, length));
        auto oracle = slab_oracle(map, origin, dir, length);
        CHECK(exact == oracle);

        // Dense point sampling at vs/100 must be contained in the exact set;
        // it can only miss corner-grazing voxels, never find extra ones.
        std::set<VoxelKey> dense;
        for (double t = 0.0; t <= length + 1e-12; t += vs / 100.0)
            dense.insert(map.key_of(origin + t * dir));
        dense.insert(map.key_of(origin + length * dir));
        for (const auto& k : dense) CHECK(exact.count(k) == 1);
    }
}

TEST_CASE("is_free_box and carve_free_box") {
    OccupancyMap map{OccupancyParams{}};
    Aabb box{{0.1, 0.1, 0.1}, {0.9, 0.9, 0.9}};
    // All unknown: not free.
    CHECK(!is_free_box(map, box));

    // Carving drives every intersecting voxel to the free clamp (0.12).
    carve_free_box(map, box);
    CHECK(is_free_box(map, box));
    CHECK(map.occupancy(map.key_of(Vec3(0.5, 0.5, 0.5))) == doctest::Approx(0.12).epsilon(1e-9));

    // One miss on a fresh voxel (0.4) is not enough: free needs <= 0.25.
    OccupancyMap map2{OccupancyParams{}};
    Aabb cell = Aabb::from_center(map2.center_of({2, 2, 2}), Vec3(0.05, 0.05, 0.05));
    map2.update_miss({2, 2, 2});
    CHECK(!is_free_box(map2, cell));
    map2.update_miss({2, 2, 2});
    map2.update_miss({2, 2, 2});
    CHECK(is_free_box(map2, cell));
}

TEST_CASE("is_free_segment") {
    OccupancyMap map{OccupancyParams{}};
    carve_free_box(map, Aabb{{-2, -2, -2}, {2, 2, 2}});
    Vec3 half(0.05, 0.05, 0.05);

    // a = b in free space.
    CHECK(is_free_segment(map, Vec3(0, 0, 0), Vec3(0, 0, 0), half, 0.1));
    // Straight free segment.
    CHECK(is_free_segment(map, Vec3(-1, 0, 0), Vec3(1, 0, 0), half, 0.1));

    // Place an occupied voxel in the middle; crossing it must fail even when
    // sampled at half-voxel steps.
    VoxelKey mid = map.key_of(Vec3(0, 0, 0));
    for (int i = 0; i < 3; ++i) map.update_hit(mid);
    CHECK(!is_free_segment(map, Vec3(-1, 0, 0), Vec3(1, 0, 0), half, map.voxel_size() / 2.0));
}

TEST_CASE("class_histogram counts stored voxels") {
    OccupancyMap map{OccupancyParams{}};
    for (int i = 0; i < 3; ++i) map.update_hit({0, 0, i});  // occupied after >= 2 hits
    for (int i = 0; i < 3; ++i) map.update_hit({0, 0, i});
    for (int i = 0; i < 4; ++i)
        for (int m = 0; m < 3; ++m) map.update_miss({1, 0, i});  // free after 3 misses
    map.update_miss({2, 0, 0});  // one miss: unknown

    ClassHistogram h = class_histogram(map);
    CHECK(h.occupied == 3);
    CHECK(h.free == 4);
    CHECK(h.unknown == 1);
}

TEST_CASE("integrate_depth_map: hits at the surface, misses along the ray") {
    // Wall plane x = 10; camera at the origin looking +x.
    std::vector<Triangle> tris = {{{10, -100, -100}, {10, 100, -100}, {10, 100, 100}},
                                  {{10, -100, -100}, {10, 100, 100}, {10, -100, 100}}};
    SceneConfig cfg;
    cfg.roi = {{9, -100, -100}, {11, 100, 100}};
    cfg.allowed_space = {{-100, -100, -100}, {100, 100, 100}};
    Scene scene = make_scene(tris, cfg);

    Viewpoint vp;
    CameraIntrinsics cam{21, 15, 100.0};
    DepthNormalImage img = render_depth_normal(scene, vp, cam);

    OccupancyMap map{OccupancyParams{}};
    integrate_depth_map(map, img, cam, 100.0);

    // The center ray's endpoint voxel records a hit...
    VoxelKey wall = map.key_of(Vec3(10.0, 0.0, 0.0));
    CHECK(map.occupancy(wall) == doctest::Approx(0.7).epsilon(1e-9));
    // ...and the air in front of the wall records a miss.
    VoxelKey air = map.key_of(Vec3(5.0, 0.0, 0.0));
    CHECK(map.occupancy(air) == doctest::Approx(0.4).epsilon(1e-9));
    // Each voxel is touched at most once per image, hit dominating miss.
    ClassHistogram h = class_histogram(map);
    CHECK(h.free == 0);  // single image: nothing can reach 3 misses
}

TEST_CASE("occupancy map save/load round trip") {
    OccupancyMap map{OccupancyParams{}};
    map.set_bounds(Aabb{{-5, -5, -5}, {5, 5, 5}});
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> idx(-10, 10);
    for (int i = 0; i < 200; ++i) {
        VoxelKey k{idx(rng), idx(rng), idx(rng)};
        if (i % 2) map.update_hit(k);
        else map.update_miss(k);
    }

    std::string path = "test_map_roundtrip.bin";
    save_occupancy_map(map, path);
    OccupancyMap loaded = load_occupancy_map(path);

    CHECK(loaded.params().voxel_size == map.params().voxel_size);
    CHECK(loaded.params().p_hit == map.params().p_hit);
    REQUIRE(loaded.size() == map.size());
    for (const auto& [key, lo] : map.cells()) {
        REQUIRE(loaded.cells().count(key) == 1);
        // Log-odds are serialized as float32.
        CHECK(loaded.cells().at(key) == doctest::Approx(lo).epsilon(1e-6));
    }
    REQUIRE(loaded.bounds().has_value());
    CHECK(loaded.bounds()->min == map.bounds()->min);
    CHECK(loaded.bounds()->max == map.bounds()->max);
    std::remove(path.c_str());
    std::remove((path + ".json").c_str());
}
