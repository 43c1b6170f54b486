#include "plan3d/procedural.hpp"

#include <fstream>

#include "plan3d/config_json.hpp"

namespace plan3d {

std::vector<Triangle> box_triangles(const Aabb& box) {
    const Vec3& lo = box.min;
    const Vec3& hi = box.max;
    Vec3 v[8] = {
        {lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()},
        {hi.x(), hi.y(), lo.z()}, {lo.x(), hi.y(), lo.z()},
        {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
        {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()},
    };
    auto quad = [&](int a, int b, int c, int d, std::vector<Triangle>& out) {
        out.push_back({v[a], v[b], v[c]});
        out.push_back({v[a], v[c], v[d]});
    };
    std::vector<Triangle> tris;
    tris.reserve(12);
    quad(0, 3, 2, 1, tris);  // bottom (-z)
    quad(4, 5, 6, 7, tris);  // top (+z)
    quad(0, 1, 5, 4, tris);  // -y
    quad(2, 3, 7, 6, tris);  // +y
    quad(0, 4, 7, 3, tris);  // -x
    quad(1, 2, 6, 5, tris);  // +x
    return tris;
}

Scene make_courtyard_scene() {
    std::vector<Triangle> tris;

    // Ground slab at z = 0.
    Vec3 g0(-14, -14, 0), g1(14, -14, 0), g2(14, 14, 0), g3(-14, 14, 0);
    tris.push_back({g0, g1, g2});
    tris.push_back({g0, g2, g3});

    // One annular building: a 16m x 12m block around an 8m x 6m inner court.
    // The court is roofed except for a 5m x 3.5m skylight, so the inner
    // facades are shielded from every viewpoint outside the court volume;
    // they can only be imaged by descending through the opening.
    const double h = 7.0;
    const double ox = 8.0, oy = 6.0;  // outer half extents
    const double ix = 4.0, iy = 3.0;  // court half extents
    const double sx = 2.5, sy = 1.75;  // skylight half extents
    auto quad = [&](const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
        tris.push_back({a, b, c});
        tris.push_back({a, c, d});
    };
    auto wall = [&](double x0, double y0, double x1, double y1) {
        quad({x0, y0, 0}, {x1, y1, 0}, {x1, y1, h}, {x0, y0, h});
    };
    // Outer facades.
    wall(-ox, -oy, ox, -oy);
    wall(ox, -oy, ox, oy);
    wall(ox, oy, -ox, oy);
    wall(-ox, oy, -ox, -oy);
    // Inner (court) facades.
    wall(-ix, -iy, ix, -iy);
    wall(ix, -iy, ix, iy);
    wall(ix, iy, -ix, iy);
    wall(-ix, iy, -ix, -iy);
    // Flat roof ring between the outer and inner rectangles.
    quad({-ox, -oy, h}, {ox, -oy, h}, {ix, -iy, h}, {-ix, -iy, h});  // south
    quad({ox, -oy, h}, {ox, oy, h}, {ix, iy, h}, {ix, -iy, h});      // east
    quad({ox, oy, h}, {-ox, oy, h}, {-ix, iy, h}, {ix, iy, h});      // north
    quad({-ox, oy, h}, {-ox, -oy, h}, {-ix, -iy, h}, {-ix, iy, h});  // west
    // Court roof ring between the court rectangle and the skylight.
    quad({-ix, -iy, h}, {ix, -iy, h}, {sx, -sy, h}, {-sx, -sy, h});  // south
    quad({ix, -iy, h}, {ix, iy, h}, {sx, sy, h}, {sx, -sy, h});      // east
    quad({ix, iy, h}, {-ix, iy, h}, {-sx, sy, h}, {sx, sy, h});      // north
    quad({-ix, iy, h}, {-ix, -iy, h}, {-sx, -sy, h}, {-sx, sy, h});  // west
    // Parapet around the skylight: blocks every oblique sightline into the
    // court, so only a near-vertical descent can image the inner facades.
    const double ph = h + 1.5;
    auto parapet = [&](double x0, double y0, double x1, double y1) {
        quad({x0, y0, h}, {x1, y1, h}, {x1, y1, ph}, {x0, y0, ph});
    };
    parapet(-sx, -sy, sx, -sy);
    parapet(sx, -sy, sx, sy);
    parapet(sx, sy, -sx, sy);
    parapet(-sx, sy, -sx, -sy);

    SceneConfig config;
    config.roi = {{-9, -7, 0}, {9, 7, 8.6}};
    config.allowed_space = {{-14, -14, 0}, {14, 14, 13}};
    return make_scene(std::move(tris), config);
}

Scene make_cube_scene() {
    Aabb cube = {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}};
    SceneConfig config;
    config.roi = cube;
    config.allowed_space = {{-10, -10, -10}, {10, 10, 10}};
    return make_scene(box_triangles(cube), config);
}

void export_scene(const Scene& scene, const std::string& mesh_path,
                  const std::string& config_path) {
    save_mesh_obj(mesh_path, scene.triangles);
    nlohmann::json j;
    j["roi"] = aabb_to_json(scene.roi);
    j["allowed_space"] = aabb_to_json(scene.allowed_space);
    j["no_fly_zones"] = nlohmann::json::array();
    for (const auto& z : scene.no_fly_zones) j["no_fly_zones"].push_back(aabb_to_json(z));
    std::ofstream out(config_path);
    if (!out) throw std::runtime_error("cannot write scene config: " + config_path);
    out << j.dump(2) << '\n';
}

}  // namespace plan3d
