#ifndef PLAN3D_CONFIG_JSON_HPP_
#define PLAN3D_CONFIG_JSON_HPP_

#include <json.hpp>

#include "plan3d/geometry.hpp"
#include "plan3d/scene.hpp"

namespace plan3d {

inline Vec3 vec3_from_json(const nlohmann::json& j) {
    return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
}

inline nlohmann::json vec3_to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

inline nlohmann::json aabb_to_json(const Aabb& box) {
    return {{"min", {box.min.x(), box.min.y(), box.min.z()}},
            {"max", {box.max.x(), box.max.y(), box.max.z()}}};
}

inline Aabb aabb_from_json(const nlohmann::json& j) {
    Aabb box;
    for (int i = 0; i < 3; ++i) {
        box.min[i] = j.at("min").at(i).get<double>();
        box.max[i] = j.at("max").at(i).get<double>();
    }
    return box;
}

inline SceneConfig scene_config_from_json(const nlohmann::json& j) {
    SceneConfig config;
    config.roi = aabb_from_json(j.at("roi"));
    config.allowed_space = aabb_from_json(j.at("allowed_space"));
    if (j.contains("no_fly_zones"))
        for (const auto& z : j.at("no_fly_zones")) config.no_fly_zones.push_back(aabb_from_json(z));
    return config;
}

}  // namespace plan3d

#endif  // PLAN3D_CONFIG_JSON_HPP_
