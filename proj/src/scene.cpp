#include "plan3d/scene.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace plan3d {

namespace {

constexpr double kDegenerateArea = 1e-12;

bool ray_box(const Aabb& box, const Vec3& origin, const Vec3& inv_dir, double t_max) {
    double t0 = 0.0, t1 = t_max;
    for (int i = 0; i < 3; ++i) {
        double lo = (box.min[i] - origin[i]) * inv_dir[i];
        double hi = (box.max[i] - origin[i]) * inv_dir[i];
        if (lo > hi) std::swap(lo, hi);
        t0 = std::max(t0, lo);
        t1 = std::min(t1, hi);
        if (t0 > t1) return false;
    }
    return true;
}

}  // namespace

std::optional<double> ray_triangle_intersect(const Vec3& origin, const Vec3& direction,
                                             const Triangle& tri) {
    constexpr double kEps = 1e-12;
    Vec3 e1 = tri.b - tri.a;
    Vec3 e2 = tri.c - tri.a;
    Vec3 pvec = direction.cross(e2);
    double det = e1.dot(pvec);
    if (std::abs(det) < kEps) return std::nullopt;
    double inv_det = 1.0 / det;
    Vec3 tvec = origin - tri.a;
    double u = tvec.dot(pvec) * inv_det;
    if (u < 0.0 || u > 1.0) return std::nullopt;
    Vec3 qvec = tvec.cross(e1);
    double v = direction.dot(qvec) * inv_det;
    if (v < 0.0 || u + v > 1.0) return std::nullopt;
    double t = e2.dot(qvec) * inv_det;
    if (t <= kEps) return std::nullopt;
    return t;
}

TriangleBvh::TriangleBvh(const std::vector<Triangle>& triangles) {
    if (triangles.empty()) return;
    order_.resize(triangles.size());
    for (size_t i = 0; i < triangles.size(); ++i) order_[i] = int(i);
    tri_bounds_.reserve(triangles.size());
    for (const auto& t : triangles) tri_bounds_.push_back(t.bounds());
    nodes_.reserve(2 * triangles.size());
    build(triangles, 0, int(triangles.size()));
}

int TriangleBvh::build(const std::vector<Triangle>& triangles, int first, int count) {
    int index = int(nodes_.size());
    nodes_.emplace_back();
    Aabb bounds = tri_bounds_[order_[first]];
    for (int i = 1; i < count; ++i) bounds = bounds.united(tri_bounds_[order_[first + i]]);
    nodes_[index].bounds = bounds;
    if (count <= 4) {
        nodes_[index].first = first;
        nodes_[index].count = count;
        return index;
    }
    Vec3 ext = bounds.extents();
    int axis = 0;
    if (ext[1] > ext[axis]) axis = 1;
    if (ext[2] > ext[axis]) axis = 2;
    int mid = first + count / 2;
    std::nth_element(order_.begin() + first, order_.begin() + mid,
                     order_.begin() + first + count, [&](int lhs, int rhs) {
                         return triangles[lhs].centroid()[axis] < triangles[rhs].centroid()[axis];
                     });
    int left = build(triangles, first, mid - first);
    int right = build(triangles, mid, first + count - mid);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
}

std::optional<RayHit> TriangleBvh::intersect(const std::vector<Triangle>& triangles,
                                             const Vec3& origin, const Vec3& direction,
                                             double max_range) const {
    if (nodes_.empty()) return std::nullopt;
    Vec3 inv_dir;
    for (int i = 0; i < 3; ++i)
        inv_dir[i] = direction[i] != 0.0 ? 1.0 / direction[i] : kInf;

    double best_t = max_range;
    int best_tri = -1;
    int stack[64];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        if (!ray_box(node.bounds, origin, inv_dir, best_t)) continue;
        if (node.left < 0) {
            for (int i = 0; i < node.count; ++i) {
                int tri_id = order_[node.first + i];
                if (auto t = ray_triangle_intersect(origin, direction, triangles[tri_id])) {
                    if (*t < best_t) {
                        best_t = *t;
                        best_tri = tri_id;
                    }
                }
            }
        } else {
            stack[top++] = node.left;
            stack[top++] = node.right;
        }
    }
    if (best_tri < 0) return std::nullopt;
    RayHit hit;
    hit.distance = best_t;
    hit.triangle_id = best_tri;
    hit.normal = triangles[best_tri].normal();
    if (hit.normal.dot(direction) > 0.0) hit.normal = -hit.normal;
    return hit;
}

Scene make_scene(std::vector<Triangle> triangles, const SceneConfig& config) {
    if (!config.allowed_space.contains(config.roi))
        throw std::runtime_error("scene config: roi must lie inside allowed_space");
    Scene scene;
    scene.roi = config.roi;
    scene.allowed_space = config.allowed_space;
    scene.no_fly_zones = config.no_fly_zones;
    for (auto& t : triangles) {
        if (t.area() <= kDegenerateArea) {
            ++scene.degenerate_dropped;
        } else {
            scene.triangles.push_back(t);
        }
    }
    scene.rebuild_bvh();
    return scene;
}

Scene load_scene(const std::string& mesh_path, const SceneConfig& config) {
    return make_scene(load_mesh(mesh_path), config);
}

namespace {

std::vector<Triangle> triangles_from_indexed(const std::vector<Vec3>& vertices,
                                             const std::vector<std::array<int, 3>>& faces) {
    std::vector<Triangle> triangles;
    triangles.reserve(faces.size());
    for (const auto& f : faces) {
        for (int k = 0; k < 3; ++k)
            if (f[k] < 0 || f[k] >= int(vertices.size()))
                throw std::runtime_error("mesh: face index out of range");
        triangles.push_back({vertices[f[0]], vertices[f[1]], vertices[f[2]]});
    }
    return triangles;
}

std::vector<Triangle> load_obj(std::istream& in) {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "v") {
            Vec3 v;
            ls >> v[0] >> v[1] >> v[2];
            vertices.push_back(v);
        } else if (tag == "f") {
            std::vector<int> idx;
            std::string tok;
            while (ls >> tok) {
                // token may be "i", "i/j", "i/j/k" or "i//k"
                int i = std::stoi(tok.substr(0, tok.find('/')));
                idx.push_back(i > 0 ? i - 1 : int(vertices.size()) + i);
            }
            // fan-triangulate polygons
            for (size_t k = 2; k < idx.size(); ++k)
                faces.push_back({idx[0], int(idx[k - 1]), int(idx[k])});
        }
    }
    return triangles_from_indexed(vertices, faces);
}

std::vector<Triangle> load_ply(std::istream& in) {
    std::string line;
    std::getline(in, line);
    if (line.rfind("ply", 0) != 0) throw std::runtime_error("ply: bad magic");
    bool binary = false;
    bool little_endian = true;
    int vertex_count = 0, face_count = 0;
    struct Prop { std::string type, name; };
    std::vector<Prop> vertex_props;
    std::string element;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "format") {
            std::string fmt;
            ls >> fmt;
            binary = fmt.rfind("binary", 0) == 0;
            little_endian = fmt != "binary_big_endian";
        } else if (tag == "element") {
            std::string name;
            int count;
            ls >> name >> count;
            element = name;
            if (name == "vertex") vertex_count = count;
            else if (name == "face") face_count = count;
        } else if (tag == "property" && element == "vertex") {
            Prop p;
            ls >> p.type;
            if (p.type == "list") throw std::runtime_error("ply: list property on vertex");
            ls >> p.name;
            vertex_props.push_back(p);
        } else if (tag == "end_header") {
            break;
        }
    }
    if (!little_endian) throw std::runtime_error("ply: big endian not supported");

    auto prop_size = [](const std::string& t) -> int {
        if (t == "float" || t == "float32" || t == "int" || t == "int32" || t == "uint" ||
            t == "uint32")
            return 4;
        if (t == "double" || t == "float64") return 8;
        if (t == "uchar" || t == "char" || t == "int8" || t == "uint8") return 1;
        if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
        throw std::runtime_error("ply: unsupported property type " + t);
    };

    std::vector<Vec3> vertices(vertex_count);
    std::vector<std::array<int, 3>> faces;
    faces.reserve(face_count);

    if (binary) {
        for (int i = 0; i < vertex_count; ++i) {
            Vec3 v = Vec3::Zero();
            for (const auto& p : vertex_props) {
                char buf[8];
                in.read(buf, prop_size(p.type));
                double value = 0.0;
                if (p.type == "float" || p.type == "float32") {
                    float f;
                    std::memcpy(&f, buf, 4);
                    value = f;
                } else if (p.type == "double" || p.type == "float64") {
                    std::memcpy(&value, buf, 8);
                }
                if (p.name == "x") v[0] = value;
                else if (p.name == "y") v[1] = value;
                else if (p.name == "z") v[2] = value;
            }
            vertices[i] = v;
        }
        for (int i = 0; i < face_count; ++i) {
            unsigned char n;
            in.read(reinterpret_cast<char*>(&n), 1);
            std::vector<int> idx(n);
            in.read(reinterpret_cast<char*>(idx.data()), 4 * n);
            for (size_t k = 2; k < idx.size(); ++k)
                faces.push_back({idx[0], idx[k - 1], idx[k]});
        }
    } else {
        for (int i = 0; i < vertex_count; ++i) {
            std::getline(in, line);
            std::istringstream ls(line);
            Vec3 v = Vec3::Zero();
            double value;
            size_t pi = 0;
            while (ls >> value && pi < vertex_props.size()) {
                const std::string& name = vertex_props[pi++].name;
                if (name == "x") v[0] = value;
                else if (name == "y") v[1] = value;
                else if (name == "z") v[2] = value;
            }
            vertices[i] = v;
        }
        for (int i = 0; i < face_count; ++i) {
            std::getline(in, line);
            std::istringstream ls(line);
            int n;
            ls >> n;
            std::vector<int> idx(n);
            for (int k = 0; k < n; ++k) ls >> idx[k];
            for (size_t k = 2; k < idx.size(); ++k)
                faces.push_back({idx[0], idx[k - 1], idx[k]});
        }
    }
    return triangles_from_indexed(vertices, faces);
}

}  // namespace

std::vector<Triangle> load_mesh(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mesh file: " + path);
    if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".ply") == 0)
        return load_ply(in);
    return load_obj(in);
}

void save_mesh_obj(const std::string& path, const std::vector<Triangle>& triangles) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write mesh file: " + path);
    out.precision(9);
    for (const auto& t : triangles) {
        out << "v " << t.a.x() << ' ' << t.a.y() << ' ' << t.a.z() << '\n';
        out << "v " << t.b.x() << ' ' << t.b.y() << ' ' << t.b.z() << '\n';
        out << "v " << t.c.x() << ' ' << t.c.y() << ' ' << t.c.z() << '\n';
    }
    for (size_t i = 0; i < triangles.size(); ++i) {
        size_t base = 3 * i + 1;
        out << "f " << base << ' ' << base + 1 << ' ' << base + 2 << '\n';
    }
}

std::optional<RayHit> ray_mesh_intersect(const Scene& scene, const Vec3& origin,
                                         const Vec3& direction, double max_range) {
    return scene.bvh.intersect(scene.triangles, origin, direction, max_range);
}

DepthNormalImage render_depth_normal(const Scene& scene, const Viewpoint& viewpoint,
                                     const CameraIntrinsics& intrinsics, int num_threads) {
    DepthNormalImage image;
    image.width = intrinsics.width;
    image.height = intrinsics.height;
    image.pose = viewpoint;
    image.depth.assign(size_t(image.width) * image.height, kInf);
    image.normal.assign(size_t(image.width) * image.height, Vec3::Zero());

    auto render_rows = [&](int v0, int v1) {
        for (int v = v0; v < v1; ++v) {
            for (int u = 0; u < image.width; ++u) {
                Vec3 dir = viewpoint.pixel_ray(u, v, intrinsics);
                if (auto hit = ray_mesh_intersect(scene, viewpoint.position, dir, kInf)) {
                    image.depth[size_t(v) * image.width + u] = hit->distance;
                    image.normal[size_t(v) * image.width + u] = hit->normal;
                }
            }
        }
    };

    if (num_threads <= 1 || image.height < 2 * num_threads) {
        render_rows(0, image.height);
    } else {
        std::vector<std::thread> workers;
        int rows = (image.height + num_threads - 1) / num_threads;
        for (int t = 0; t < num_threads; ++t) {
            int v0 = t * rows;
            int v1 = std::min(image.height, v0 + rows);
            if (v0 >= v1) break;
            workers.emplace_back(render_rows, v0, v1);
        }
        for (auto& w : workers) w.join();
    }
    return image;
}

namespace {

struct VoxelBin {
    Vec3 sum{Vec3::Zero()};
    int count = 0;
};

struct BinKey {
    long long x, y, z;
    bool operator==(const BinKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct BinKeyHash {
    size_t operator()(const BinKey& k) const {
        size_t h = std::hash<long long>()(k.x);
        h = h * 1099511628211ULL ^ std::hash<long long>()(k.y);
        h = h * 1099511628211ULL ^ std::hash<long long>()(k.z);
        return h;
    }
};

}  // namespace

std::vector<Vec3> sample_ground_truth_points(const Scene& scene,
                                             const GroundTruthParams& params) {
    if (scene.triangles.empty()) throw std::runtime_error("ground truth: empty mesh");

    // Subdivide by longest-edge bisection until area threshold holds.
    std::vector<Triangle> stack(scene.triangles.begin(), scene.triangles.end());
    std::vector<Triangle> small;
    while (!stack.empty()) {
        Triangle t = stack.back();
        stack.pop_back();
        if (t.area() <= params.max_triangle_area) {
            small.push_back(t);
            continue;
        }
        double ab = (t.b - t.a).squaredNorm();
        double bc = (t.c - t.b).squaredNorm();
        double ca = (t.a - t.c).squaredNorm();
        if (ab >= bc && ab >= ca) {
            Vec3 m = 0.5 * (t.a + t.b);
            stack.push_back({t.a, m, t.c});
            stack.push_back({m, t.b, t.c});
        } else if (bc >= ab && bc >= ca) {
            Vec3 m = 0.5 * (t.b + t.c);
            stack.push_back({t.a, t.b, m});
            stack.push_back({t.a, m, t.c});
        } else {
            Vec3 m = 0.5 * (t.c + t.a);
            stack.push_back({t.a, t.b, m});
            stack.push_back({m, t.b, t.c});
        }
    }

    std::mt19937_64 rng(params.rng_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::unordered_map<BinKey, VoxelBin, BinKeyHash> bins;
    const double vs = params.resample_voxel;
    for (const auto& t : small) {
        for (int i = 0; i < params.samples_per_triangle; ++i) {
            // uniform barycentric sample via the square-root trick
            double r1 = std::sqrt(unit(rng));
            double r2 = unit(rng);
            Vec3 p = (1.0 - r1) * t.a + r1 * (1.0 - r2) * t.b + r1 * r2 * t.c;
            if (!scene.roi.contains(p)) continue;
            BinKey key{(long long)std::floor(p.x() / vs), (long long)std::floor(p.y() / vs),
                       (long long)std::floor(p.z() / vs)};
            auto& bin = bins[key];
            bin.sum += p;
            bin.count += 1;
        }
    }

    std::vector<Vec3> points;
    points.reserve(bins.size());
    for (const auto& [key, bin] : bins) points.push_back(bin.sum / bin.count);
    std::sort(points.begin(), points.end(), [](const Vec3& a, const Vec3& b) {
        return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
    });
    return points;
}

void save_point_cloud_ply(const std::string& path, const std::vector<Vec3>& points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write point cloud: " + path);
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    for (const auto& p : points) {
        float xyz[3] = {float(p.x()), float(p.y()), float(p.z())};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
}

void save_point_cloud_xyz(const std::string& path, const std::vector<Vec3>& points) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write point cloud: " + path);
    out.precision(9);
    for (const auto& p : points) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

std::vector<Vec3> load_point_cloud_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open point cloud: " + path);
    std::vector<Vec3> points;
    Vec3 p;
    while (in >> p.x() >> p.y() >> p.z()) points.push_back(p);
    return points;
}

}  // namespace plan3d
