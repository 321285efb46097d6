#pragma once

// Synthetic scenes with exact ground truth. A scene is a handful of colored
// primitives (boxes, spheres) standing on a floor in front of a back wall,
// all rendered through the same camera the pipeline will use. Every layer of
// the removal sequence, every amodal mask, and every disparity grid is
// rendered up front, which lets the oracle backends answer pipeline queries
// from ground truth alone.

#include <map>
#include <set>

#include "backends.hpp"
#include "rng.hpp"

namespace declutter {

// ------------------------------------------------------------ primitives --

// Axis-aligned box centered at the origin; faces subdivided so vertex-color
// shading varies across each face. Shading scales the base color by height
// and a mild horizontal ramp, keeping every vertex visibly non-black.
inline TriangleMesh box_mesh(const Vec3& half_extents, const Vec3f& base_color, int subdiv = 3) {
    if ((half_extents.array() <= 0).any()) throw std::runtime_error("box_mesh: extents must be positive");
    if (subdiv < 1) throw std::runtime_error("box_mesh: subdiv must be >= 1");
    TriangleMesh mesh;
    auto shade = [&](const Vec3& p) {
        float k = float(0.72 + 0.2 * (0.5 - p.y() / (2.0 * half_extents.y())) +
                        0.08 * (p.x() / half_extents.x()));
        return Vec3f(base_color * k);
    };
    // each face: origin corner + two edge vectors
    struct Face {
        Vec3 origin, eu, ev;
    };
    const Vec3& h = half_extents;
    std::array<Face, 6> faces = {{
        {{-h.x(), -h.y(), -h.z()}, {2 * h.x(), 0, 0}, {0, 2 * h.y(), 0}}, // front  (z-)
        {{h.x(), -h.y(), h.z()}, {-2 * h.x(), 0, 0}, {0, 2 * h.y(), 0}},  // back   (z+)
        {{-h.x(), -h.y(), h.z()}, {0, 0, -2 * h.z()}, {0, 2 * h.y(), 0}}, // left   (x-)
        {{h.x(), -h.y(), -h.z()}, {0, 0, 2 * h.z()}, {0, 2 * h.y(), 0}},  // right  (x+)
        {{-h.x(), -h.y(), -h.z()}, {0, 0, 2 * h.z()}, {2 * h.x(), 0, 0}}, // top    (y-)
        {{-h.x(), h.y(), h.z()}, {0, 0, -2 * h.z()}, {2 * h.x(), 0, 0}},  // bottom (y+)
    }};
    for (const Face& f : faces) {
        int base = int(mesh.vertices.size());
        for (int v = 0; v <= subdiv; ++v)
            for (int u = 0; u <= subdiv; ++u) {
                Vec3 p = f.origin + f.eu * (double(u) / subdiv) + f.ev * (double(v) / subdiv);
                mesh.vertices.push_back(p);
                mesh.colors.push_back(shade(p));
            }
        int row = subdiv + 1;
        for (int v = 0; v < subdiv; ++v)
            for (int u = 0; u < subdiv; ++u) {
                int i = base + v * row + u;
                mesh.triangles.push_back({i, i + 1, i + row});
                mesh.triangles.push_back({i + 1, i + row + 1, i + row});
            }
    }
    return mesh;
}

// Latitude-longitude sphere centered at the origin.
inline TriangleMesh sphere_mesh(double radius, const Vec3f& base_color, int stacks = 10,
                                int slices = 16) {
    if (radius <= 0) throw std::runtime_error("sphere_mesh: radius must be positive");
    if (stacks < 2 || slices < 3) throw std::runtime_error("sphere_mesh: too few subdivisions");
    TriangleMesh mesh;
    constexpr double pi = 3.14159265358979323846;
    for (int i = 0; i <= stacks; ++i) {
        double phi = pi * double(i) / stacks; // 0 at -y pole (top of scene, y down)
        for (int j = 0; j < slices; ++j) {
            double theta = 2.0 * pi * double(j) / slices;
            Vec3 p(radius * std::sin(phi) * std::cos(theta), -radius * std::cos(phi),
                   radius * std::sin(phi) * std::sin(theta));
            mesh.vertices.push_back(p);
            float k = float(0.72 + 0.2 * (0.5 - p.y() / (2.0 * radius)) +
                            0.08 * (p.x() / radius));
            mesh.colors.push_back(base_color * k);
        }
    }
    for (int i = 0; i < stacks; ++i)
        for (int j = 0; j < slices; ++j) {
            int a = i * slices + j, b = i * slices + (j + 1) % slices;
            int c = a + slices, d = b + slices;
            if (i > 0) mesh.triangles.push_back({a, b, c});
            if (i + 1 < stacks) mesh.triangles.push_back({b, d, c});
        }
    return mesh;
}

// --------------------------------------------------------------- specs ----

enum class PrimitiveShape { box, sphere };

inline std::string shape_name(PrimitiveShape s) {
    return s == PrimitiveShape::box ? "box" : "sphere";
}
inline PrimitiveShape shape_from_name(const std::string& name) {
    if (name == "box") return PrimitiveShape::box;
    if (name == "sphere") return PrimitiveShape::sphere;
    throw std::runtime_error("unknown primitive shape '" + name + "'");
}

struct ObjectSpec {
    std::string label;
    PrimitiveShape shape = PrimitiveShape::box;
    Vec3 half_extents = Vec3(0.3, 0.3, 0.3); // spheres use x as the radius
    Vec3f color = Vec3f(0.8f, 0.3f, 0.3f);
    double yaw = 0.0;
    Vec3 position = Vec3::Zero(); // scene-frame center of the primitive
    int support_parent = -1;      // object index this one rests on, -1 = floor
};

struct BackgroundSpec {
    double floor_y = 0.9;  // camera looks down +z, y grows downward
    double wall_z = 6.5;
    double half_width = 4.2;
    double wall_top_y = -3.2;
    double floor_near_z = 0.3;
    int grid = 24; // tessellation of each background part
};

struct SceneSpec {
    Camera camera{110.0, 110.0, 64.0, 48.0, 128, 96};
    std::vector<ObjectSpec> objects; // in removal order (nearest unoccluded first)
    BackgroundSpec background;
    uint64_t seed = 0;
};

inline nlohmann::json camera_to_json(const Camera& cam) {
    return {{"fx", cam.fx}, {"fy", cam.fy}, {"cx", cam.cx},
            {"cy", cam.cy}, {"width", cam.width}, {"height", cam.height}};
}

inline Camera camera_from_json(const nlohmann::json& j) {
    Camera cam{j.at("fx").get<double>(), j.at("fy").get<double>(), j.at("cx").get<double>(),
               j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>()};
    cam.validate();
    return cam;
}

inline nlohmann::json scene_spec_to_json(const SceneSpec& spec) {
    nlohmann::json objects = nlohmann::json::array();
    for (const ObjectSpec& o : spec.objects)
        objects.push_back({{"label", o.label},
                           {"shape", shape_name(o.shape)},
                           {"half_extents", {o.half_extents.x(), o.half_extents.y(), o.half_extents.z()}},
                           {"color", {o.color.x(), o.color.y(), o.color.z()}},
                           {"yaw", o.yaw},
                           {"position", {o.position.x(), o.position.y(), o.position.z()}},
                           {"support_parent", o.support_parent}});
    const BackgroundSpec& b = spec.background;
    return {{"camera", camera_to_json(spec.camera)},
            {"seed", spec.seed},
            {"objects", objects},
            {"background",
             {{"floor_y", b.floor_y},
              {"wall_z", b.wall_z},
              {"half_width", b.half_width},
              {"wall_top_y", b.wall_top_y},
              {"floor_near_z", b.floor_near_z},
              {"grid", b.grid}}}};
}

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    SceneSpec spec;
    spec.camera = camera_from_json(j.at("camera"));
    spec.seed = j.at("seed").get<uint64_t>();
    const nlohmann::json& bg = j.at("background");
    spec.background.floor_y = bg.at("floor_y").get<double>();
    spec.background.wall_z = bg.at("wall_z").get<double>();
    spec.background.half_width = bg.at("half_width").get<double>();
    spec.background.wall_top_y = bg.at("wall_top_y").get<double>();
    spec.background.floor_near_z = bg.at("floor_near_z").get<double>();
    spec.background.grid = bg.at("grid").get<int>();
    for (const nlohmann::json& jo : j.at("objects")) {
        ObjectSpec o;
        o.label = jo.at("label").get<std::string>();
        o.shape = shape_from_name(jo.at("shape").get<std::string>());
        auto he = jo.at("half_extents");
        o.half_extents = Vec3(he.at(0).get<double>(), he.at(1).get<double>(), he.at(2).get<double>());
        auto c = jo.at("color");
        o.color = Vec3f(c.at(0).get<float>(), c.at(1).get<float>(), c.at(2).get<float>());
        o.yaw = jo.at("yaw").get<double>();
        auto p = jo.at("position");
        o.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
        o.support_parent = jo.at("support_parent").get<int>();
        spec.objects.push_back(o);
    }
    return spec;
}

// --------------------------------------------------------------- scene ----

struct SyntheticScene {
    SceneSpec spec;
    Camera camera;
    TriangleMesh background;                  // scene-frame background mesh
    std::vector<TriangleMesh> object_meshes;  // canonical (origin-centered) primitives
    std::vector<Sim3> object_poses;           // canonical -> scene
    std::vector<Image> layer_images;          // N+1 images, layer 0 = full scene
    std::vector<Image> amodal_images;         // per object, rendered in isolation
    std::vector<Mask> amodal_masks;           // silhouettes of amodal_images
    std::vector<Mask> visible_masks;          // per object, visible pixels in layer 0
    std::vector<DisparityGrid> layer_disparities; // clean ground truth per layer

    size_t object_count() const { return spec.objects.size(); }
};

inline TriangleMesh build_background_mesh(const BackgroundSpec& bg) {
    TriangleMesh floor_grid, wall_grid;
    int g = std::max(2, bg.grid);
    auto add_grid = [&](TriangleMesh& mesh, auto corner_fn, auto color_fn) {
        for (int v = 0; v <= g; ++v)
            for (int u = 0; u <= g; ++u) {
                double fu = double(u) / g, fv = double(v) / g;
                mesh.vertices.push_back(corner_fn(fu, fv));
                mesh.colors.push_back(color_fn(fu, fv));
            }
        int row = g + 1;
        for (int v = 0; v < g; ++v)
            for (int u = 0; u < g; ++u) {
                int i = v * row + u;
                mesh.triangles.push_back({i, i + 1, i + row});
                mesh.triangles.push_back({i + 1, i + row + 1, i + row});
            }
    };
    add_grid(
        floor_grid,
        [&](double fu, double fv) {
            return Vec3(-bg.half_width + 2 * bg.half_width * fu, bg.floor_y,
                        bg.floor_near_z + (bg.wall_z - bg.floor_near_z) * fv);
        },
        [&](double fu, double fv) {
            bool check = (int(fu * 8) + int(fv * 8)) % 2 == 0;
            return check ? Vec3f(0.55f, 0.52f, 0.48f) : Vec3f(0.42f, 0.40f, 0.37f);
        });
    add_grid(
        wall_grid,
        [&](double fu, double fv) {
            return Vec3(-bg.half_width + 2 * bg.half_width * fu,
                        bg.wall_top_y + (bg.floor_y - bg.wall_top_y) * fv, bg.wall_z);
        },
        [&](double fu, double fv) {
            return Vec3f(0.60f + 0.12f * float(fv), 0.63f + 0.10f * float(fv),
                         0.68f + 0.08f * float(fu));
        });
    return merge_meshes({&floor_grid, &wall_grid});
}

inline TriangleMesh build_object_mesh(const ObjectSpec& o) {
    if (o.shape == PrimitiveShape::box) return box_mesh(o.half_extents, o.color);
    return sphere_mesh(o.half_extents.x(), o.color);
}

// Renders every layer, mask, and disparity grid implied by the spec.
inline SyntheticScene build_scene(const SceneSpec& spec) {
    spec.camera.validate();
    std::set<std::string> labels;
    for (const ObjectSpec& o : spec.objects) {
        if (o.label.empty()) throw std::runtime_error("build_scene: empty object label");
        if (!labels.insert(o.label).second)
            throw std::runtime_error("build_scene: duplicate label '" + o.label + "'");
        if (o.support_parent >= int(spec.objects.size()) || o.support_parent == -2)
            throw std::runtime_error("build_scene: bad support_parent for '" + o.label + "'");
    }

    SyntheticScene scene;
    scene.spec = spec;
    scene.camera = spec.camera;
    scene.background = build_background_mesh(spec.background);

    size_t n = spec.objects.size();
    std::vector<TriangleMesh> posed(n);
    for (size_t i = 0; i < n; ++i) {
        scene.object_meshes.push_back(build_object_mesh(spec.objects[i]));
        scene.object_poses.push_back(
            Sim3{1.0, yaw_matrix(spec.objects[i].yaw), spec.objects[i].position});
        posed[i] = transform_mesh(scene.object_meshes[i], scene.object_poses[i]);
    }

    RenderSettings settings;
    settings.camera = spec.camera;

    for (size_t k = 0; k <= n; ++k) {
        std::vector<const TriangleMesh*> parts = {&scene.background};
        for (size_t i = k; i < n; ++i) parts.push_back(&posed[i]);
        TriangleMesh combined = merge_meshes(parts);
        RenderOutput r = render(combined, Sim3{}, settings);
        scene.layer_images.push_back(std::move(r.image));
        scene.layer_disparities.push_back(std::move(r.disparity));
    }

    for (size_t i = 0; i < n; ++i) {
        RenderOutput alone = render(posed[i], Sim3{}, settings);
        // visible = amodal pixels this object actually wins in the full scene
        Mask visible(spec.camera.width, spec.camera.height);
        const DisparityGrid& scene_d = scene.layer_disparities[0];
        for (int y = 0; y < spec.camera.height; ++y)
            for (int x = 0; x < spec.camera.width; ++x) {
                if (!alone.mask.at(x, y)) continue;
                double own = alone.disparity.value(x, y);
                if (scene_d.is_valid(x, y) && own >= scene_d.value(x, y) * (1.0 - 1e-9))
                    visible.set(x, y, true);
            }
        scene.amodal_images.push_back(std::move(alone.image));
        scene.amodal_masks.push_back(std::move(alone.mask));
        scene.visible_masks.push_back(std::move(visible));
    }
    return scene;
}

// ----------------------------------------------------------- generation ---

struct GenerateOptions {
    int object_count = 3;
    std::vector<PrimitiveShape> shapes = {PrimitiveShape::box, PrimitiveShape::sphere};
    int support_pairs = 0; // each pair = one small object resting on a box
    uint64_t seed = 0;
    Camera camera{110.0, 110.0, 64.0, 48.0, 128, 96};
    int max_retries = 64;
    int min_mask_pixels = 130;
    bool require_occlusion = true; // at least one object partially hidden in layer 0
};

namespace detail {

inline std::string pick_label(SeededRng& rng, PrimitiveShape shape, bool is_item,
                              std::set<std::string>& used) {
    static const char* adjectives[] = {"red",  "blue",  "green", "amber",
                                       "teal", "mauve", "ochre", "slate"};
    static const char* box_nouns[] = {"crate", "box", "cabinet", "block", "bin"};
    static const char* sphere_nouns[] = {"ball", "globe", "orb"};
    static const char* item_nouns[] = {"cup", "bowl", "vase", "mug"};
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::string adj = adjectives[rng.uniform_int(0, 7)];
        std::string noun;
        if (is_item)
            noun = item_nouns[rng.uniform_int(0, 3)];
        else if (shape == PrimitiveShape::box)
            noun = box_nouns[rng.uniform_int(0, 4)];
        else
            noun = sphere_nouns[rng.uniform_int(0, 2)];
        std::string label = adj + " " + noun;
        if (attempt > 8) label += " " + std::to_string(attempt);
        if (used.insert(label).second) return label;
    }
    throw std::runtime_error("pick_label: could not produce a unique label");
}

inline Vec3f pick_color(SeededRng& rng) {
    static const Vec3f palette[] = {
        {0.82f, 0.29f, 0.26f}, {0.27f, 0.51f, 0.79f}, {0.33f, 0.69f, 0.38f},
        {0.85f, 0.62f, 0.25f}, {0.62f, 0.38f, 0.72f}, {0.26f, 0.68f, 0.66f},
        {0.78f, 0.45f, 0.58f}, {0.55f, 0.58f, 0.27f},
    };
    return palette[rng.uniform_int(0, 7)];
}

inline Aabb posed_bounds(const ObjectSpec& o) {
    // conservative: rotated box fits inside its xz diagonal
    double rx = o.shape == PrimitiveShape::sphere
                    ? o.half_extents.x()
                    : std::hypot(o.half_extents.x(), o.half_extents.z());
    double ry = o.shape == PrimitiveShape::sphere ? o.half_extents.x() : o.half_extents.y();
    Aabb box;
    box.expand(o.position - Vec3(rx, ry, rx));
    box.expand(o.position + Vec3(rx, ry, rx));
    return box;
}

inline bool bounds_overlap(const Aabb& a, const Aabb& b, double slack) {
    for (int axis = 0; axis < 3; ++axis)
        if (a.hi[axis] - slack < b.lo[axis] || b.hi[axis] - slack < a.lo[axis]) return false;
    return true;
}

} // namespace detail

// Samples object placements until the rendered scene passes validation:
// every object fully visible at its own layer with a usable mask, no
// interpenetration, and (when requested) at least one occlusion in layer 0.
inline SyntheticScene generate_synthetic_scene(const GenerateOptions& opts) {
    if (opts.object_count < 0)
        throw std::runtime_error("generate_synthetic_scene: object count must be >= 0");
    if (opts.shapes.empty())
        throw std::runtime_error("generate_synthetic_scene: shape set must not be empty");
    if (opts.support_pairs < 0 || opts.support_pairs * 2 > opts.object_count)
        throw std::runtime_error("generate_synthetic_scene: support pairs need 2 objects each");
    opts.camera.validate();

    SeededRng rng(opts.seed);
    BackgroundSpec bg;

    int groups = opts.object_count - opts.support_pairs;
    const double band_start = 2.75, band_step = 0.85;
    const double band_limit = bg.wall_z - 0.8;

    for (int attempt = 0; attempt < opts.max_retries; ++attempt) {
        // cheap rejection before any rendering: do the depth bands even fit?
        if (band_start + band_step * std::max(0, groups - 1) > band_limit) continue;

        SceneSpec spec;
        spec.camera = opts.camera;
        spec.background = bg;
        spec.seed = opts.seed;

        std::set<std::string> used_labels;
        int pairs_left = opts.support_pairs;
        bool want_occlusion = opts.require_occlusion && opts.object_count >= 2;
        bool ok = true;

        for (int g = 0; g < groups && ok; ++g) {
            bool with_item = pairs_left > 0 && (groups - g <= pairs_left ||
                                                rng.uniform() < 0.5);
            ObjectSpec parent;
            parent.shape = with_item ? PrimitiveShape::box
                                     : opts.shapes[rng.uniform_int(0, int(opts.shapes.size()) - 1)];
            parent.label = detail::pick_label(rng, parent.shape, false, used_labels);
            parent.color = detail::pick_color(rng);
            if (parent.shape == PrimitiveShape::box) {
                parent.half_extents = Vec3(rng.uniform(0.26, 0.4), rng.uniform(0.22, 0.3),
                                           rng.uniform(0.26, 0.4));
            } else {
                double r = rng.uniform(0.24, 0.34);
                parent.half_extents = Vec3(r, r, r);
            }
            parent.yaw = rng.uniform(0.0, 6.283185307179586);
            double z = band_start + band_step * g + rng.uniform(-0.1, 0.1);
            double reach = parent.shape == PrimitiveShape::sphere
                               ? parent.half_extents.x()
                               : std::hypot(parent.half_extents.x(), parent.half_extents.z());
            double x_max = z * (spec.camera.cx / spec.camera.fx) * 0.92 - reach - 0.05;
            if (x_max <= 0.05) {
                ok = false;
                break;
            }
            // steer toward the previous object's column so occlusions happen
            double x = rng.uniform(-x_max, x_max);
            if (want_occlusion && g == 1 && !spec.objects.empty()) {
                double prev_x = spec.objects.front().position.x();
                double target = prev_x * (z / spec.objects.front().position.z());
                x = std::clamp(target + rng.uniform(-0.18, 0.18), -x_max, x_max);
            }
            double cy_off = parent.shape == PrimitiveShape::sphere ? parent.half_extents.x()
                                                                   : parent.half_extents.y();
            parent.position = Vec3(x, bg.floor_y - cy_off, z);

            if (with_item) {
                ObjectSpec item;
                item.shape = opts.shapes[rng.uniform_int(0, int(opts.shapes.size()) - 1)];
                item.label = detail::pick_label(rng, item.shape, true, used_labels);
                item.color = detail::pick_color(rng);
                double r = rng.uniform(0.11, 0.16);
                item.half_extents = item.shape == PrimitiveShape::sphere
                                        ? Vec3(r, r, r)
                                        : Vec3(r, rng.uniform(0.1, 0.15), r);
                item.yaw = rng.uniform(0.0, 6.283185307179586);
                double top_y = parent.position.y() - parent.half_extents.y();
                double span_x = std::max(0.0, parent.half_extents.x() * 0.5 - item.half_extents.x() * 0.4);
                double span_z = std::max(0.0, parent.half_extents.z() * 0.5 - item.half_extents.z() * 0.4);
                double item_cy = item.shape == PrimitiveShape::sphere ? item.half_extents.x()
                                                                      : item.half_extents.y();
                item.position = parent.position +
                                Vec3(rng.uniform(-span_x, span_x), 0, rng.uniform(-span_z, span_z));
                item.position.y() = top_y - item_cy;
                item.support_parent = int(spec.objects.size()) + 1; // parent goes right after
                spec.objects.push_back(item);
                pairs_left -= 1;
            }
            spec.objects.push_back(parent);
        }
        if (!ok || int(spec.objects.size()) != opts.object_count) continue;

        // interpenetration check on conservative bounds (support contact allowed)
        bool collide = false;
        for (size_t i = 0; i < spec.objects.size() && !collide; ++i)
            for (size_t j = i + 1; j < spec.objects.size() && !collide; ++j) {
                if (spec.objects[i].support_parent == int(j) ||
                    spec.objects[j].support_parent == int(i))
                    continue;
                collide = detail::bounds_overlap(detail::posed_bounds(spec.objects[i]),
                                                 detail::posed_bounds(spec.objects[j]), 1e-6);
            }
        if (collide) continue;

        SyntheticScene scene = build_scene(spec);

        bool valid = true;
        for (size_t k = 0; k < scene.object_count() && valid; ++k) {
            if (scene.amodal_masks[k].count() < size_t(opts.min_mask_pixels)) valid = false;
            // fully visible at its own layer: own render must win everywhere
            const DisparityGrid& own_layer = scene.layer_disparities[k];
            RenderOutput alone = render(transform_mesh(scene.object_meshes[k], scene.object_poses[k]),
                                        Sim3{}, RenderSettings{scene.camera, {0, 0, 0}, 1e-4});
            for (int y = 0; y < scene.camera.height && valid; ++y)
                for (int x = 0; x < scene.camera.width; ++x) {
                    if (!alone.mask.at(x, y)) continue;
                    if (!own_layer.is_valid(x, y) ||
                        alone.disparity.value(x, y) < own_layer.value(x, y) * (1.0 - 1e-6)) {
                        valid = false;
                        break;
                    }
                }
        }
        if (valid && want_occlusion) {
            bool occluded = false;
            for (size_t k = 0; k < scene.object_count() && !occluded; ++k)
                occluded = scene.visible_masks[k].count() < scene.amodal_masks[k].count();
            valid = occluded;
        }
        if (valid) return scene;
    }
    throw std::runtime_error("generate_synthetic_scene: placement failed after " +
                             std::to_string(opts.max_retries) + " retries");
}

// -------------------------------------------------------------- oracles ---

struct OracleConfig {
    bool corrupt_disparity = false;
    double corrupt_a_min = 0.8, corrupt_a_max = 1.25; // disparity gain range
    double corrupt_b_frac = 0.1;                      // offset range, fraction of median
    bool corrupt_reference = false;                   // layer 0 stays clean by default
    uint64_t seed = 0;
    int track_target = 400; // approximate correspondences per tracker call
};

inline nlohmann::json oracle_config_to_json(const OracleConfig& c) {
    return {{"corrupt_disparity", c.corrupt_disparity}, {"corrupt_a_min", c.corrupt_a_min},
            {"corrupt_a_max", c.corrupt_a_max},         {"corrupt_b_frac", c.corrupt_b_frac},
            {"corrupt_reference", c.corrupt_reference}, {"seed", c.seed},
            {"track_target", c.track_target}};
}

inline OracleConfig oracle_config_from_json(const nlohmann::json& j) {
    OracleConfig c;
    c.corrupt_disparity = j.value("corrupt_disparity", c.corrupt_disparity);
    c.corrupt_a_min = j.value("corrupt_a_min", c.corrupt_a_min);
    c.corrupt_a_max = j.value("corrupt_a_max", c.corrupt_a_max);
    c.corrupt_b_frac = j.value("corrupt_b_frac", c.corrupt_b_frac);
    c.corrupt_reference = j.value("corrupt_reference", c.corrupt_reference);
    c.seed = j.value("seed", c.seed);
    c.track_target = j.value("track_target", c.track_target);
    return c;
}

// Shared state behind every oracle backend: the ground-truth scene plus a
// registry mapping generated meshes back to the object they came from.
class OracleContext {
public:
    OracleContext(std::shared_ptr<const SyntheticScene> scene, OracleConfig cfg)
        : scene_(std::move(scene)), cfg_(cfg) {
        if (!scene_) throw std::runtime_error("oracle: null scene");
    }

    const SyntheticScene& scene() const { return *scene_; }
    const OracleConfig& config() const { return cfg_; }

    int identify_layer(const Image& image) const {
        double best = std::numeric_limits<double>::infinity();
        int best_k = -1;
        for (size_t k = 0; k < scene_->layer_images.size(); ++k) {
            double d = image_mean_abs_diff(image, scene_->layer_images[k]);
            if (d < best) {
                best = d;
                best_k = int(k);
            }
        }
        // tolerate an 8-bit PNG round trip, nothing more
        if (best_k < 0 || best > 1.5 / 255.0)
            throw std::runtime_error("oracle: image does not match any scene layer");
        return best_k;
    }

    int identify_object(const Mask& mask) const {
        double best = 0.0;
        int best_i = -1;
        for (size_t i = 0; i < scene_->amodal_masks.size(); ++i) {
            double iou = mask_iou(mask, scene_->amodal_masks[i]);
            if (iou > best) {
                best = iou;
                best_i = int(i);
            }
        }
        // masks arrive dilated by a few pixels, so the floor is generous
        if (best_i < 0 || best < 0.25)
            throw std::runtime_error("oracle: mask does not match any object");
        return best_i;
    }

    // Mask overlap alone is ambiguous when objects project nearly on top of
    // each other, so image-bearing callers match pixels against each
    // candidate's isolated render instead.
    int identify_object(const Image& masked_image) const {
        Mask query = image_nonzero_mask(masked_image);
        double best_diff = std::numeric_limits<double>::infinity();
        double best_iou = 0.0;
        int best_i = -1;
        for (size_t i = 0; i < scene_->amodal_masks.size(); ++i) {
            const Mask& amodal = scene_->amodal_masks[i];
            double iou = mask_iou(query, amodal);
            if (iou < 0.25) continue;
            const Image& ref = scene_->amodal_images[i];
            double diff = 0.0;
            size_t count = 0;
            for (int y = 0; y < query.height; ++y)
                for (int x = 0; x < query.width; ++x) {
                    if (!query.at(x, y) || !amodal.at(x, y)) continue;
                    for (int c = 0; c < 3; ++c)
                        diff += std::abs(double(masked_image.at(x, y, c)) -
                                         double(ref.at(x, y, c)));
                    count += 1;
                }
            if (count == 0) continue;
            diff /= double(count) * 3.0;
            // near-ties in appearance fall back to mask agreement
            bool wins = diff < best_diff - 1.5 / 255.0 ||
                        (diff < best_diff + 1.5 / 255.0 && iou > best_iou);
            if (wins) {
                best_diff = std::min(diff, best_diff);
                best_iou = iou;
                best_i = int(i);
            }
        }
        if (best_i < 0)
            throw std::runtime_error("oracle: image does not match any object");
        return best_i;
    }

    int find_label(const std::string& label) const {
        for (size_t i = 0; i < scene_->spec.objects.size(); ++i)
            if (scene_->spec.objects[i].label == label) return int(i);
        return -1;
    }

    // deterministic canonicalization yaw for generated meshes
    double mesh_yaw(int object) const {
        SeededRng rng(cfg_.seed ^ (0x9e3779b97f4a7c15ull * uint64_t(object + 1)));
        return rng.uniform(0.0, 6.283185307179586);
    }

    struct MeshProvenance {
        int object = -1;
        Sim3 scene_from_mesh;
    };

    static uint64_t mesh_hash(const TriangleMesh& mesh) {
        uint64_t h = 0xcbf29ce484222325ull;
        auto mix = [&h](const void* data, size_t len) {
            const uint8_t* p = static_cast<const uint8_t*>(data);
            for (size_t i = 0; i < len; ++i) {
                h ^= p[i];
                h *= 0x100000001b3ull;
            }
        };
        for (const Vec3& v : mesh.vertices) mix(v.data(), sizeof(double) * 3);
        for (const auto& t : mesh.triangles) mix(t.data(), sizeof(int) * 3);
        return h;
    }

    void register_mesh(const TriangleMesh& mesh, MeshProvenance prov) {
        registry_[mesh_hash(mesh)] = std::move(prov);
    }

    const MeshProvenance* lookup_mesh(const TriangleMesh& mesh) const {
        auto it = registry_.find(mesh_hash(mesh));
        return it == registry_.end() ? nullptr : &it->second;
    }

private:
    std::shared_ptr<const SyntheticScene> scene_;
    OracleConfig cfg_;
    std::map<uint64_t, MeshProvenance> registry_;
};

struct OracleProposer final : Proposer {
    explicit OracleProposer(std::shared_ptr<OracleContext> ctx) : ctx_(std::move(ctx)) {}
    ObjectProposal propose(const Image& image) override {
        const SyntheticScene& scene = ctx_->scene();
        size_t k = size_t(ctx_->identify_layer(image));
        if (k >= scene.object_count()) return {}; // nothing left
        const auto& objects = scene.spec.objects;
        ObjectProposal prop;
        int next = int(k);
        int parent = objects[next].support_parent;
        int primary = parent >= next ? parent : next;
        prop.visible_object = objects[primary].label;
        for (size_t j = k; j < objects.size(); ++j)
            if (objects[j].support_parent == primary)
                prop.secondary_objects.push_back(objects[j].label);
        prop.description = "synthetic " + shape_name(objects[primary].shape);
        prop.validate();
        return prop;
    }
    std::shared_ptr<OracleContext> ctx_;
};

struct OracleSegmenter final : Segmenter {
    explicit OracleSegmenter(std::shared_ptr<OracleContext> ctx) : ctx_(std::move(ctx)) {}
    Mask segment(const Image& image, const std::string& label) override {
        (void)image;
        int i = ctx_->find_label(label);
        const Camera& cam = ctx_->scene().camera;
        if (i < 0) return Mask(cam.width, cam.height); // not found
        return ctx_->scene().amodal_masks[size_t(i)];
    }
    std::shared_ptr<OracleContext> ctx_;
};

struct OracleRemover final : Remover {
    explicit OracleRemover(std::shared_ptr<OracleContext> ctx) : ctx_(std::move(ctx)) {}
    Image remove(const Image& image, const Mask& mask, const std::string& label) override {
        (void)mask;
        (void)label;
        size_t k = size_t(ctx_->identify_layer(image));
        const SyntheticScene& scene = ctx_->scene();
        if (k + 1 >= scene.layer_images.size())
            throw std::runtime_error("oracle remover: nothing left to remove");
        return scene.layer_images[k + 1];
    }
    std::shared_ptr<OracleContext> ctx_;
};

struct OracleDepthEstimator final : DepthEstimator {
    explicit OracleDepthEstimator(std::shared_ptr<OracleContext> ctx) : ctx_(std::move(ctx)) {}
    DepthEstimate estimate(const Image& image) override {
        const SyntheticScene& scene = ctx_->scene();
        const OracleConfig& cfg = ctx_->config();
        size_t k = size_t(ctx_->identify_layer(image));
        DisparityGrid grid = scene.layer_disparities[k];
        bool corrupt = cfg.corrupt_disparity && !(k == 0 && !cfg.corrupt_reference);
        if (corrupt) {
            // per-layer seeded affine distortion: repeated calls are identical
            SeededRng rng(cfg.seed ^ (0xd1342543de82ef95ull * uint64_t(k + 1)));
            double a = rng.uniform(cfg.corrupt_a_min, cfg.corrupt_a_max);
            std::vector<float> vals;
            for (size_t i = 0; i < grid.values.size(); ++i)
                if (grid.valid[i]) vals.push_back(grid.values[i]);
            double median = 0.0;
            if (!vals.empty()) {
                size_t mid = vals.size() / 2;
                std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
                median = vals[mid];
            }
            double b = rng.uniform(-cfg.corrupt_b_frac, cfg.corrupt_b_frac) * median;
            for (int y = 0; y < grid.height; ++y)
                for (int x = 0; x < grid.width; ++x)
                    if (grid.is_valid(x, y)) grid.set(x, y, float(a * grid.value(x, y) + b));
        }
        return {std::move(grid), scene.camera};
    }
    std::shared_ptr<OracleContext> ctx_;
};

struct OracleMeshGenerator final : MeshGenerator {
    explicit OracleMeshGenerator(std::shared_ptr<OracleContext> ctx) : ctx_(std::move(ctx)) {}
    TriangleMesh generate(const Image& masked_image) override {
        int i = ctx_->identify_object(masked_image);
        const SyntheticScene& scene = ctx_->scene();
        TriangleMesh posed = transform_mesh(scene.object_meshes[i], scene.object_poses[i]);
        Vec3 c = posed.centroid();
        double rho = posed.bounding_radius(c);
        if (rho <= 0) throw std::runtime_error("oracle mesh generator: degenerate object");
        // re-center, rescale to unit bounding sphere, apply a seeded yaw
        Mat3 R = yaw_matrix(ctx_->mesh_yaw(i));
        Sim3 canon{1.0 / rho, R, -(1.0 / rho) * (R * c)};
        TriangleMesh mesh = transform_mesh(posed, canon);
        ctx_->register_mesh(mesh, {i, canon.inverse()});
        return mesh;
    }
    std::shared_ptr<OracleContext> ctx_;
};

struct OracleRotationEstimator final : RotationEstimator {
    explicit OracleRotationEstimator(std::shared_ptr<OracleContext> ctx) : ctx_(std::move(ctx)) {}
    Mat3 estimate(const Image& masked_image, const Mask& mask,
                  const std::vector<YawView>& sweep) override {
        (void)mask;
        (void)sweep;
        int i = ctx_->identify_object(masked_image);
        return yaw_matrix(ctx_->mesh_yaw(i));
    }
    std::shared_ptr<OracleContext> ctx_;
};

// Projects render pixels back to the scene through ground truth: render ray ->
// mesh frame -> scene frame -> scene pixel. Pairs whose scene point is not the
// visible surface at that pixel are dropped, like a real 2D matcher would.
struct OracleTracker final : Tracker {
    explicit OracleTracker(std::shared_ptr<OracleContext> ctx) : ctx_(std::move(ctx)) {}
    CorrespondenceSet track(const TrackQuery& query) override {
        if (!query.mesh || !query.mesh_to_render || !query.render_disparity)
            throw std::runtime_error("oracle tracker: query lacks render context");
        const OracleContext::MeshProvenance* prov = ctx_->lookup_mesh(*query.mesh);
        if (!prov) throw std::runtime_error("oracle tracker: unknown mesh (not oracle-generated)");
        const SyntheticScene& scene = ctx_->scene();
        const Camera& cam = query.camera ? *query.camera : scene.camera;
        int layer = ctx_->identify_layer(query.image);
        const DisparityGrid& truth = scene.layer_disparities[size_t(layer)];

        const DisparityGrid& rd = *query.render_disparity;
        size_t covered = 0;
        for (uint8_t v : rd.valid) covered += v;
        int stride = std::max(1, int(std::floor(std::sqrt(
                                  double(covered) / std::max(1, ctx_->config().track_target)))));

        Sim3 render_to_mesh = query.mesh_to_render->inverse();
        CorrespondenceSet out;
        for (int y = 0; y < rd.height; y += stride)
            for (int x = 0; x < rd.width; x += stride) {
                if (!rd.is_valid(x, y)) continue;
                Vec3 render_pt = cam.unproject(x, y, rd.value(x, y));
                Vec3 scene_pt = prov->scene_from_mesh.apply(render_to_mesh.apply(render_pt));
                if (scene_pt.z() <= 0) continue;
                Eigen::Vector2d px = cam.project(scene_pt);
                int sx = int(std::lround(px.x())), sy = int(std::lround(px.y()));
                if (!truth.in_bounds(sx, sy) || !truth.is_valid(sx, sy)) continue;
                // only emit pairs whose scene point is actually visible there
                if (std::abs(scene_pt.z() * double(truth.value(sx, sy)) - 1.0) > 0.05) continue;
                // a perfect tracker hands out noiseless pairs: keep only
                // locations where bilinear sampling of the stored grid lands
                // back on the true surface point, dropping silhouette pixels
                // and stencils that straddle a depth crease
                std::optional<double> rebuilt_d = sample_disparity(truth, px.x(), px.y());
                if (!rebuilt_d) continue;
                Vec3 rebuilt = cam.unproject(px.x(), px.y(), *rebuilt_d);
                if ((rebuilt - scene_pt).norm() > 1e-6) continue;
                out.pairs.push_back({px, {double(x), double(y)}, 1.0});
            }
        return out;
    }
    std::shared_ptr<OracleContext> ctx_;
};

inline BackendSuite make_oracle_suite(std::shared_ptr<const SyntheticScene> scene,
                                      const OracleConfig& cfg = {}) {
    auto ctx = std::make_shared<OracleContext>(std::move(scene), cfg);
    BackendSuite suite;
    suite.proposer = std::make_shared<OracleProposer>(ctx);
    suite.segmenter = std::make_shared<OracleSegmenter>(ctx);
    suite.remover = std::make_shared<OracleRemover>(ctx);
    suite.depth_estimator = std::make_shared<OracleDepthEstimator>(ctx);
    suite.mesh_generator = std::make_shared<OracleMeshGenerator>(ctx);
    suite.rotation_estimator = std::make_shared<OracleRotationEstimator>(ctx);
    suite.tracker = std::make_shared<OracleTracker>(ctx);
    return suite;
}

} // namespace declutter
