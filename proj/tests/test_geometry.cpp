// Camera projection, backprojection, tessellation, nearest neighbors, voxel
// downsampling, volumetric IoU, and OBJ serialization.
#include <filesystem>

#include <gtest/gtest.h>

#include "declutter/geometry.hpp"
#include "declutter/kdtree.hpp"
#include "declutter/rng.hpp"
#include "declutter/synthetic.hpp"
#include "declutter/voxel.hpp"

using namespace declutter;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("declutter_geometry_" + std::to_string(getpid()) + "_" +
                    std::to_string(counter++));
    fs::create_directories(dir);
    return dir;
}

TriangleMesh unit_cube(const Vec3& center = Vec3::Zero(), double half = 0.5) {
    return transform_mesh(box_mesh(Vec3(half, half, half), Vec3f(0.5f, 0.5f, 0.5f), 1),
                          make_translation(center));
}

} // namespace

TEST(Camera, ValidationRejectsBadIntrinsics) {
    Camera cam{100, 100, 5, 5, 10, 10};
    EXPECT_NO_THROW(cam.validate());
    EXPECT_THROW((Camera{0, 100, 5, 5, 10, 10}).validate(), std::runtime_error);
    EXPECT_THROW((Camera{100, 100, 5, 5, 0, 10}).validate(), std::runtime_error);
    EXPECT_THROW((Camera{100, 100, 25, 5, 10, 10}).validate(), std::runtime_error);
}

TEST(Camera, ProjectUnprojectInverse) {
    Camera cam{110, 95, 33.5, 21.0, 64, 48};
    SeededRng rng(2);
    for (int i = 0; i < 200; ++i) {
        double x = rng.uniform(0, 63), y = rng.uniform(0, 47), d = rng.uniform(0.05, 2.0);
        Vec3 p = cam.unproject(x, y, d);
        EXPECT_NEAR(1.0 / p.z(), d, 1e-12);
        Eigen::Vector2d px = cam.project(p);
        EXPECT_NEAR(px.x(), x, 1e-9);
        EXPECT_NEAR(px.y(), y, 1e-9);
    }
}

TEST(Backproject, PrincipalPointPixelLandsOnAxis) {
    // a 1x1 camera with the principal point at the pixel center: disparity
    // 0.5 lifts to (0, 0, 2)
    Camera cam{50, 50, 0.5, 0.5, 1, 1};
    DisparityGrid g(1, 1);
    g.set(0, 0, 0.5f);
    PointSet ps = backproject(g, cam);
    ASSERT_EQ(ps.size(), 1u);
    EXPECT_NEAR(ps.points[0].x(), 0.0, 1e-12);
    EXPECT_NEAR(ps.points[0].y(), 0.0, 1e-12);
    EXPECT_NEAR(ps.points[0].z(), 2.0, 1e-12);
}

TEST(Backproject, TwoByTwoSymmetricQuad) {
    // centered 2x2 camera at unit depth: the four pixels form a symmetric
    // quad at (+-0.5, +-0.5, 1)
    Camera cam{1, 1, 1, 1, 2, 2};
    DisparityGrid g(2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) g.set(x, y, 1.0f);
    PointSet ps = backproject(g, cam);
    ASSERT_EQ(ps.size(), 4u);
    // row-major order: (0,0), (1,0), (0,1), (1,1)
    EXPECT_NEAR(ps.points[0].x(), -0.5, 1e-12);
    EXPECT_NEAR(ps.points[0].y(), -0.5, 1e-12);
    EXPECT_NEAR(ps.points[1].x(), 0.5, 1e-12);
    EXPECT_NEAR(ps.points[3].x(), 0.5, 1e-12);
    EXPECT_NEAR(ps.points[3].y(), 0.5, 1e-12);
    for (const Vec3& p : ps.points) EXPECT_NEAR(p.z(), 1.0, 1e-12);
}

TEST(Backproject, MaskAndColorSelection) {
    Camera cam{10, 10, 2, 2, 4, 4};
    DisparityGrid g(4, 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) g.set(x, y, 1.0f);
    g.set_invalid(1, 1);
    Mask sel(4, 4);
    sel.set(1, 1, true); // invalid: skipped
    sel.set(2, 2, true);
    sel.set(3, 0, true);
    Image img(4, 4, {0.2f, 0.4f, 0.6f});
    PointSet ps = backproject(g, cam, &sel, &img);
    ASSERT_EQ(ps.size(), 2u);
    ASSERT_TRUE(ps.has_colors());
    EXPECT_FLOAT_EQ(ps.colors[0].x(), 0.2f);
    EXPECT_FLOAT_EQ(ps.colors[1].z(), 0.6f);
    // empty selection yields an empty set, not an error
    PointSet none = backproject(g, cam, nullptr, nullptr);
    EXPECT_EQ(none.size(), g.valid_count());
    EXPECT_THROW(backproject(DisparityGrid(3, 4), cam), std::runtime_error);
}

TEST(Backproject, ReprojectionClosesTheLoop) {
    Camera cam{80, 70, 16, 12, 32, 24};
    SeededRng rng(4);
    DisparityGrid g(32, 24);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x)
            if (rng.uniform() < 0.7) g.set(x, y, float(rng.uniform(0.1, 1.5)));
    PointSet ps = backproject(g, cam);
    size_t i = 0;
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 32; ++x) {
            if (!g.is_valid(x, y)) continue;
            Eigen::Vector2d px = cam.project(ps.points[i++]);
            EXPECT_NEAR(px.x(), x, 1e-9);
            EXPECT_NEAR(px.y(), y, 1e-9);
        }
}

TEST(Tessellate, TwoByTwoMakesOneQuad) {
    Camera cam{10, 10, 1, 1, 2, 2};
    DisparityGrid g(2, 2);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) g.set(x, y, 1.0f);
    Image img(2, 2, {0.5f, 0.5f, 0.5f});
    TriangleMesh mesh = tessellate_background(g, cam, img);
    EXPECT_EQ(mesh.vertices.size(), 4u);
    EXPECT_EQ(mesh.triangles.size(), 2u);
    EXPECT_TRUE(mesh.has_colors());
}

TEST(Tessellate, InvalidPixelDropsAdjacentQuads) {
    Camera cam{10, 10, 1.5, 1.5, 3, 3};
    DisparityGrid g(3, 3);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) g.set(x, y, 1.0f);
    Image img(3, 3);
    TriangleMesh full = tessellate_background(g, cam, img);
    EXPECT_EQ(full.vertices.size(), 9u);
    EXPECT_EQ(full.triangles.size(), 8u); // 4 quads

    g.set_invalid(1, 1); // center pixel touches all 4 quads
    EXPECT_THROW(tessellate_background(g, cam, img), std::runtime_error);

    g.set(1, 1, 1.0f);
    g.set_invalid(0, 0); // corner touches 1 quad
    TriangleMesh mesh = tessellate_background(g, cam, img);
    EXPECT_EQ(mesh.vertices.size(), 8u); // one vertex per valid pixel
    EXPECT_EQ(mesh.triangles.size(), 6u);
}

TEST(Tessellate, TriangleCountMatchesValidQuads) {
    Camera cam{30, 30, 6, 5, 12, 10};
    SeededRng rng(9);
    DisparityGrid g(12, 10);
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x)
            if (rng.uniform() < 0.85) g.set(x, y, float(rng.uniform(0.2, 1.0)));
    size_t quads = 0;
    for (int y = 0; y + 1 < 10; ++y)
        for (int x = 0; x + 1 < 12; ++x)
            if (g.is_valid(x, y) && g.is_valid(x + 1, y) && g.is_valid(x, y + 1) &&
                g.is_valid(x + 1, y + 1))
                ++quads;
    ASSERT_GT(quads, 0u);
    Image img(12, 10);
    TriangleMesh mesh = tessellate_background(g, cam, img);
    EXPECT_EQ(mesh.triangles.size(), 2 * quads);
    EXPECT_EQ(mesh.vertices.size(), g.valid_count());
    EXPECT_NO_THROW(mesh.validate());
}

TEST(Tessellate, DiscontinuityRatioDropsDepthJumps) {
    Camera cam{10, 10, 1.5, 1, 3, 2};
    DisparityGrid g(3, 2);
    // left quad is flat, right quad spans a 3x disparity jump
    g.set(0, 0, 1.0f);
    g.set(0, 1, 1.0f);
    g.set(1, 0, 1.0f);
    g.set(1, 1, 1.0f);
    g.set(2, 0, 3.0f);
    g.set(2, 1, 3.0f);
    Image img(3, 2);
    TriangleMesh all = tessellate_background(g, cam, img);
    EXPECT_EQ(all.triangles.size(), 4u);
    TriangleMesh flat = tessellate_background(g, cam, img, 2.0);
    EXPECT_EQ(flat.triangles.size(), 2u);
    EXPECT_EQ(flat.vertices.size(), 6u); // vertices stay, quads go
}

TEST(NearestNeighbor, ExactOnKnownLayout) {
    std::vector<Vec3> targets = {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}};
    std::vector<Vec3> queries = {{1, 0, 0}, {9, 1, 0}, {-1, 9, 0}};
    auto matches = nearest_neighbor(queries, targets);
    ASSERT_EQ(matches.size(), 3u);
    EXPECT_EQ(matches[0].index, 0);
    EXPECT_EQ(matches[1].index, 1);
    EXPECT_EQ(matches[2].index, 2);
    EXPECT_NEAR(matches[0].distance, 1.0, 1e-12);
    EXPECT_NEAR(matches[1].distance, std::sqrt(2.0), 1e-12);
}

TEST(NearestNeighbor, RadiusBoundsMisses) {
    std::vector<Vec3> targets = {{0, 0, 0}};
    std::vector<Vec3> queries = {{2, 0, 0}};
    auto close = nearest_neighbor(queries, targets, 2.5);
    EXPECT_EQ(close[0].index, 0);
    auto far = nearest_neighbor(queries, targets, 0.5);
    EXPECT_EQ(far[0].index, -1);
    EXPECT_TRUE(std::isinf(far[0].distance));
    EXPECT_THROW(nearest_neighbor(queries, {}), std::runtime_error);
}

TEST(NearestNeighbor, MatchesBruteForce) {
    SeededRng rng(13);
    std::vector<Vec3> targets, queries;
    for (int i = 0; i < 400; ++i)
        targets.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    for (int i = 0; i < 250; ++i)
        queries.push_back({rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2)});
    auto matches = nearest_neighbor(queries, targets);
    for (size_t i = 0; i < queries.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& t : targets) best = std::min(best, (queries[i] - t).norm());
        EXPECT_NEAR(matches[i].distance, best, 1e-12);
        EXPECT_NEAR((queries[i] - targets[size_t(matches[i].index)]).norm(), best, 1e-12);
    }
}

TEST(VoxelDownsample, MergesToCentroids) {
    PointSet cloud;
    // two points in the same unit voxel, one far away
    cloud.points = {{0.1, 0.1, 0.1}, {0.3, 0.3, 0.3}, {5.5, 5.5, 5.5}};
    PointSet down = voxel_downsample(cloud, 1.0);
    ASSERT_EQ(down.size(), 2u);
    bool found_mean = false;
    for (const Vec3& p : down.points)
        if ((p - Vec3(0.2, 0.2, 0.2)).norm() < 1e-12) found_mean = true;
    EXPECT_TRUE(found_mean);
}

TEST(VoxelDownsample, FinePitchIsIdentity) {
    SeededRng rng(21);
    PointSet cloud;
    for (int i = 0; i < 50; ++i)
        cloud.points.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
    PointSet down = voxel_downsample(cloud, 1e-6);
    EXPECT_EQ(down.size(), cloud.size());
    EXPECT_THROW(voxel_downsample(cloud, 0.0), std::runtime_error);
}

TEST(VoxelDownsample, RepresentativesStayInVoxelBounds) {
    SeededRng rng(22);
    PointSet cloud;
    for (int i = 0; i < 500; ++i)
        cloud.points.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
    double voxel = 0.5;
    PointSet down = voxel_downsample(cloud, voxel);
    EXPECT_LT(down.size(), cloud.size());
    // each representative is a centroid of its voxel, so it lies inside it
    for (const Vec3& p : down.points)
        for (int a = 0; a < 3; ++a) {
            double cell = std::floor(p[a] / voxel);
            EXPECT_GE(p[a], cell * voxel - 1e-9);
            EXPECT_LE(p[a], (cell + 1) * voxel + 1e-9);
        }
}

TEST(VolumetricIou, IdenticalAndDisjoint) {
    TriangleMesh a = unit_cube();
    EXPECT_NEAR(volumetric_iou(a, a, 64), 1.0, 1.0 / 64);
    TriangleMesh b = unit_cube(Vec3(5, 0, 0));
    EXPECT_DOUBLE_EQ(volumetric_iou(a, b, 64), 0.0);
}

TEST(VolumetricIou, HalfShiftGivesOneThird) {
    // unit cubes offset by half an edge: intersection 1/2, union 3/2
    TriangleMesh a = unit_cube();
    TriangleMesh b = unit_cube(Vec3(0.5, 0, 0));
    EXPECT_NEAR(volumetric_iou(a, b, 64), 1.0 / 3.0, 0.05);
}

TEST(VolumetricIou, SymmetricAndValidated) {
    TriangleMesh a = unit_cube();
    TriangleMesh b = unit_cube(Vec3(0.3, 0.2, -0.1), 0.4);
    EXPECT_NEAR(volumetric_iou(a, b, 48), volumetric_iou(b, a, 48), 1e-12);
    EXPECT_THROW(volumetric_iou(a, b, 1), std::runtime_error);
    EXPECT_THROW(volumetric_iou(TriangleMesh{}, b), std::runtime_error);
}

TEST(VolumetricIou, SphereAgainstItselfAndCube) {
    TriangleMesh s = sphere_mesh(0.5, Vec3f(0.9f, 0.2f, 0.2f));
    EXPECT_GT(volumetric_iou(s, s, 64), 0.95);
    // sphere inscribed in the cube: IoU = (pi/6) within discretization slack
    TriangleMesh c = unit_cube();
    EXPECT_NEAR(volumetric_iou(s, c, 64), 3.14159265358979 / 6.0, 0.05);
}

TEST(BoxIou, AxisAlignedBounds) {
    TriangleMesh a = unit_cube();
    TriangleMesh b = unit_cube(Vec3(0.5, 0, 0));
    EXPECT_NEAR(box_iou(a, a), 1.0, 1e-12);
    EXPECT_NEAR(box_iou(a, b), 1.0 / 3.0, 1e-12);
    EXPECT_DOUBLE_EQ(box_iou(a, unit_cube(Vec3(9, 9, 9))), 0.0);
}

TEST(MergeMeshes, OffsetsIndicesAndFillsColors) {
    TriangleMesh a;
    a.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    a.triangles = {{0, 1, 2}};
    TriangleMesh b;
    b.vertices = {{0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
    b.colors = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    b.triangles = {{0, 1, 2}};
    TriangleMesh merged = merge_meshes({&a, &b, nullptr});
    ASSERT_EQ(merged.vertices.size(), 6u);
    ASSERT_EQ(merged.triangles.size(), 2u);
    EXPECT_EQ(merged.triangles[1][0], 3);
    ASSERT_TRUE(merged.has_colors());
    // color-less part gets neutral gray
    EXPECT_FLOAT_EQ(merged.colors[0].x(), 0.8f);
    EXPECT_FLOAT_EQ(merged.colors[3].x(), 1.0f);
    EXPECT_NO_THROW(merged.validate());
}

TEST(ObjIo, RoundTripWithColors) {
    TriangleMesh mesh;
    SeededRng rng(31);
    for (int i = 0; i < 20; ++i) {
        mesh.vertices.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
        mesh.colors.push_back({float(rng.uniform()), float(rng.uniform()), float(rng.uniform())});
    }
    for (int i = 0; i + 2 < 20; i += 3) mesh.triangles.push_back({i, i + 1, i + 2});
    fs::path dir = temp_dir();
    std::string path = (dir / "mesh.obj").string();
    save_mesh_obj(mesh, path);
    TriangleMesh back = load_mesh_obj(path);
    ASSERT_EQ(back.vertices.size(), mesh.vertices.size());
    ASSERT_EQ(back.triangles.size(), mesh.triangles.size());
    ASSERT_TRUE(back.has_colors());
    for (size_t i = 0; i < mesh.vertices.size(); ++i) {
        EXPECT_NEAR((back.vertices[i] - mesh.vertices[i]).norm(), 0.0, 1e-6);
        EXPECT_NEAR(back.colors[i].x(), mesh.colors[i].x(), 1e-6);
    }
    EXPECT_EQ(back.triangles, mesh.triangles);
}

TEST(ObjIo, ColorlessMeshStaysColorless) {
    TriangleMesh mesh;
    mesh.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    mesh.triangles = {{0, 1, 2}};
    fs::path dir = temp_dir();
    std::string path = (dir / "plain.obj").string();
    save_mesh_obj(mesh, path);
    TriangleMesh back = load_mesh_obj(path);
    EXPECT_FALSE(back.has_colors());
}

TEST(ObjIo, MalformedFilesRejected) {
    fs::path dir = temp_dir();
    std::string quad = (dir / "quad.obj").string();
    std::ofstream(quad) << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
    EXPECT_THROW(load_mesh_obj(quad), std::runtime_error);
    std::string bad_index = (dir / "oob.obj").string();
    std::ofstream(bad_index) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
    EXPECT_THROW(load_mesh_obj(bad_index), std::runtime_error);
    std::string bad_vertex = (dir / "vert.obj").string();
    std::ofstream(bad_vertex) << "v 0 0\n";
    EXPECT_THROW(load_mesh_obj(bad_vertex), std::runtime_error);
    EXPECT_THROW(load_mesh_obj("/nonexistent/mesh.obj"), std::runtime_error);
}

TEST(ObjIo, SlashFaceReferencesTolerated) {
    fs::path dir = temp_dir();
    std::string path = (dir / "slash.obj").string();
    std::ofstream(path) << "v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n";
    TriangleMesh mesh = load_mesh_obj(path);
    ASSERT_EQ(mesh.triangles.size(), 1u);
    EXPECT_EQ(mesh.triangles[0], (std::array<int, 3>{0, 1, 2}));
}

TEST(Aabb, ExpandAndVolume) {
    Aabb box;
    EXPECT_TRUE(box.empty());
    EXPECT_DOUBLE_EQ(box.volume(), 0.0);
    box.expand({0, 0, 0});
    box.expand({2, 3, 4});
    EXPECT_FALSE(box.empty());
    EXPECT_DOUBLE_EQ(box.volume(), 24.0);
    EXPECT_NEAR(box.extent().norm(), std::sqrt(4.0 + 9.0 + 16.0), 1e-12);
}
