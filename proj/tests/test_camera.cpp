#include <doctest.h>

#include <random>

#include "cvoxel/camera.hpp"
#include "test_util.hpp"

using namespace cvoxel;

namespace {

Camera identity_camera(double fx, double fy, double cx, double cy, Vec3 t = {0, 0, 0},
                       int img_w = 128, int img_h = 128) {
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    cam.translation = t;
    cam.img_w = img_w;
    cam.img_h = img_h;
    return cam;
}

// independent 3x4 matrix route: Theta = K [R T], homogeneous divide
std::array<double, 2> project_via_matrix(const Camera& cam, const Vec3& p, double scale) {
    double k[9] = {cam.fx, 0, cam.cx, 0, cam.fy, cam.cy, 0, 0, 1};
    double theta[12];
    for (int row = 0; row < 3; ++row) {
        for (int col = 0; col < 3; ++col) {
            double v = 0;
            for (int m = 0; m < 3; ++m) v += k[3 * row + m] * cam.rotation[3 * m + col];
            theta[4 * row + col] = scale * v;
        }
        double v = 0;
        for (int m = 0; m < 3; ++m) v += k[3 * row + m] * cam.translation[m];
        theta[4 * row + 3] = scale * v;
    }
    const double h[4] = {p[0], p[1], p[2], 1.0};
    double uvw[3];
    for (int row = 0; row < 3; ++row) {
        uvw[row] = theta[4 * row] * h[0] + theta[4 * row + 1] * h[1] + theta[4 * row + 2] * h[2] +
                   theta[4 * row + 3] * h[3];
    }
    return {uvw[0] / uvw[2], uvw[1] / uvw[2]};
}

} // namespace

TEST_CASE("project matches hand-evaluated pinhole cases") {
    const Camera unit = identity_camera(1, 1, 0, 0);
    auto p = project(unit, {0, 0, 1});
    CHECK(p.u == doctest::Approx(0.0));
    CHECK(p.v == doctest::Approx(0.0));
    CHECK(p.depth == doctest::Approx(1.0));

    p = project(unit, {1, 2, 2});
    CHECK(p.u == doctest::Approx(0.5));
    CHECK(p.v == doctest::Approx(1.0));
    CHECK(p.depth == doctest::Approx(2.0));

    const Camera offset = identity_camera(100, 100, 64, 64, {0, 0, 3});
    p = project(offset, {0.3, 0, 0});
    CHECK(p.u == doctest::Approx(74.0));
    CHECK(p.v == doctest::Approx(64.0));
    CHECK(p.depth == doctest::Approx(3.0));
}

TEST_CASE("project rejects points at or behind the camera") {
    const Camera cam = identity_camera(1, 1, 0, 0);
    CHECK_THROWS_AS(project(cam, {0, 0, -1}), std::runtime_error);
    CHECK_THROWS_AS(project(cam, {0, 0, 0}), std::runtime_error);
    CHECK_THROWS_AS(project(cam, {1, 1, 1e-9}), std::runtime_error);
}

TEST_CASE("projection equals the 3x4 matrix route and is scale invariant") {
    const Camera cam = look_at_camera({20, 10, -15}, {0, 0, 0}, {0, 1, 0}, 150, 140, 63.5, 63.5,
                                      128, 128);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 p = {uniform(rng, -4.0, 4.0), uniform(rng, -4.0, 4.0), uniform(rng, -4.0, 4.0)};
        const auto direct = project(cam, p);
        const auto via_matrix = project_via_matrix(cam, p, 1.0);
        CHECK(direct.u == doctest::Approx(via_matrix[0]).epsilon(1e-10));
        CHECK(direct.v == doctest::Approx(via_matrix[1]).epsilon(1e-10));

        const double lambda = uniform(rng, 0.1, 10.0);
        const auto scaled = project_via_matrix(cam, p, lambda);
        CHECK(scaled[0] == doctest::Approx(via_matrix[0]).epsilon(1e-10));
        CHECK(scaled[1] == doctest::Approx(via_matrix[1]).epsilon(1e-10));
    }
}

TEST_CASE("projection is invariant under camera-frame-preserving rotations") {
    const Camera cam = look_at_camera({0, 5, -20}, {0, 0, 0}, {0, 1, 0}, 100, 100, 64, 64, 128,
                                      128);
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto q = testutil::random_rotation(100 + trial);
        Camera rotated = cam;
        // R' = R * Q, row-major product
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col) {
                double v = 0;
                for (int m = 0; m < 3; ++m) v += cam.rotation[3 * row + m] * q[3 * m + col];
                rotated.rotation[3 * row + col] = v;
            }
        }
        rotated.validate();

        const Vec3 p = {uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)};
        // Q^T p
        const Vec3 qt_p = {q[0] * p[0] + q[3] * p[1] + q[6] * p[2],
                           q[1] * p[0] + q[4] * p[1] + q[7] * p[2],
                           q[2] * p[0] + q[5] * p[1] + q[8] * p[2]};
        const auto a = project(cam, p);
        const auto b = project(rotated, qt_p);
        CHECK(a.u == doctest::Approx(b.u).epsilon(1e-10));
        CHECK(a.v == doctest::Approx(b.v).epsilon(1e-10));
        CHECK(a.depth == doctest::Approx(b.depth).epsilon(1e-10));
    }
}

TEST_CASE("camera validation rejects broken rotations and focals") {
    Camera cam = identity_camera(100, 100, 64, 64);
    CHECK_NOTHROW(cam.validate());

    Camera bad_focal = cam;
    bad_focal.fx = 0.0;
    CHECK_THROWS_AS(bad_focal.validate(), std::invalid_argument);

    Camera skewed = cam;
    skewed.rotation = {1, 0.5, 0, 0, 1, 0, 0, 0, 1};
    CHECK_THROWS_AS(skewed.validate(), std::invalid_argument);

    Camera mirrored = cam; // orthonormal but det = -1
    mirrored.rotation = {1, 0, 0, 0, 1, 0, 0, 0, -1};
    CHECK_THROWS_AS(mirrored.validate(), std::invalid_argument);
}

TEST_CASE("a lone voxel is visible") {
    const GridDims dims{3, 3, 3};
    ShapeVolume shape(dims, ShapeKind::GroundTruth);
    shape.set_value(dims.to_linear(1, 1, 1), 0, 1.0);
    const SurfaceIndex surf = extract_surface(shape);
    GridFrame frame;
    frame.origin = {-1.5, -1.5, 5.0}; // voxel center lands at (0,0,6.5)
    const Camera cam = identity_camera(50, 50, 16, 16, {0, 0, 0}, 32, 32);

    const VisibilityMap vis = classify_visibility(cam, shape, surf, frame);
    REQUIRE(vis.flags.size() == 1);
    CHECK(vis.visible(0));
}

TEST_CASE("on a shared ray the nearer voxel wins") {
    const GridDims dims{1, 1, 8};
    ShapeVolume shape(dims, ShapeKind::GroundTruth);
    shape.set_value(dims.to_linear(0, 0, 2), 0, 1.0);
    shape.set_value(dims.to_linear(0, 0, 5), 0, 1.0);
    const SurfaceIndex surf = extract_surface(shape);
    REQUIRE(surf.count() == 2);

    GridFrame frame;
    frame.origin = {-0.5, -0.5, 0.0}; // centers on the optical axis
    const Camera cam = identity_camera(30, 30, 8, 8, {0, 0, 0}, 16, 16);
    const VisibilityMap vis = classify_visibility(cam, shape, surf, frame);
    CHECK(vis.visible(0));
    CHECK_FALSE(vis.visible(1));
}

TEST_CASE("visibility of a head-on cube matches a fine-step ray-march oracle") {
    // integer pixel pitch at the front-face depth keeps whole columns on one pixel
    const GridDims dims{16, 16, 16};
    ShapeVolume shape(dims, ShapeKind::GroundTruth);
    for (int z = 6; z < 10; ++z)
        for (int y = 6; y < 10; ++y)
            for (int x = 6; x < 10; ++x) shape.set_value(dims.to_linear(x, y, z), 0, 1.0);
    const SurfaceIndex surf = extract_surface(shape);
    GridFrame frame; // grid occupies [0,16)^3 in world units

    const double radius = 50.0;
    const Vec3 cam_pos = {8.0, 8.0, 8.0 - radius};
    const double front_depth = radius - 2.0 + 0.5; // front face plane z = 6.5
    const Camera cam =
        look_at_camera(cam_pos, {8.0, 8.0, 8.0}, {0, 1, 0}, 2.0 * front_depth, 2.0 * front_depth,
                       32.0, 32.0, 64, 64);

    const VisibilityMap vis = classify_visibility(cam, shape, surf, frame);

    // oracle: fine-step ray march from the camera toward each voxel center
    std::vector<bool> oracle(surf.count());
    for (std::size_t k = 0; k < surf.count(); ++k) {
        const auto [x, y, z] = dims.from_linear(surf.voxels[k]);
        const Vec3 target = frame.voxel_center(x, y, z);
        const Vec3 dir = target - cam_pos;
        bool reached = false;
        for (double t = 0.0; t <= 1.0; t += 1e-4) {
            const Vec3 p = cam_pos + t * dir;
            const int cx = static_cast<int>(std::floor(p[0]));
            const int cy = static_cast<int>(std::floor(p[1]));
            const int cz = static_cast<int>(std::floor(p[2]));
            if (!dims.contains(cx, cy, cz)) continue;
            const std::size_t hit = dims.to_linear(cx, cy, cz);
            if (shape.occupied(hit)) {
                reached = hit == surf.voxels[k];
                break;
            }
        }
        oracle[k] = reached;
    }

    std::size_t visible = 0;
    for (std::size_t k = 0; k < surf.count(); ++k) {
        CHECK(vis.visible(k) == oracle[k]);
        visible += vis.visible(k) ? 1 : 0;
    }
    CHECK(visible == 16); // exactly the 4x4 front face
}

TEST_CASE("per pixel, only voxels within the depth tolerance are visible") {
    const GridDims dims{8, 8, 8};
    ShapeVolume shape(dims, ShapeKind::GroundTruth);
    std::mt19937_64 rng(21);
    for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
        shape.set_value(i, 0, uniform01(rng) < 0.3 ? 1.0 : 0.0);
    }
    const SurfaceIndex surf = extract_surface(shape);
    if (surf.empty()) return;
    GridFrame frame;
    const Camera cam = look_at_camera({4.0, 5.0, -30.0}, {4.0, 4.0, 4.0}, {0, 1, 0}, 120, 120, 32,
                                      32, 64, 64);
    const VisibilityMap vis = classify_visibility(cam, shape, surf, frame);

    for (std::size_t k = 0; k < surf.count(); ++k) {
        const auto& proj = vis.projections[k];
        const int px = static_cast<int>(std::lround(std::clamp(proj.u, 0.0, cam.img_w - 1.0)));
        const int py = static_cast<int>(std::lround(std::clamp(proj.v, 0.0, cam.img_h - 1.0)));
        const double buffered = vis.depth_buffer[static_cast<std::size_t>(py) * cam.img_w + px];
        if (vis.visible(k)) {
            CHECK(proj.depth <= buffered + 0.5 * frame.voxel_size);
        } else {
            CHECK(proj.depth > buffered + 0.5 * frame.voxel_size);
        }
    }
}

TEST_CASE("classify_visibility names voxels behind the camera") {
    const GridDims dims{2, 1, 1};
    ShapeVolume shape(dims, ShapeKind::GroundTruth, 1.0);
    const SurfaceIndex surf = extract_surface(shape);
    GridFrame frame;
    frame.origin = {0.0, 0.0, -10.0}; // both voxels behind z=0
    const Camera cam = identity_camera(10, 10, 4, 4, {0, 0, 0}, 8, 8);
    CHECK_THROWS_WITH_AS(classify_visibility(cam, shape, surf, frame),
                         doctest::Contains("behind the camera"), std::runtime_error);
}
