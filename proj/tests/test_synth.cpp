#include <doctest.h>

#include <cmath>

#include "cvoxel/synth.hpp"

using namespace cvoxel;

TEST_CASE("scene text parses dims, frame and primitives") {
    const std::string text = R"(# demo scene
dims 8 8 8
voxel_size 0.5
origin -1 0 2
box 1 1 1 3 3 3  0.9 0.1 0.1
sphere 4 4 4 2  0.1 0.9 0.1
checker 0 0 0 8 8 8 2  0 0 0  1 1 1
)";
    const SceneSpec spec = parse_scene(text);
    CHECK(spec.dims == GridDims{8, 8, 8});
    CHECK(spec.frame.voxel_size == 0.5);
    CHECK(spec.frame.origin == Vec3{-1.0, 0.0, 2.0});
    CHECK(spec.primitives.size() == 3);

    CHECK_THROWS_AS(parse_scene("box 1 2 3\n"), std::runtime_error);
    CHECK_THROWS_AS(parse_scene("warp 0 0 0\n"), std::runtime_error);
}

TEST_CASE("box rasterization equals analytic membership") {
    SceneSpec spec;
    spec.dims = {8, 8, 8};
    spec.primitives.emplace_back(BoxPrim{1, 2, 3, 4, 6, 7, {0.3, 0.6, 0.9}});
    const auto [shape, color] = gen_scene(spec);
    for (int z = 0; z < 8; ++z) {
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                const bool inside = x >= 1 && x < 4 && y >= 2 && y < 6 && z >= 3 && z < 7;
                const std::size_t i = spec.dims.to_linear(x, y, z);
                CHECK(shape.occupied(i) == inside);
                if (inside) CHECK(color.vec(i) == Rgb{0.3, 0.6, 0.9});
            }
        }
    }
}

TEST_CASE("sphere voxel count approximates the analytic volume") {
    for (double r : {6.0, 7.5}) {
        SceneSpec spec;
        spec.dims = {18, 18, 18};
        spec.primitives.emplace_back(SpherePrim{9.0, 9.0, 9.0, r, {1, 1, 1}});
        const auto [shape, color] = gen_scene(spec);
        const double expected = 4.0 / 3.0 * 3.14159265358979323846 * r * r * r;
        const double count = static_cast<double>(shape.occupied_count());
        CHECK(count > 0.9 * expected);
        CHECK(count < 1.1 * expected);
    }
}

TEST_CASE("mirror-symmetric scenes equal their x-mirrored selves") {
    SceneSpec spec;
    spec.dims = {16, 16, 16};
    spec.primitives.emplace_back(BoxPrim{4, 6, 6, 12, 10, 10, {0.2, 0.4, 0.8}});
    spec.primitives.emplace_back(SpherePrim{8.0, 12.0, 8.0, 2.5, {0.9, 0.9, 0.1}});
    const auto [shape, color] = gen_scene(spec);
    for (int z = 0; z < 16; ++z) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                const std::size_t i = spec.dims.to_linear(x, y, z);
                const std::size_t m = spec.dims.to_linear(15 - x, y, z);
                CHECK(shape.value(i) == shape.value(m));
                CHECK(color.vec(i) == color.vec(m));
            }
        }
    }
}

TEST_CASE("primitives must fit inside the grid") {
    SceneSpec spec;
    spec.dims = {8, 8, 8};
    spec.primitives.emplace_back(BoxPrim{0, 0, 0, 9, 2, 2, {1, 0, 0}});
    CHECK_THROWS_AS(gen_scene(spec), std::invalid_argument);

    SceneSpec sphere_out;
    sphere_out.dims = {8, 8, 8};
    sphere_out.primitives.emplace_back(SpherePrim{1.0, 4.0, 4.0, 3.0, {1, 0, 0}});
    CHECK_THROWS_AS(gen_scene(sphere_out), std::invalid_argument);
}

TEST_CASE("overlaps resolve last-writer-wins") {
    SceneSpec spec;
    spec.dims = {4, 4, 4};
    spec.primitives.emplace_back(BoxPrim{0, 0, 0, 4, 4, 4, {1, 0, 0}});
    spec.primitives.emplace_back(BoxPrim{1, 1, 1, 3, 3, 3, {0, 1, 0}});
    const auto [shape, color] = gen_scene(spec);
    CHECK(color.vec(spec.dims.to_linear(2, 2, 2)) == Rgb{0, 1, 0});
    CHECK(color.vec(spec.dims.to_linear(0, 0, 0)) == Rgb{1, 0, 0});
}

TEST_CASE("facebox paints by nearest face with axis-order ties") {
    SceneSpec spec;
    spec.dims = {6, 6, 6};
    FaceBoxPrim p{1, 1, 1, 5, 5, 5, {}};
    p.colors = {Rgb{1, 0, 0}, Rgb{0, 1, 0}, Rgb{0, 0, 1},
                Rgb{1, 1, 0}, Rgb{1, 0, 1}, Rgb{0, 1, 1}};
    spec.primitives.emplace_back(p);
    const auto [shape, color] = gen_scene(spec);
    CHECK(color.vec(spec.dims.to_linear(1, 3, 3)) == Rgb{1, 0, 0}); // -x face
    CHECK(color.vec(spec.dims.to_linear(4, 3, 3)) == Rgb{0, 1, 0}); // +x face
    CHECK(color.vec(spec.dims.to_linear(3, 1, 3)) == Rgb{0, 0, 1}); // -y face
    CHECK(color.vec(spec.dims.to_linear(1, 1, 1)) == Rgb{1, 0, 0}); // corner: -x wins
}

TEST_CASE("lbracket keeps two arms only") {
    SceneSpec spec;
    spec.dims = {8, 8, 8};
    spec.primitives.emplace_back(LBracketPrim{1, 1, 3, 7, 7, 5, 2, {0.5, 0.5, 0.5}});
    const auto [shape, color] = gen_scene(spec);
    CHECK(shape.occupied(spec.dims.to_linear(5, 2, 4)));  // horizontal arm
    CHECK(shape.occupied(spec.dims.to_linear(2, 6, 4)));  // vertical arm
    CHECK_FALSE(shape.occupied(spec.dims.to_linear(5, 6, 4))); // notch
}

TEST_CASE("a lone red voxel renders at the principal point") {
    SceneSpec spec;
    spec.dims = {9, 9, 9};
    spec.primitives.emplace_back(BoxPrim{4, 4, 4, 5, 5, 5, {1.0, 0.0, 0.0}});
    const auto [shape, color] = gen_scene(spec);
    const Vec3 center = spec.frame.grid_center(spec.dims);
    const Camera cam = look_at_camera({center[0], center[1], center[2] - 30.0}, center, {0, 1, 0},
                                      60, 60, 32, 32, 64, 64);
    const ViewImage view = render_view(cam, shape, color, spec.frame);
    CHECK(view.foreground(32, 32));
    CHECK(view.pixel(32, 32) == Rgb{1.0, 0.0, 0.0});
    CHECK(view.foreground_count() > 0);
    CHECK(view.foreground_count() < 64); // a small blob, not the whole frame
}

TEST_CASE("an empty volume renders to pure background") {
    SceneSpec spec;
    spec.dims = {4, 4, 4};
    const auto [shape, color] = gen_scene(spec);
    const Camera cam = make_azimuth_cameras(1, 0.0, 0.0, spec.dims, spec.frame, 32, 32).front();
    const ViewImage view = render_view(cam, shape, color, spec.frame);
    CHECK(view.foreground_count() == 0);
    for (double v : view.rgb) CHECK(v == 1.0);
}

TEST_CASE("rendering from inside an occupied voxel fails") {
    SceneSpec spec;
    spec.dims = {4, 4, 4};
    spec.primitives.emplace_back(BoxPrim{0, 0, 0, 4, 4, 4, {1, 1, 0}});
    const auto [shape, color] = gen_scene(spec);
    Camera cam;
    cam.fx = cam.fy = 10;
    cam.cx = cam.cy = 8;
    cam.img_w = cam.img_h = 16;
    cam.rotation = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    cam.translation = {-2.0, -2.0, -2.0}; // camera center at (2,2,2), inside the box
    CHECK_THROWS_AS(render_view(cam, shape, color, spec.frame), std::runtime_error);
}

TEST_CASE("every visible voxel projects onto a foreground pixel") {
    SceneSpec spec;
    spec.dims = {16, 16, 16};
    spec.primitives.emplace_back(CheckerPrim{4, 4, 4, 12, 12, 12, 4, {0.8, 0.1, 0.1}, {0.1, 0.1, 0.8}});
    const auto [shape, color] = gen_scene(spec);
    const SurfaceIndex surf = extract_surface(shape);
    for (const Camera& cam : make_azimuth_cameras(4, 0.0, 0.0, spec.dims, spec.frame, 96, 96)) {
        const ViewImage view = render_view(cam, shape, color, spec.frame);
        const VisibilityMap vis = classify_visibility(cam, shape, surf, spec.frame);
        for (std::size_t k = 0; k < surf.count(); ++k) {
            if (!vis.visible(k)) continue;
            const int px =
                static_cast<int>(std::lround(std::clamp(vis.projections[k].u, 0.0, cam.img_w - 1.0)));
            const int py =
                static_cast<int>(std::lround(std::clamp(vis.projections[k].v, 0.0, cam.img_h - 1.0)));
            CHECK(view.foreground(px, py));
        }
    }
}

TEST_CASE("azimuth rigs step uniformly and stay look-at consistent") {
    GridFrame frame;
    const GridDims dims{32, 32, 32};
    const auto cams = make_azimuth_cameras(12, 20.0, 0.0, dims, frame);
    REQUIRE(cams.size() == 12);
    const Vec3 center = frame.grid_center(dims);

    // all cameras sit on a circle and project the grid center onto the principal point
    const double r0 = norm(cams[0].position() - center);
    for (const Camera& cam : cams) {
        CHECK(norm(cam.position() - center) == doctest::Approx(r0).epsilon(1e-9));
        const auto proj = project(cam, center);
        CHECK(proj.u == doctest::Approx(cam.cx).epsilon(1e-9));
        CHECK(proj.v == doctest::Approx(cam.cy).epsilon(1e-9));
    }

    // consecutive cameras are one 30-degree azimuth step apart
    constexpr double kPi = 3.14159265358979323846;
    for (std::size_t k = 0; k + 1 < cams.size(); ++k) {
        const Vec3 a = cams[k].position() - center;
        const Vec3 b = cams[k + 1].position() - center;
        const double cos_step = dot({a[0], 0.0, a[2]}, {b[0], 0.0, b[2]}) /
                                (norm({a[0], 0.0, a[2]}) * norm({b[0], 0.0, b[2]}));
        CHECK(std::acos(std::clamp(cos_step, -1.0, 1.0)) ==
              doctest::Approx(kPi / 6.0).epsilon(1e-9));
    }

    CHECK(make_azimuth_cameras(1, 0.0, 0.0, dims, frame).size() == 1);
}

TEST_CASE("rotating the scene by one azimuth step shifts the camera index") {
    GridFrame frame;
    const GridDims dims{16, 16, 16};
    const auto cams = make_azimuth_cameras(12, 15.0, 40.0, dims, frame, 64, 64, 90.0);
    const Vec3 center = frame.grid_center(dims);
    constexpr double kPi = 3.14159265358979323846;
    const double step = 2.0 * kPi / 12.0;
    const double c = std::cos(step), s = std::sin(step);

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const Vec3 p = {uniform(rng, 4.0, 12.0), uniform(rng, 4.0, 12.0), uniform(rng, 4.0, 12.0)};
        // rotate about the vertical axis through the grid center by one step
        const Vec3 q = p - center;
        const Vec3 rotated = {c * q[0] - s * q[2] + center[0], q[1] + center[1],
                              s * q[0] + c * q[2] + center[2]};
        for (std::size_t k = 0; k + 1 < cams.size(); ++k) {
            const auto a = project(cams[k], p);
            const auto b = project(cams[k + 1], rotated);
            CHECK(a.u == doctest::Approx(b.u).epsilon(1e-9));
            CHECK(a.v == doctest::Approx(b.v).epsilon(1e-9));
            CHECK(a.depth == doctest::Approx(b.depth).epsilon(1e-9));
        }
    }
}

TEST_CASE("the fit demo crushes the shape loss on a small scene") {
    SceneSpec spec;
    spec.dims = {16, 16, 16};
    spec.primitives.emplace_back(CheckerPrim{4, 4, 4, 12, 12, 12, 4, {0.8, 0.2, 0.1}, {0.1, 0.3, 0.8}});
    const Camera cam = make_azimuth_cameras(1, 20.0, 0.0, spec.dims, spec.frame).front();

    FitDemoConfig config;
    config.iters = 200;
    config.lr = 0.5;
    const FitDemoReport report = direct_fit_demo(spec, cam, config);
    REQUIRE(report.shape_loss.size() == 201);
    CHECK(report.shape_loss.back() < 0.01 * report.shape_loss.front());
    CHECK(report.color_loss.back() < report.color_loss.front());
    for (double v : report.shape_loss) CHECK(std::isfinite(v));
    for (double v : report.color_loss) CHECK(std::isfinite(v));
}

TEST_CASE("flows started at the target never move") {
    SceneSpec spec;
    spec.dims = {12, 12, 12};
    spec.primitives.emplace_back(BoxPrim{4, 4, 4, 8, 8, 8, {0.6, 0.3, 0.2}});
    const Camera cam = make_azimuth_cameras(1, 10.0, 0.0, spec.dims, spec.frame).front();

    FitDemoConfig config;
    config.iters = 30;
    config.lr = 0.5;
    config.flow_noise = 0.0;
    config.init_flow_at_target = true;
    const FitDemoReport report = direct_fit_demo(spec, cam, config);
    for (double v : report.flow_loss) CHECK(v == 0.0);
}

TEST_CASE("with a small step the shape loss is non-increasing after warmup") {
    SceneSpec spec;
    spec.dims = {12, 12, 12};
    spec.primitives.emplace_back(BoxPrim{4, 4, 4, 8, 8, 8, {0.6, 0.3, 0.2}});
    const Camera cam = make_azimuth_cameras(1, 10.0, 0.0, spec.dims, spec.frame).front();

    FitDemoConfig config;
    config.iters = 100;
    config.lr = 0.05;
    const FitDemoReport report = direct_fit_demo(spec, cam, config);
    for (std::size_t i = 11; i < report.shape_loss.size(); ++i) {
        CHECK(report.shape_loss[i] <= report.shape_loss[i - 1] + 1e-12);
    }
}
