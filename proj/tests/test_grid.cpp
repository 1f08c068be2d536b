#include <doctest.h>

#include <random>

#include "cvoxel/grid.hpp"

using namespace cvoxel;

namespace {

// independent neighbor scan used as the oracle for surface extraction
std::vector<std::size_t> brute_force_surface(const ShapeVolume& shape) {
    const GridDims& d = shape.dims();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < d.voxel_count(); ++i) {
        if (!shape.occupied(i)) continue;
        const auto [x, y, z] = d.from_linear(i);
        bool exposed = false;
        for (int a = 0; a < 3 && !exposed; ++a) {
            for (int s = -1; s <= 1; s += 2) {
                int n[3] = {x, y, z};
                n[a] += s;
                if (!d.contains(n[0], n[1], n[2]) ||
                    !shape.occupied(d.to_linear(n[0], n[1], n[2]))) {
                    exposed = true;
                    break;
                }
            }
        }
        if (exposed) out.push_back(i);
    }
    return out;
}

ShapeVolume solid_box(const GridDims& dims, int lo, int hi) {
    ShapeVolume shape(dims, ShapeKind::GroundTruth);
    for (int z = lo; z < hi; ++z)
        for (int y = lo; y < hi; ++y)
            for (int x = lo; x < hi; ++x) shape.set_value(dims.to_linear(x, y, z), 0, 1.0);
    return shape;
}

} // namespace

TEST_CASE("linear indexing round-trips over the whole grid") {
    const GridDims dims{5, 3, 4};
    std::size_t expected = 0;
    for (int z = 0; z < dims.depth; ++z) {
        for (int y = 0; y < dims.height; ++y) {
            for (int x = 0; x < dims.width; ++x) {
                const std::size_t i = dims.to_linear(x, y, z);
                CHECK(i == expected);
                const auto [rx, ry, rz] = dims.from_linear(i);
                CHECK(rx == x);
                CHECK(ry == y);
                CHECK(rz == z);
                ++expected;
            }
        }
    }
    CHECK(expected == dims.voxel_count());
}

TEST_CASE("extract_surface handles empty and singleton volumes") {
    const GridDims dims{4, 4, 4};
    ShapeVolume empty(dims, ShapeKind::GroundTruth);
    CHECK(extract_surface(empty).count() == 0);

    ShapeVolume single(dims, ShapeKind::GroundTruth);
    single.set_value(dims.to_linear(2, 1, 3), 0, 1.0);
    const SurfaceIndex surf = extract_surface(single);
    REQUIRE(surf.count() == 1);
    CHECK(surf.voxels[0] == dims.to_linear(2, 1, 3));
}

TEST_CASE("extract_surface of a centered solid block matches the neighbor-scan oracle") {
    const GridDims dims{5, 5, 5};
    const ShapeVolume shape = solid_box(dims, 1, 4);
    const SurfaceIndex surf = extract_surface(shape);
    CHECK(surf.count() == 26); // 3^3 minus the hidden center
    CHECK(surf.voxels == brute_force_surface(shape));
}

TEST_CASE("solid boxes of side n expose n^3 - (n-2)^3 voxels") {
    for (int n = 2; n <= 6; ++n) {
        const GridDims dims{n + 2, n + 2, n + 2};
        const ShapeVolume shape = solid_box(dims, 1, 1 + n);
        const std::size_t expected =
            static_cast<std::size_t>(n) * n * n - static_cast<std::size_t>(n - 2) * (n - 2) * (n - 2);
        CHECK(extract_surface(shape).count() == expected);
    }
}

TEST_CASE("surface indices are strictly increasing and occupied") {
    const GridDims dims{6, 6, 6};
    ShapeVolume shape(dims, ShapeKind::GroundTruth);
    std::mt19937_64 rng(11);
    for (std::size_t i = 0; i < dims.voxel_count(); ++i) {
        shape.set_value(i, 0, (rng() & 1) ? 1.0 : 0.0);
    }
    const SurfaceIndex surf = extract_surface(shape);
    for (std::size_t k = 0; k < surf.count(); ++k) {
        CHECK(shape.occupied(surf.voxels[k]));
        if (k > 0) CHECK(surf.voxels[k] > surf.voxels[k - 1]);
    }
    CHECK(surf.count() <= shape.occupied_count());
}

TEST_CASE("extract_surface rejects prediction volumes") {
    ShapeVolume pred(GridDims{2, 2, 2}, ShapeKind::Prediction, 0.7);
    CHECK_THROWS_AS(extract_surface(pred), std::invalid_argument);
}

TEST_CASE("threshold_occupancy applies the >= rule") {
    const GridDims dims{2, 1, 1};
    ShapeVolume pred(dims, ShapeKind::Prediction);

    pred.set_value(0, 0, 0.7);
    pred.set_value(1, 0, 0.7);
    ShapeVolume out = threshold_occupancy(pred, 0.5);
    CHECK(out.kind() == ShapeKind::GroundTruth);
    CHECK(out.value(0) == 1.0);
    CHECK(out.value(1) == 1.0);

    pred.set_value(0, 0, 0.5);
    pred.set_value(1, 0, 0.5);
    out = threshold_occupancy(pred, 0.5);
    CHECK(out.value(0) == 1.0); // boundary counts as occupied
    CHECK(out.value(1) == 1.0);

    pred.set_value(0, 0, 0.4);
    pred.set_value(1, 0, 0.6);
    out = threshold_occupancy(pred, 0.5);
    CHECK(out.value(0) == 0.0);
    CHECK(out.value(1) == 1.0);

    CHECK_THROWS_AS(threshold_occupancy(pred, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(threshold_occupancy(pred, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(threshold_occupancy(pred, -2.0), std::invalid_argument);
}

TEST_CASE("split_joint separates occupancy from color") {
    const GridDims dims{2, 1, 1};
    const Rgb empty_code{-1.0, -1.0, -1.0};
    JointVolume joint(dims);
    joint.set_vec(0, empty_code);
    joint.set_vec(1, {1.0, 0.0, 0.0}); // occupied red voxel

    const auto [shape, color] = split_joint(joint, empty_code);
    CHECK(shape.kind() == ShapeKind::GroundTruth);
    CHECK(shape.value(0) == 0.0);
    CHECK(shape.value(1) == 1.0);
    CHECK(color.vec(0) == Rgb{0.0, 0.0, 0.0});
    CHECK(color.vec(1) == Rgb{1.0, 0.0, 0.0});
}

TEST_CASE("split_joint of an all-empty volume yields an all-zero shape") {
    JointVolume joint(GridDims{3, 3, 3});
    for (std::size_t i = 0; i < joint.voxel_count(); ++i) joint.set_vec(i, {-0.5, -0.5, -0.5});
    const auto [shape, color] = split_joint(joint, {-0.5, -0.5, -0.5});
    for (std::size_t i = 0; i < shape.voxel_count(); ++i) CHECK(shape.value(i) == 0.0);
}

TEST_CASE("split_joint then make_joint reproduces occupied voxels exactly") {
    const GridDims dims{4, 3, 2};
    const Rgb empty_code{-1.0, -1.0, -1.0};
    JointVolume joint(dims);
    std::mt19937_64 rng(7);
    for (std::size_t i = 0; i < joint.voxel_count(); ++i) {
        if (rng() & 1) {
            joint.set_vec(i, {uniform01(rng), uniform01(rng), uniform01(rng)});
        } else {
            joint.set_vec(i, empty_code);
        }
    }
    const auto [shape, color] = split_joint(joint, empty_code);
    const JointVolume rejoined = make_joint(shape, color, empty_code);
    CHECK(rejoined == joint);
}
