#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "cvoxel/camera.hpp"
#include "cvoxel/grid.hpp"
#include "cvoxel/math.hpp"

namespace testutil {

/// Fresh scratch directory under the system temp dir, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::uint64_t counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("cvoxel_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

/// Rotation matrix from a seeded random axis-angle, row-major.
inline std::array<double, 9> random_rotation(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    cvoxel::Vec3 axis = {cvoxel::uniform(rng, -1.0, 1.0), cvoxel::uniform(rng, -1.0, 1.0),
                         cvoxel::uniform(rng, -1.0, 1.0)};
    axis = cvoxel::normalized(axis);
    const double angle = cvoxel::uniform(rng, 0.1, 3.0);
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    const double x = axis[0], y = axis[1], z = axis[2];
    return {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
            t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
            t * x * z - s * y, t * y * z + s * x, t * z * z + c};
}

inline cvoxel::Vec3 apply_rotation(const std::array<double, 9>& r, const cvoxel::Vec3& p) {
    return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2], r[3] * p[0] + r[4] * p[1] + r[5] * p[2],
            r[6] * p[0] + r[7] * p[1] + r[8] * p[2]};
}

} // namespace testutil
