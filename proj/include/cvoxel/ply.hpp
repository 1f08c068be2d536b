#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvoxel/grid.hpp"
#include "cvoxel/math.hpp"

namespace cvoxel {

struct PlyCloud {
    std::vector<Vec3> positions;
    std::vector<std::array<std::uint8_t, 3>> colors;

    std::size_t size() const { return positions.size(); }
};

/// ASCII PLY point cloud: one vertex per surface voxel, placed at the voxel
/// center in world units, with 8-bit RGB.
inline void write_surface_ply(const std::string& path, const ShapeVolume& shape,
                              const ColorVolume& color, const GridFrame& frame) {
    detail::require_ground_truth(shape, "write_surface_ply");
    detail::require_same_dims(shape.dims(), color.dims(), "write_surface_ply");
    const SurfaceIndex surf = extract_surface(shape);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_surface_ply: cannot open " + path);
    out << "ply\n"
        << "format ascii 1.0\n"
        << "element vertex " << surf.count() << "\n"
        << "property float x\n"
        << "property float y\n"
        << "property float z\n"
        << "property uchar red\n"
        << "property uchar green\n"
        << "property uchar blue\n"
        << "end_header\n";
    char line[128];
    for (std::size_t i : surf.voxels) {
        const auto [x, y, z] = shape.dims().from_linear(i);
        const Vec3 p = frame.voxel_center(x, y, z);
        const Rgb c = color.vec(i);
        std::snprintf(line, sizeof(line), "%.6f %.6f %.6f %d %d %d\n", p[0], p[1], p[2],
                      static_cast<int>(std::lround(clamp01(c[0]) * 255.0)),
                      static_cast<int>(std::lround(clamp01(c[1]) * 255.0)),
                      static_cast<int>(std::lround(clamp01(c[2]) * 255.0)));
        out << line;
    }
    if (!out) throw std::runtime_error("write_surface_ply: write failed for " + path);
}

/// Minimal reader for the ASCII PLY layout written above.
inline PlyCloud read_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_ply: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ply") {
        throw std::runtime_error(path + ": not a PLY file");
    }
    std::size_t vertex_count = 0;
    bool ascii = false;
    std::vector<std::string> properties;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (word == "element") {
            std::string what;
            ls >> what >> vertex_count;
            if (what != "vertex") throw std::runtime_error(path + ": unsupported element " + what);
        } else if (word == "property") {
            std::string type, name;
            ls >> type >> name;
            properties.push_back(name);
        } else if (word == "end_header") {
            break;
        } else if (word == "comment") {
            continue;
        }
    }
    if (!ascii) throw std::runtime_error(path + ": only ascii PLY is supported");
    const std::vector<std::string> expected = {"x", "y", "z", "red", "green", "blue"};
    if (properties != expected) {
        throw std::runtime_error(path + ": unsupported vertex property layout");
    }

    PlyCloud cloud;
    cloud.positions.reserve(vertex_count);
    cloud.colors.reserve(vertex_count);
    for (std::size_t i = 0; i < vertex_count; ++i) {
        Vec3 p;
        int r, g, b;
        if (!(in >> p[0] >> p[1] >> p[2] >> r >> g >> b)) {
            throw std::runtime_error(path + ": truncated vertex list");
        }
        cloud.positions.push_back(p);
        cloud.colors.push_back({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                static_cast<std::uint8_t>(b)});
    }
    return cloud;
}

} // namespace cvoxel
