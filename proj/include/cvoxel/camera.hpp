#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvoxel/grid.hpp"
#include "cvoxel/math.hpp"

namespace cvoxel {

constexpr double kDepthEpsilon = 1e-6; // minimum camera-frame depth for projection

/// Pinhole camera: intrinsics (fx, fy, cx, cy) in pixels plus world-to-camera
/// extrinsics [R|T]. Pixel (u,v) = (column, row), pixel centers at integer
/// coordinates, origin at the top-left pixel center.
struct Camera {
    double fx = 0.0, fy = 0.0;
    double cx = 0.0, cy = 0.0;
    std::array<double, 9> rotation{};   // row-major, world -> camera
    Vec3 translation{};
    int img_w = 0, img_h = 0;

    Vec3 to_camera(const Vec3& p) const {
        const auto& r = rotation;
        return {r[0] * p[0] + r[1] * p[1] + r[2] * p[2] + translation[0],
                r[3] * p[0] + r[4] * p[1] + r[5] * p[2] + translation[1],
                r[6] * p[0] + r[7] * p[1] + r[8] * p[2] + translation[2]};
    }

    /// Camera center in world coordinates, -R^T T.
    Vec3 position() const {
        const auto& r = rotation;
        const Vec3& t = translation;
        return {-(r[0] * t[0] + r[3] * t[1] + r[6] * t[2]),
                -(r[1] * t[0] + r[4] * t[1] + r[7] * t[2]),
                -(r[2] * t[0] + r[5] * t[1] + r[8] * t[2])};
    }

    /// Checks R orthonormality (1e-9), det(R) = 1 and positive focal lengths.
    void validate() const {
        if (!(fx > 0.0) || !(fy > 0.0)) {
            throw std::invalid_argument("camera: focal lengths must be positive");
        }
        if (img_w < 1 || img_h < 1) {
            throw std::invalid_argument("camera: image size must be at least 1x1");
        }
        const auto& r = rotation;
        // max |R^T R - I|
        double max_dev = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                double v = 0.0;
                for (int k = 0; k < 3; ++k) v += r[3 * k + i] * r[3 * k + j];
                max_dev = std::max(max_dev, std::abs(v - (i == j ? 1.0 : 0.0)));
            }
        }
        const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) -
                           r[1] * (r[3] * r[8] - r[5] * r[6]) +
                           r[2] * (r[3] * r[7] - r[4] * r[6]);
        if (max_dev >= 1e-9 || std::abs(det - 1.0) >= 1e-9) {
            throw std::invalid_argument("camera: rotation is not a proper orthonormal matrix");
        }
    }
};

struct PixelProjection {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0; // camera-frame z, world units
};

/// Perspective projection of a world point to pixel coordinates.
/// Throws if the point is at or behind the camera plane.
inline PixelProjection project(const Camera& cam, const Vec3& p_world) {
    const Vec3 pc = cam.to_camera(p_world);
    if (!(pc[2] > kDepthEpsilon)) {
        std::ostringstream msg;
        msg << "project: point (" << p_world[0] << ", " << p_world[1] << ", " << p_world[2]
            << ") is at or behind the camera (depth " << pc[2] << ")";
        throw std::runtime_error(msg.str());
    }
    return {cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy, pc[2]};
}

enum class Visibility : std::uint8_t { Occluded = 0, Visible = 1 };

/// Visibility classification of surface voxels against a per-pixel depth
/// buffer, plus the cached projections that produced it.
struct VisibilityMap {
    std::vector<Visibility> flags;            // parallel to the SurfaceIndex order
    std::vector<PixelProjection> projections; // parallel to the SurfaceIndex order
    std::vector<double> depth_buffer;         // img_w*img_h min depth, +inf where empty
    int img_w = 0, img_h = 0;

    bool visible(std::size_t k) const { return flags[k] == Visibility::Visible; }

    std::size_t visible_count() const {
        std::size_t n = 0;
        for (auto f : flags) n += f == Visibility::Visible ? 1 : 0;
        return n;
    }
};

/// Two-pass z-buffer visibility. Pass 1 splats each surface voxel over its
/// projected footprint (clamped into the image) keeping the minimum depth per
/// pixel; pass 2 marks a voxel visible iff its depth is within half a voxel
/// of the buffered depth at its center pixel. Splatting the footprint rather
/// than the center point alone keeps far-side voxels from slipping through
/// the gap pixels that point rasterization leaves once a voxel covers more
/// than one pixel.
inline VisibilityMap classify_visibility(const Camera& cam, const ShapeVolume& shape,
                                         const SurfaceIndex& surf, const GridFrame& frame) {
    detail::require_ground_truth(shape, "classify_visibility");
    detail::require_same_dims(shape.dims(), surf.dims, "classify_visibility");

    VisibilityMap vis;
    vis.img_w = cam.img_w;
    vis.img_h = cam.img_h;
    vis.flags.assign(surf.count(), Visibility::Occluded);
    vis.projections.resize(surf.count());
    vis.depth_buffer.assign(static_cast<std::size_t>(cam.img_w) * cam.img_h,
                            std::numeric_limits<double>::infinity());

    const double delta_vis = 0.5 * frame.voxel_size;
    std::vector<std::size_t> pixel_of(surf.count());

    for (std::size_t k = 0; k < surf.count(); ++k) {
        const auto [x, y, z] = shape.dims().from_linear(surf.voxels[k]);
        PixelProjection proj;
        try {
            proj = project(cam, frame.voxel_center(x, y, z));
        } catch (const std::runtime_error&) {
            std::ostringstream msg;
            msg << "classify_visibility: surface voxel (" << x << ", " << y << ", " << z
                << ") is behind the camera";
            throw std::runtime_error(msg.str());
        }
        vis.projections[k] = proj;
        const int px = static_cast<int>(std::lround(std::clamp(proj.u, 0.0, cam.img_w - 1.0)));
        const int py = static_cast<int>(std::lround(std::clamp(proj.v, 0.0, cam.img_h - 1.0)));
        pixel_of[k] = static_cast<std::size_t>(py) * cam.img_w + px;

        // face-on footprint half-size in pixels
        const double h = 0.5 * std::max(cam.fx, cam.fy) * frame.voxel_size / proj.depth;
        const int sx0 = static_cast<int>(std::lround(std::clamp(proj.u - h, 0.0, cam.img_w - 1.0)));
        const int sx1 = static_cast<int>(std::lround(std::clamp(proj.u + h, 0.0, cam.img_w - 1.0)));
        const int sy0 = static_cast<int>(std::lround(std::clamp(proj.v - h, 0.0, cam.img_h - 1.0)));
        const int sy1 = static_cast<int>(std::lround(std::clamp(proj.v + h, 0.0, cam.img_h - 1.0)));
        for (int sy = sy0; sy <= sy1; ++sy) {
            for (int sx = sx0; sx <= sx1; ++sx) {
                const std::size_t pix = static_cast<std::size_t>(sy) * cam.img_w + sx;
                vis.depth_buffer[pix] = std::min(vis.depth_buffer[pix], proj.depth);
            }
        }
    }
    for (std::size_t k = 0; k < surf.count(); ++k) {
        if (vis.projections[k].depth <= vis.depth_buffer[pixel_of[k]] + delta_vis) {
            vis.flags[k] = Visibility::Visible;
        }
    }
    return vis;
}

/// Camera placed at `position` looking at `target`, world up `up`. Image v
/// grows along the projection of `up`; mirror the scene or pick up = -y for
/// the opposite convention.
inline Camera look_at_camera(const Vec3& position, const Vec3& target, const Vec3& up, double fx,
                             double fy, double cx, double cy, int img_w, int img_h) {
    const Vec3 fwd = normalized(target - position);
    Vec3 u = up;
    if (norm(cross(u, fwd)) < 1e-9) u = Vec3{0.0, 0.0, 1.0}; // degenerate top/bottom view
    const Vec3 right = normalized(cross(u, fwd));
    const Vec3 down = cross(fwd, right); // (right, down, fwd) is right-handed

    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.img_w = img_w;
    cam.img_h = img_h;
    cam.rotation = {right[0], right[1], right[2], down[0], down[1], down[2],
                    fwd[0],   fwd[1],   fwd[2]};
    const Vec3 t = {-dot(right, position), -dot(down, position), -dot(fwd, position)};
    cam.translation = t;
    cam.validate();
    return cam;
}

// Flat text config, one logical record per line:
//   fx fy cx cy
//   R row-major, 9 values
//   T, 3 values
//   img_w img_h

inline std::string format_camera(const Camera& cam) {
    std::ostringstream out;
    out.precision(17);
    out << cam.fx << " " << cam.fy << " " << cam.cx << " " << cam.cy << "\n";
    for (int i = 0; i < 9; ++i) out << cam.rotation[i] << (i == 8 ? "\n" : " ");
    out << cam.translation[0] << " " << cam.translation[1] << " " << cam.translation[2] << "\n";
    out << cam.img_w << " " << cam.img_h << "\n";
    return out.str();
}

inline Camera parse_camera(const std::string& text, const std::string& source = "camera config") {
    std::istringstream in(text);
    Camera cam;
    in >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
    for (double& r : cam.rotation) in >> r;
    in >> cam.translation[0] >> cam.translation[1] >> cam.translation[2];
    in >> cam.img_w >> cam.img_h;
    if (!in) throw std::runtime_error(source + ": malformed camera config");
    cam.validate();
    return cam;
}

inline Camera read_camera_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_camera_file: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_camera(buf.str(), path);
}

inline void write_camera_file(const std::string& path, const Camera& cam) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_camera_file: cannot open " + path);
    out << format_camera(cam);
    if (!out) throw std::runtime_error("write_camera_file: write failed for " + path);
}

} // namespace cvoxel
