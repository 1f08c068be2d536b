#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cvoxel/camera.hpp"
#include "cvoxel/grid.hpp"
#include "cvoxel/image.hpp"
#include "cvoxel/math.hpp"

namespace cvoxel {

struct FlowConfig {
    double color_tolerance = 0.1; // max RGB L2 distance for "similar" colors
};

/// Ground-truth 3D-to-2D appearance flow field.
///
/// Visible surface voxels get their projected pixel coordinate, clamped to
/// the image. Occluded surface voxels search the foreground for pixels whose
/// color lies within color_tolerance of the voxel's ground-truth color and
/// take the one closest to the voxel's (clamped) projected position; if no
/// pixel passes the tolerance the nearest foreground pixel wins regardless
/// of color. Distance ties resolve to the smallest row, then column.
/// Non-surface voxels are left at (0,0) and never contribute to losses.
inline FlowVolume target_flow(const Camera& cam, const ShapeVolume& shape,
                              const ColorVolume& color, const SurfaceIndex& surf,
                              const ViewImage& view, const GridFrame& frame,
                              const FlowConfig& config = {}) {
    detail::require_same_dims(shape.dims(), color.dims(), "target_flow");
    detail::require_same_dims(shape.dims(), surf.dims, "target_flow");
    detail::require_surface(surf, "target_flow");
    if (view.width != cam.img_w || view.height != cam.img_h) {
        throw std::invalid_argument("target_flow: view is " + std::to_string(view.width) + "x" +
                                    std::to_string(view.height) + " but camera expects " +
                                    std::to_string(cam.img_w) + "x" + std::to_string(cam.img_h));
    }

    struct FgPixel {
        int x, y;
        Rgb rgb;
    };
    std::vector<FgPixel> fg;
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            if (view.foreground(x, y)) fg.push_back({x, y, view.pixel(x, y)});
        }
    }
    if (fg.empty()) {
        throw std::runtime_error("target_flow: view has an empty foreground mask");
    }

    const VisibilityMap vis = classify_visibility(cam, shape, surf, frame);
    const double tol_sq = config.color_tolerance * config.color_tolerance;

    FlowVolume flow(shape.dims());
    for (std::size_t k = 0; k < surf.count(); ++k) {
        const std::size_t i = surf.voxels[k];
        const double u = std::clamp(vis.projections[k].u, 0.0, cam.img_w - 1.0);
        const double v = std::clamp(vis.projections[k].v, 0.0, cam.img_h - 1.0);
        if (vis.visible(k)) {
            flow.set_vec(i, {u, v});
            continue;
        }

        const Rgb c = color.vec(i);
        double best_d2 = std::numeric_limits<double>::infinity();
        int best_x = fg.front().x, best_y = fg.front().y;
        bool found_similar = false;
        for (const FgPixel& p : fg) {
            const double dr = p.rgb[0] - c[0];
            const double dg = p.rgb[1] - c[1];
            const double db = p.rgb[2] - c[2];
            if (dr * dr + dg * dg + db * db > tol_sq) continue;
            const double du = p.x - u;
            const double dv = p.y - v;
            const double d2 = du * du + dv * dv;
            if (!found_similar || d2 < best_d2) {
                best_d2 = d2;
                best_x = p.x;
                best_y = p.y;
                found_similar = true;
            }
        }
        if (!found_similar) {
            best_d2 = std::numeric_limits<double>::infinity();
            for (const FgPixel& p : fg) {
                const double du = p.x - u;
                const double dv = p.y - v;
                const double d2 = du * du + dv * dv;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best_x = p.x;
                    best_y = p.y;
                }
            }
        }
        flow.set_vec(i, {static_cast<double>(best_x), static_cast<double>(best_y)});
    }
    return flow;
}

/// Deterministic flow visualization: slices stacked vertically (z ascending),
/// pixel (x, z*H + y) shows R = u/(imgW-1), G = v/(imgH-1), B = 0.
inline ViewImage flow_to_image(const FlowVolume& flow, int img_w, int img_h) {
    if (img_w < 2 || img_h < 2) {
        throw std::invalid_argument("flow_to_image: image size must be at least 2x2");
    }
    const GridDims& d = flow.dims();
    ViewImage img(d.width, d.height * d.depth);
    for (int z = 0; z < d.depth; ++z) {
        for (int y = 0; y < d.height; ++y) {
            for (int x = 0; x < d.width; ++x) {
                const auto uv = flow.vec(d.to_linear(x, y, z));
                img.set_pixel(x, z * d.height + y,
                              {clamp01(uv[0] / (img_w - 1.0)), clamp01(uv[1] / (img_h - 1.0)),
                               0.0});
            }
        }
    }
    return img;
}

} // namespace cvoxel
