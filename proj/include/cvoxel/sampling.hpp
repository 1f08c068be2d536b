#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "cvoxel/grid.hpp"
#include "cvoxel/image.hpp"
#include "cvoxel/math.hpp"

namespace cvoxel {

enum class SampleMode { Bilinear, NearestForeground };

/// Bilinear interpolation of the 4 neighboring pixel centers, with uv
/// clamped to [0, W-1] x [0, H-1] first.
inline Rgb bilinear_sample(const ViewImage& view, double u, double v) {
    u = std::clamp(u, 0.0, view.width - 1.0);
    v = std::clamp(v, 0.0, view.height - 1.0);
    const int x0 = static_cast<int>(std::floor(u));
    const int y0 = static_cast<int>(std::floor(v));
    const int x1 = std::min(x0 + 1, view.width - 1);
    const int y1 = std::min(y0 + 1, view.height - 1);
    const double fu = u - x0;
    const double fv = v - y0;

    const Rgb c00 = view.pixel(x0, y0);
    const Rgb c10 = view.pixel(x1, y0);
    const Rgb c01 = view.pixel(x0, y1);
    const Rgb c11 = view.pixel(x1, y1);
    Rgb out;
    for (int c = 0; c < 3; ++c) {
        const double top = c00[c] * (1.0 - fu) + c10[c] * fu;
        const double bot = c01[c] * (1.0 - fu) + c11[c] * fu;
        out[c] = top * (1.0 - fv) + bot * fv;
    }
    return out;
}

struct SnappedSample {
    Rgb color;
    double u = 0.0;
    double v = 0.0;
};

namespace detail {

struct PixelCoord {
    int x, y;
};

inline std::vector<PixelCoord> foreground_pixels(const ViewImage& view) {
    std::vector<PixelCoord> fg;
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            if (view.foreground(x, y)) fg.push_back({x, y});
        }
    }
    return fg;
}

/// Foreground pixel center closest to (u,v); the row-major scan order breaks
/// distance ties toward the smallest row, then the smallest column.
inline PixelCoord nearest_foreground_pixel(const std::vector<PixelCoord>& fg, double u, double v) {
    double best_d2 = std::numeric_limits<double>::infinity();
    PixelCoord best{0, 0};
    for (const PixelCoord& p : fg) {
        const double du = p.x - u;
        const double dv = p.y - v;
        const double d2 = du * du + dv * dv;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = p;
        }
    }
    return best;
}

} // namespace detail

/// Samples at uv when its rounded pixel is foreground; otherwise snaps to the
/// closest foreground pixel and returns that pixel's exact color, so no
/// background ever bleeds in through interpolation.
inline SnappedSample nearest_foreground_sample(const ViewImage& view, double u, double v) {
    const double cu = std::clamp(u, 0.0, view.width - 1.0);
    const double cv = std::clamp(v, 0.0, view.height - 1.0);
    const int px = static_cast<int>(std::lround(cu));
    const int py = static_cast<int>(std::lround(cv));
    if (view.foreground(px, py)) {
        return {bilinear_sample(view, cu, cv), cu, cv};
    }
    const auto fg = detail::foreground_pixels(view);
    if (fg.empty()) {
        throw std::runtime_error("nearest_foreground_sample: view has an empty foreground mask");
    }
    const auto snap = detail::nearest_foreground_pixel(fg, cu, cv);
    return {view.pixel(snap.x, snap.y), static_cast<double>(snap.x), static_cast<double>(snap.y)};
}

/// Per-surface-voxel color sampling at the flow coordinates; off-surface
/// voxels are zero.
inline ColorVolume sample_colors(const ViewImage& view, const FlowVolume& flow,
                                 const SurfaceIndex& surf, SampleMode mode) {
    detail::require_same_dims(flow.dims(), surf.dims, "sample_colors");
    std::vector<detail::PixelCoord> fg;
    if (mode == SampleMode::NearestForeground) {
        fg = detail::foreground_pixels(view);
        if (fg.empty()) {
            throw std::runtime_error("sample_colors: view has an empty foreground mask");
        }
    }

    ColorVolume out(flow.dims());
    for (std::size_t i : surf.voxels) {
        const auto uv = flow.vec(i);
        const double cu = std::clamp(uv[0], 0.0, view.width - 1.0);
        const double cv = std::clamp(uv[1], 0.0, view.height - 1.0);
        if (mode == SampleMode::Bilinear) {
            out.set_vec(i, bilinear_sample(view, cu, cv));
        } else {
            const int px = static_cast<int>(std::lround(cu));
            const int py = static_cast<int>(std::lround(cv));
            if (view.foreground(px, py)) {
                out.set_vec(i, bilinear_sample(view, cu, cv));
            } else {
                const auto snap = detail::nearest_foreground_pixel(fg, cu, cv);
                out.set_vec(i, view.pixel(snap.x, snap.y));
            }
        }
    }
    return out;
}

/// Soft blend of the two color sources on surface voxels:
/// w * sampled + (1-w) * regressed. Off-surface voxels are zero.
inline ColorVolume blend(const ColorVolume& sampled, const ColorVolume& regressed,
                         const WeightVolume& weights, const SurfaceIndex& surf) {
    detail::require_same_dims(sampled.dims(), regressed.dims(), "blend");
    detail::require_same_dims(sampled.dims(), weights.dims(), "blend");
    detail::require_same_dims(sampled.dims(), surf.dims, "blend");
    ColorVolume out(sampled.dims());
    for (std::size_t i : surf.voxels) {
        const double w = weights.value(i);
        const Rgb s = sampled.vec(i);
        const Rgb r = regressed.vec(i);
        out.set_vec(i, {w * s[0] + (1.0 - w) * r[0], w * s[1] + (1.0 - w) * r[1],
                        w * s[2] + (1.0 - w) * r[2]});
    }
    return out;
}

/// Same blend applied to every voxel, for pipelines that carry no surface index.
inline ColorVolume blend_all(const ColorVolume& sampled, const ColorVolume& regressed,
                             const WeightVolume& weights) {
    detail::require_same_dims(sampled.dims(), regressed.dims(), "blend_all");
    detail::require_same_dims(sampled.dims(), weights.dims(), "blend_all");
    ColorVolume out(sampled.dims());
    for (std::size_t i = 0; i < out.voxel_count(); ++i) {
        const double w = weights.value(i);
        const Rgb s = sampled.vec(i);
        const Rgb r = regressed.vec(i);
        out.set_vec(i, {w * s[0] + (1.0 - w) * r[0], w * s[1] + (1.0 - w) * r[1],
                        w * s[2] + (1.0 - w) * r[2]});
    }
    return out;
}

/// Test-time weight recalculation: w/alpha saturated at 1. alpha = 1 keeps
/// the estimated weights.
inline WeightVolume recalc_weights(const WeightVolume& weights, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("recalc_weights: alpha must be in (0,1], got " +
                                    std::to_string(alpha));
    }
    WeightVolume out(weights.dims());
    for (std::size_t i = 0; i < out.voxel_count(); ++i) {
        const double w = weights.value(i);
        out.set_value(i, 0, w <= alpha ? w / alpha : 1.0);
    }
    return out;
}

} // namespace cvoxel
