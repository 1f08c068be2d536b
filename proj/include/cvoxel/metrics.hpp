#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <vector>

#include "cvoxel/grid.hpp"
#include "cvoxel/image.hpp"
#include "cvoxel/math.hpp"

namespace cvoxel {

constexpr double kPsnrCap = 99.0; // reported when MSE is exactly zero

/// Intersection over union of two binary occupancy grids; an empty union
/// counts as a perfect match.
inline double iou(const ShapeVolume& gt, const ShapeVolume& pred) {
    detail::require_ground_truth(gt, "iou");
    detail::require_ground_truth(pred, "iou");
    detail::require_same_dims(gt.dims(), pred.dims(), "iou");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.voxel_count(); ++i) {
        const bool a = gt.occupied(i);
        const bool b = pred.occupied(i);
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

enum class ColorSpace { Rgb, YCbCr };

/// Full-range BT.601 conversion; all outputs stay in [0,1] for [0,1] inputs.
inline Rgb rgb_to_ycbcr(const Rgb& c) {
    const double y = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
    const double cb = 0.5 - 0.168736 * c[0] - 0.331264 * c[1] + 0.5 * c[2];
    const double cr = 0.5 + 0.5 * c[0] - 0.418688 * c[1] - 0.081312 * c[2];
    return {y, cb, cr};
}

namespace detail {

struct SurfVoxel {
    int x, y, z;
    std::size_t linear;
};

inline std::vector<SurfVoxel> surface_coords(const ShapeVolume& shape, const SurfaceIndex& surf) {
    std::vector<SurfVoxel> out;
    out.reserve(surf.count());
    for (std::size_t i : surf.voxels) {
        const auto [x, y, z] = shape.dims().from_linear(i);
        out.push_back({x, y, z, i});
    }
    return out;
}

inline std::int64_t dist_sq(const SurfVoxel& a, int x, int y, int z) {
    const std::int64_t dx = a.x - x, dy = a.y - y, dz = a.z - z;
    return dx * dx + dy * dy + dz * dz;
}

/// Nearest ground-truth surface voxel by Euclidean center distance, scanning
/// Chebyshev shells outward so distances and ties stay exact integers. Ties
/// resolve to the smallest linear index.
inline std::size_t nearest_surface_voxel(const std::vector<std::uint8_t>& gt_surf_mask,
                                         const GridDims& dims, int px, int py, int pz) {
    std::int64_t best_d2 = std::numeric_limits<std::int64_t>::max();
    std::size_t best_idx = 0;
    bool found = false;
    const int max_r = std::max({dims.width, dims.height, dims.depth});

    auto consider = [&](int x, int y, int z) {
        if (!dims.contains(x, y, z)) return;
        const std::size_t i = dims.to_linear(x, y, z);
        if (!gt_surf_mask[i]) return;
        const std::int64_t dx = x - px, dy = y - py, dz = z - pz;
        const std::int64_t d2 = dx * dx + dy * dy + dz * dz;
        if (!found || d2 < best_d2 || (d2 == best_d2 && i < best_idx)) {
            best_d2 = d2;
            best_idx = i;
            found = true;
        }
    };

    for (int r = 0; r <= max_r; ++r) {
        // stop once even the closest cell of this shell cannot beat or tie the best
        if (found && static_cast<std::int64_t>(r) * r > best_d2) break;
        if (r == 0) {
            consider(px, py, pz);
            continue;
        }
        for (int z = pz - r; z <= pz + r; ++z) {
            for (int y = py - r; y <= py + r; ++y) {
                for (int x = px - r; x <= px + r; ++x) {
                    const int cheb =
                        std::max({std::abs(x - px), std::abs(y - py), std::abs(z - pz)});
                    if (cheb == r) consider(x, y, z);
                }
            }
        }
    }
    if (!found) throw std::logic_error("nearest_surface_voxel: no surface voxel found");
    return best_idx;
}

} // namespace detail

/// PSNR over predicted surface voxel colors, each paired with its nearest
/// ground-truth surface voxel (same position when the voxel is a surface
/// voxel of both shapes). Peak 1.0; zero MSE reports the 99 dB cap. The
/// pairing is directional (pred -> gt), so swapped arguments need not agree.
inline double surface_psnr(const ShapeVolume& gt_shape, const ColorVolume& gt_color,
                           const ShapeVolume& pred_shape, const ColorVolume& pred_color,
                           ColorSpace space) {
    detail::require_same_dims(gt_shape.dims(), gt_color.dims(), "surface_psnr");
    detail::require_same_dims(pred_shape.dims(), pred_color.dims(), "surface_psnr");
    detail::require_same_dims(gt_shape.dims(), pred_shape.dims(), "surface_psnr");

    const SurfaceIndex gt_surf = extract_surface(gt_shape);
    const SurfaceIndex pred_surf = extract_surface(pred_shape);
    if (gt_surf.empty() || pred_surf.empty()) {
        throw std::runtime_error("surface_psnr: both shapes need a nonempty surface");
    }
    const std::vector<std::uint8_t> gt_mask = gt_surf.to_mask();

    double mse_sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i : pred_surf.voxels) {
        std::size_t paired;
        if (gt_mask[i]) {
            paired = i; // intersection surface voxels match at the same position
        } else {
            const auto [x, y, z] = gt_shape.dims().from_linear(i);
            paired = detail::nearest_surface_voxel(gt_mask, gt_shape.dims(), x, y, z);
        }
        Rgb p = pred_color.vec(i);
        Rgb g = gt_color.vec(paired);
        if (space == ColorSpace::YCbCr) {
            p = rgb_to_ycbcr(p);
            g = rgb_to_ycbcr(g);
        }
        for (int c = 0; c < 3; ++c) {
            const double d = p[c] - g[c];
            mse_sum += d * d;
        }
        n += 3;
    }
    const double mse = mse_sum / static_cast<double>(n);
    if (mse == 0.0) return kPsnrCap;
    return 10.0 * std::log10(1.0 / mse);
}

/// Adjusted color for occupancy-threshold joint codings:
/// (c_pred - t) / (1 - t), clamped to [0,1].
inline double adjust_joint_color(double c_pred, double t) {
    if (!(t >= 0.0 && t < 1.0)) {
        throw std::invalid_argument("adjust_joint_color: t must be in [0,1), got " +
                                    std::to_string(t));
    }
    return clamp01((c_pred - t) / (1.0 - t));
}

// ---------------------------------------------------------------------------
// Color complexity
// ---------------------------------------------------------------------------

struct ColorPalette {
    std::vector<Rgb> centers; // sorted lexicographically
    std::uint64_t seed = 0;
    int t1 = 0;
    int k_requested = 0;
};

namespace detail {

inline std::uint32_t pack_rgb8(const Rgb& c) {
    const auto r = static_cast<std::uint32_t>(std::lround(clamp01(c[0]) * 255.0));
    const auto g = static_cast<std::uint32_t>(std::lround(clamp01(c[1]) * 255.0));
    const auto b = static_cast<std::uint32_t>(std::lround(clamp01(c[2]) * 255.0));
    return (r << 16) | (g << 8) | b;
}

inline Rgb unpack_rgb8(std::uint32_t v) {
    return {((v >> 16) & 0xff) / 255.0, ((v >> 8) & 0xff) / 255.0, (v & 0xff) / 255.0};
}

inline double color_dist_sq(const Rgb& a, const Rgb& b) {
    const double dr = a[0] - b[0], dg = a[1] - b[1], db = a[2] - b[2];
    return dr * dr + dg * dg + db * db;
}

/// Closest center, ties to the lowest center index.
inline std::size_t assign_center(const std::vector<Rgb>& centers, const Rgb& c) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
        const double d = color_dist_sq(centers[k], c);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

} // namespace detail

/// Dataset-level palette: exact 8-bit RGB histogram over all foreground
/// pixels, colors with count < t1 dropped, the survivors clustered with
/// seeded k-means++ / Lloyd. Centers come back sorted lexicographically, so
/// a fixed seed gives a bit-identical palette.
inline ColorPalette build_palette(const std::vector<ViewImage>& views, int t1, int k,
                                  std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("build_palette: K must be at least 1");

    std::map<std::uint32_t, std::size_t> histogram; // ordered: deterministic iteration
    for (const ViewImage& view : views) {
        for (int y = 0; y < view.height; ++y) {
            for (int x = 0; x < view.width; ++x) {
                if (view.foreground(x, y)) ++histogram[detail::pack_rgb8(view.pixel(x, y))];
            }
        }
    }
    std::vector<Rgb> colors;
    for (const auto& [packed, count] : histogram) {
        if (count >= static_cast<std::size_t>(t1)) colors.push_back(detail::unpack_rgb8(packed));
    }
    if (colors.empty()) {
        throw std::runtime_error("build_palette: no colors with count >= t1 survived");
    }
    const std::size_t kk = std::min<std::size_t>(k, colors.size());

    // k-means++ seeding
    std::mt19937_64 rng(seed);
    std::vector<Rgb> centers;
    centers.push_back(colors[uniform_index(rng, colors.size())]);
    std::vector<double> min_d2(colors.size());
    while (centers.size() < kk) {
        double total = 0.0;
        for (std::size_t i = 0; i < colors.size(); ++i) {
            double d = std::numeric_limits<double>::infinity();
            for (const Rgb& c : centers) d = std::min(d, detail::color_dist_sq(colors[i], c));
            min_d2[i] = d;
            total += d;
        }
        if (total <= 0.0) break; // fewer distinct colors than requested centers
        double pick = uniform01(rng) * total;
        std::size_t chosen = colors.size() - 1;
        for (std::size_t i = 0; i < colors.size(); ++i) {
            pick -= min_d2[i];
            if (pick <= 0.0) {
                chosen = i;
                break;
            }
        }
        centers.push_back(colors[chosen]);
    }

    // Lloyd iterations; empty clusters keep their center
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<Rgb> sums(centers.size(), Rgb{0, 0, 0});
        std::vector<std::size_t> counts(centers.size(), 0);
        for (const Rgb& c : colors) {
            const std::size_t a = detail::assign_center(centers, c);
            for (int ch = 0; ch < 3; ++ch) sums[a][ch] += c[ch];
            ++counts[a];
        }
        double max_move = 0.0;
        for (std::size_t kc = 0; kc < centers.size(); ++kc) {
            if (counts[kc] == 0) continue;
            Rgb next;
            for (int ch = 0; ch < 3; ++ch) next[ch] = sums[kc][ch] / counts[kc];
            max_move = std::max(max_move, std::sqrt(detail::color_dist_sq(next, centers[kc])));
            centers[kc] = next;
        }
        if (max_move < 1e-6) break;
    }
    std::sort(centers.begin(), centers.end());

    ColorPalette palette;
    palette.centers = std::move(centers);
    palette.seed = seed;
    palette.t1 = t1;
    palette.k_requested = k;
    return palette;
}

/// Number of palette centers that attract strictly more than t2 foreground
/// pixels of the view.
inline int color_complexity(const ViewImage& view, const ColorPalette& palette, int t2) {
    if (palette.centers.empty()) throw std::invalid_argument("color_complexity: empty palette");
    std::vector<std::size_t> assigned(palette.centers.size(), 0);
    for (int y = 0; y < view.height; ++y) {
        for (int x = 0; x < view.width; ++x) {
            if (!view.foreground(x, y)) continue;
            ++assigned[detail::assign_center(palette.centers, view.pixel(x, y))];
        }
    }
    int complexity = 0;
    for (std::size_t n : assigned) {
        if (n > static_cast<std::size_t>(t2)) ++complexity;
    }
    return complexity;
}

} // namespace cvoxel
