#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cvoxel/math.hpp"

namespace cvoxel {

/// Voxel counts per axis. Linear index i = (z*H + y)*W + x.
struct GridDims {
    int width = 0;
    int height = 0;
    int depth = 0;

    bool valid() const { return width >= 1 && height >= 1 && depth >= 1; }

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
               static_cast<std::size_t>(depth);
    }

    bool contains(int x, int y, int z) const {
        return x >= 0 && x < width && y >= 0 && y < height && z >= 0 && z < depth;
    }

    std::size_t to_linear(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * height + y) * width + x;
    }

    std::array<int, 3> from_linear(std::size_t i) const {
        const int x = static_cast<int>(i % width);
        const int y = static_cast<int>((i / width) % height);
        const int z = static_cast<int>(i / (static_cast<std::size_t>(width) * height));
        return {x, y, z};
    }

    bool operator==(const GridDims&) const = default;

    std::string str() const {
        return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(depth);
    }
};

/// World placement of a grid. Voxel (x,y,z) has its center at
/// origin + (x+0.5, y+0.5, z+0.5) * voxel_size.
struct GridFrame {
    double voxel_size = 1.0;
    Vec3 origin{0.0, 0.0, 0.0};

    Vec3 voxel_center(int x, int y, int z) const {
        return {origin[0] + (x + 0.5) * voxel_size,
                origin[1] + (y + 0.5) * voxel_size,
                origin[2] + (z + 0.5) * voxel_size};
    }

    Vec3 grid_center(const GridDims& dims) const {
        return {origin[0] + 0.5 * dims.width * voxel_size,
                origin[1] + 0.5 * dims.height * voxel_size,
                origin[2] + 0.5 * dims.depth * voxel_size};
    }
};

/// Dense channel-interleaved voxel grid. Tag keeps grids with the same
/// channel count (color vs joint) from mixing silently.
template <int Channels, class Tag>
class VolumeGrid {
public:
    static constexpr int channels = Channels;

    VolumeGrid() = default;

    explicit VolumeGrid(GridDims dims, double fill = 0.0)
        : dims_(dims), values_(dims.voxel_count() * Channels, fill) {
        if (!dims.valid()) {
            throw std::invalid_argument("volume dims must be at least 1x1x1, got " + dims.str());
        }
    }

    const GridDims& dims() const { return dims_; }
    std::size_t voxel_count() const { return dims_.voxel_count(); }

    double value(std::size_t voxel, int channel = 0) const {
        return values_[voxel * Channels + channel];
    }
    void set_value(std::size_t voxel, int channel, double v) {
        values_[voxel * Channels + channel] = v;
    }

    std::array<double, Channels> vec(std::size_t voxel) const {
        std::array<double, Channels> out;
        for (int c = 0; c < Channels; ++c) out[c] = values_[voxel * Channels + c];
        return out;
    }
    void set_vec(std::size_t voxel, const std::array<double, Channels>& v) {
        for (int c = 0; c < Channels; ++c) values_[voxel * Channels + c] = v[c];
    }

    std::span<const double> raw() const { return values_; }
    std::span<double> raw() { return values_; }

    bool operator==(const VolumeGrid&) const = default;

private:
    GridDims dims_;
    std::vector<double> values_;
};

struct ShapeTag {};
struct ColorTag {};
struct FlowTag {};
struct WeightTag {};
struct JointTag {};

enum class ShapeKind { GroundTruth, Prediction };

/// 1-channel occupancy grid. GroundTruth volumes hold exact {0,1} values,
/// Prediction volumes hold probabilities in [0,1].
class ShapeVolume : public VolumeGrid<1, ShapeTag> {
public:
    ShapeVolume() = default;
    ShapeVolume(GridDims dims, ShapeKind kind, double fill = 0.0)
        : VolumeGrid<1, ShapeTag>(dims, fill), kind_(kind) {}

    ShapeKind kind() const { return kind_; }
    bool occupied(std::size_t voxel) const { return value(voxel) > 0.5; }

    std::size_t occupied_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < voxel_count(); ++i) n += occupied(i) ? 1 : 0;
        return n;
    }

private:
    ShapeKind kind_ = ShapeKind::Prediction;
};

using ColorVolume = VolumeGrid<3, ColorTag>;   // per-voxel RGB in [0,1]
using FlowVolume = VolumeGrid<2, FlowTag>;     // per-voxel (u,v) pixel coordinate
using WeightVolume = VolumeGrid<1, WeightTag>; // per-voxel blending weight in [0,1]
using JointVolume = VolumeGrid<3, JointTag>;   // occupancy-and-color joint coding

/// Strictly increasing linear indices of the surface voxels of one grid.
struct SurfaceIndex {
    GridDims dims;
    std::vector<std::size_t> voxels;

    std::size_t count() const { return voxels.size(); }
    bool empty() const { return voxels.empty(); }

    /// Per-voxel membership bitmap, 1 where the voxel is a surface voxel.
    std::vector<std::uint8_t> to_mask() const {
        std::vector<std::uint8_t> mask(dims.voxel_count(), 0);
        for (std::size_t v : voxels) mask[v] = 1;
        return mask;
    }
};

namespace detail {

inline void require_same_dims(const GridDims& a, const GridDims& b, const char* what) {
    if (!(a == b)) {
        throw std::invalid_argument(std::string(what) + ": dims mismatch, " + a.str() + " vs " +
                                    b.str());
    }
}

inline void require_ground_truth(const ShapeVolume& shape, const char* what) {
    if (shape.kind() != ShapeKind::GroundTruth) {
        throw std::invalid_argument(std::string(what) + ": binary ground-truth shape required");
    }
}

inline void require_surface(const SurfaceIndex& surf, const char* what) {
    if (surf.voxels.empty()) {
        throw std::invalid_argument(std::string(what) + ": surface index is empty (S = 0)");
    }
}

} // namespace detail

/// Occupied voxels with at least one unoccupied 6-neighbor. Out-of-grid
/// neighbors count as unoccupied, so the grid boundary is always surface.
inline SurfaceIndex extract_surface(const ShapeVolume& shape) {
    detail::require_ground_truth(shape, "extract_surface");
    const GridDims& d = shape.dims();
    SurfaceIndex surf;
    surf.dims = d;

    static constexpr int kSteps[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                         {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
    for (int z = 0; z < d.depth; ++z) {
        for (int y = 0; y < d.height; ++y) {
            for (int x = 0; x < d.width; ++x) {
                const std::size_t i = d.to_linear(x, y, z);
                if (!shape.occupied(i)) continue;
                bool exposed = false;
                for (const auto& s : kSteps) {
                    const int nx = x + s[0], ny = y + s[1], nz = z + s[2];
                    if (!d.contains(nx, ny, nz) || !shape.occupied(d.to_linear(nx, ny, nz))) {
                        exposed = true;
                        break;
                    }
                }
                if (exposed) surf.voxels.push_back(i);
            }
        }
    }
    return surf;
}

/// Binarize a prediction: 1 where value >= threshold, else 0.
inline ShapeVolume threshold_occupancy(const ShapeVolume& pred, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("threshold_occupancy: threshold must be in (0,1), got " +
                                    std::to_string(threshold));
    }
    ShapeVolume out(pred.dims(), ShapeKind::GroundTruth);
    for (std::size_t i = 0; i < pred.voxel_count(); ++i) {
        out.set_value(i, 0, pred.value(i) >= threshold ? 1.0 : 0.0);
    }
    return out;
}

/// Split a joint coding into separate shape and color volumes. A voxel is
/// empty iff all three channels equal the empty code exactly; empty voxels
/// get color zero.
inline std::pair<ShapeVolume, ColorVolume> split_joint(const JointVolume& joint,
                                                       const Rgb& empty_code) {
    ShapeVolume shape(joint.dims(), ShapeKind::GroundTruth);
    ColorVolume color(joint.dims());
    for (std::size_t i = 0; i < joint.voxel_count(); ++i) {
        const Rgb v = joint.vec(i);
        const bool empty = v[0] == empty_code[0] && v[1] == empty_code[1] && v[2] == empty_code[2];
        if (!empty) {
            shape.set_value(i, 0, 1.0);
            color.set_vec(i, v);
        }
    }
    return {std::move(shape), std::move(color)};
}

/// Inverse of split_joint on occupied voxels: occupied voxels carry their
/// color, empty voxels carry the empty code.
inline JointVolume make_joint(const ShapeVolume& shape, const ColorVolume& color,
                              const Rgb& empty_code) {
    detail::require_ground_truth(shape, "make_joint");
    detail::require_same_dims(shape.dims(), color.dims(), "make_joint");
    JointVolume joint(shape.dims());
    for (std::size_t i = 0; i < joint.voxel_count(); ++i) {
        joint.set_vec(i, shape.occupied(i) ? color.vec(i) : empty_code);
    }
    return joint;
}

} // namespace cvoxel
