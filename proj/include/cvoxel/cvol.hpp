#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvoxel/grid.hpp"

namespace cvoxel {

static_assert(std::endian::native == std::endian::little,
              "CVOL I/O assumes a little-endian host");

// CVOL container: magic "CVOL", version u8=1, channels u8 in {1,2,3},
// dtype u8 (0 = float64 LE, 1 = uint8), reserved u8=0, then W,H,D as u32 LE,
// then W*H*D*channels values in linear-index order, channels interleaved.
namespace cvol {

constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kDtypeF64 = 0;
constexpr std::uint8_t kDtypeU8 = 1;

/// Untyped volume as stored on disk; uint8 payloads are mapped to [0,1] by /255.
struct RawVolume {
    GridDims dims;
    int channels = 0;
    std::vector<double> values;
};

inline void write(const std::string& path, const GridDims& dims, int channels,
                  std::span<const double> values) {
    if (channels < 1 || channels > 3) {
        throw std::invalid_argument("cvol::write: channels must be 1..3");
    }
    if (values.size() != dims.voxel_count() * static_cast<std::size_t>(channels)) {
        throw std::invalid_argument("cvol::write: value count does not match dims " + dims.str());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cvol::write: cannot open " + path);

    const char magic[4] = {'C', 'V', 'O', 'L'};
    out.write(magic, 4);
    const std::uint8_t head[4] = {kVersion, static_cast<std::uint8_t>(channels), kDtypeF64, 0};
    out.write(reinterpret_cast<const char*>(head), 4);
    const std::uint32_t whd[3] = {static_cast<std::uint32_t>(dims.width),
                                  static_cast<std::uint32_t>(dims.height),
                                  static_cast<std::uint32_t>(dims.depth)};
    out.write(reinterpret_cast<const char*>(whd), sizeof(whd));
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("cvol::write: write failed for " + path);
}

inline RawVolume read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cvol::read: cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CVOL", 4) != 0) {
        throw std::runtime_error("cvol::read: " + path + " is not a CVOL file");
    }
    std::uint8_t head[4];
    in.read(reinterpret_cast<char*>(head), 4);
    if (!in || head[0] != kVersion) {
        throw std::runtime_error("cvol::read: unsupported CVOL version in " + path);
    }
    const int channels = head[1];
    const int dtype = head[2];
    if (channels < 1 || channels > 3) {
        throw std::runtime_error("cvol::read: bad channel count in " + path);
    }
    if (dtype != kDtypeF64 && dtype != kDtypeU8) {
        throw std::runtime_error("cvol::read: bad dtype in " + path);
    }
    std::uint32_t whd[3];
    in.read(reinterpret_cast<char*>(whd), sizeof(whd));
    if (!in) throw std::runtime_error("cvol::read: truncated header in " + path);

    RawVolume raw;
    raw.dims = {static_cast<int>(whd[0]), static_cast<int>(whd[1]), static_cast<int>(whd[2])};
    raw.channels = channels;
    if (!raw.dims.valid()) throw std::runtime_error("cvol::read: bad dims in " + path);

    const std::size_t n = raw.dims.voxel_count() * static_cast<std::size_t>(channels);
    raw.values.resize(n);
    if (dtype == kDtypeF64) {
        in.read(reinterpret_cast<char*>(raw.values.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
    } else {
        std::vector<std::uint8_t> bytes(n);
        in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
        for (std::size_t i = 0; i < n; ++i) raw.values[i] = bytes[i] / 255.0;
    }
    if (!in) throw std::runtime_error("cvol::read: truncated payload in " + path);
    return raw;
}

inline void require_channels(const RawVolume& raw, int channels, const std::string& path) {
    if (raw.channels != channels) {
        throw std::runtime_error(path + ": expected " + std::to_string(channels) +
                                 "-channel CVOL, found " + std::to_string(raw.channels));
    }
}

} // namespace cvol

template <int C, class Tag>
void write_cvol(const std::string& path, const VolumeGrid<C, Tag>& volume) {
    cvol::write(path, volume.dims(), C, volume.raw());
}

/// Loads a 1-channel CVOL. The shape kind is inferred: exact {0,1} payloads
/// load as ground truth, anything else as a prediction.
inline ShapeVolume read_shape_cvol(const std::string& path) {
    const cvol::RawVolume raw = cvol::read(path);
    cvol::require_channels(raw, 1, path);
    bool binary = true;
    for (double v : raw.values) {
        if (v != 0.0 && v != 1.0) {
            binary = false;
            break;
        }
    }
    ShapeVolume shape(raw.dims, binary ? ShapeKind::GroundTruth : ShapeKind::Prediction);
    for (std::size_t i = 0; i < raw.values.size(); ++i) shape.set_value(i, 0, raw.values[i]);
    return shape;
}

template <class Volume>
Volume read_typed_cvol(const std::string& path) {
    const cvol::RawVolume raw = cvol::read(path);
    cvol::require_channels(raw, Volume::channels, path);
    Volume out(raw.dims);
    std::copy(raw.values.begin(), raw.values.end(), out.raw().begin());
    return out;
}

inline ColorVolume read_color_cvol(const std::string& path) {
    return read_typed_cvol<ColorVolume>(path);
}
inline FlowVolume read_flow_cvol(const std::string& path) {
    return read_typed_cvol<FlowVolume>(path);
}
inline WeightVolume read_weight_cvol(const std::string& path) {
    return read_typed_cvol<WeightVolume>(path);
}
inline JointVolume read_joint_cvol(const std::string& path) {
    return read_typed_cvol<JointVolume>(path);
}

} // namespace cvoxel
