#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvoxel/math.hpp"

namespace cvoxel {

/// A 2D RGB view with a foreground mask. Pixel (u,v) = (column, row),
/// origin at the top-left pixel center. Background pixels keep their
/// stored rgb; the mask alone defines foreground.
struct ViewImage {
    int width = 0;
    int height = 0;
    std::vector<double> rgb;          // height*width*3, channels in [0,1]
    std::vector<std::uint8_t> mask;   // height*width, 1 = foreground

    ViewImage() = default;
    ViewImage(int w, int h)
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0),
          mask(static_cast<std::size_t>(w) * h, 0) {
        if (w < 1 || h < 1) throw std::invalid_argument("ViewImage: size must be at least 1x1");
    }

    std::size_t pixel_index(int x, int y) const {
        return static_cast<std::size_t>(y) * width + x;
    }

    Rgb pixel(int x, int y) const {
        const std::size_t i = pixel_index(x, y) * 3;
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }

    void set_pixel(int x, int y, const Rgb& c) {
        const std::size_t i = pixel_index(x, y) * 3;
        rgb[i] = c[0];
        rgb[i + 1] = c[1];
        rgb[i + 2] = c[2];
    }

    bool foreground(int x, int y) const { return mask[pixel_index(x, y)] != 0; }
    void set_foreground(int x, int y, bool fg) { mask[pixel_index(x, y)] = fg ? 1 : 0; }

    std::size_t foreground_count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m ? 1 : 0;
        return n;
    }
};

namespace detail {

inline int read_pnm_token(std::istream& in, const std::string& path) {
    // netpbm: whitespace-separated decimal tokens, '#' starts a comment
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c)) {
        throw std::runtime_error(path + ": malformed PNM header");
    }
    int value = 0;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
    }
    return value;
}

inline std::uint8_t quantize255(double v) {
    return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0));
}

} // namespace detail

/// Reads a binary PPM (P6, maxval 255) into rgb; the mask is left empty-off.
inline ViewImage read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_ppm: cannot open " + path);
    char p, six;
    in.get(p);
    in.get(six);
    if (!in || p != 'P' || six != '6') throw std::runtime_error(path + ": not a P6 PPM");
    const int w = detail::read_pnm_token(in, path);
    const int h = detail::read_pnm_token(in, path);
    const int maxval = detail::read_pnm_token(in, path);
    if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 is supported");

    ViewImage view(w, h);
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw std::runtime_error(path + ": truncated PPM payload");
    for (std::size_t i = 0; i < bytes.size(); ++i) view.rgb[i] = bytes[i] / 255.0;
    return view;
}

/// Reads a binary PGM (P5, maxval 255) as a foreground mask: >=128 is foreground.
inline void read_pgm_mask(const std::string& path, ViewImage& view) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_pgm_mask: cannot open " + path);
    char p, five;
    in.get(p);
    in.get(five);
    if (!in || p != 'P' || five != '5') throw std::runtime_error(path + ": not a P5 PGM");
    const int w = detail::read_pnm_token(in, path);
    const int h = detail::read_pnm_token(in, path);
    const int maxval = detail::read_pnm_token(in, path);
    if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 is supported");
    if (w != view.width || h != view.height) {
        throw std::runtime_error(path + ": mask size " + std::to_string(w) + "x" +
                                 std::to_string(h) + " does not match view " +
                                 std::to_string(view.width) + "x" + std::to_string(view.height));
    }
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw std::runtime_error(path + ": truncated PGM payload");
    for (std::size_t i = 0; i < bytes.size(); ++i) view.mask[i] = bytes[i] >= 128 ? 1 : 0;
}

inline ViewImage read_view(const std::string& ppm_path, const std::string& pgm_path) {
    ViewImage view = read_ppm(ppm_path);
    read_pgm_mask(pgm_path, view);
    return view;
}

inline void write_ppm(const std::string& path, const ViewImage& view) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_ppm: cannot open " + path);
    out << "P6\n" << view.width << " " << view.height << "\n255\n";
    std::vector<std::uint8_t> bytes(view.rgb.size());
    for (std::size_t i = 0; i < view.rgb.size(); ++i) bytes[i] = detail::quantize255(view.rgb[i]);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_ppm: write failed for " + path);
}

inline void write_pgm_mask(const std::string& path, const ViewImage& view) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm_mask: cannot open " + path);
    out << "P5\n" << view.width << " " << view.height << "\n255\n";
    std::vector<std::uint8_t> bytes(view.mask.size());
    for (std::size_t i = 0; i < view.mask.size(); ++i) bytes[i] = view.mask[i] ? 255 : 0;
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write_pgm_mask: write failed for " + path);
}

/// 8-bit round trip: the image a view becomes after PPM export and re-import.
inline ViewImage quantize_view(const ViewImage& view) {
    ViewImage out = view;
    for (double& v : out.rgb) v = detail::quantize255(v) / 255.0;
    return out;
}

} // namespace cvoxel
