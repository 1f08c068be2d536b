#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

namespace cvoxel {

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;
using Rgb = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& v) { return {s * v[0], s * v[1], s * v[2]}; }

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    return {v[0] / n, v[1] / n, v[2] / n};
}

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Deterministic xorshift-free uniform helpers on top of a 64-bit generator.
// std::uniform_real_distribution is implementation-defined; these are not.
template <class Rng>
double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

template <class Rng>
double uniform(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

template <class Rng>
std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    // modulo bias is irrelevant at the sizes used here (n << 2^64)
    return rng() % n;
}

} // namespace cvoxel
