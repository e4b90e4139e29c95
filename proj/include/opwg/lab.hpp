#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace opwg {

struct Lab {
    double L = 0.0;
    double a = 0.0;
    double b = 0.0;
};

namespace detail {

inline double srgb_to_linear(std::uint8_t c) {
    const double v = c / 255.0;
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline double lab_f(double t) {
    constexpr double delta = 6.0 / 29.0;
    return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

}  // namespace detail

// 8-bit sRGB -> CIE L*a*b* via linear RGB and XYZ, D65 reference white.
inline Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double rl = detail::srgb_to_linear(r);
    const double gl = detail::srgb_to_linear(g);
    const double bl = detail::srgb_to_linear(b);

    const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;

    constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
    const double fx = detail::lab_f(x / xn);
    const double fy = detail::lab_f(y / yn);
    const double fz = detail::lab_f(z / zn);
    // The published matrix's Y row sums to 1.0000001, so white lands a hair above 100.
    return {std::clamp(116.0 * fy - 16.0, 0.0, 100.0), 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

}  // namespace opwg
