#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "yawcal/errors.hpp"

namespace yawcal {

inline constexpr double kDegPerRad = 180.0 / std::numbers::pi;

inline double deg2rad(double d) { return d / kDegPerRad; }
inline double rad2deg(double r) { return r * kDegPerRad; }

// Wraps an angle in degrees into [-180, 180).
inline double wrap_angle(double deg) {
    if (!std::isfinite(deg))
        throw Error(ErrorKind::invalid_input,
                    "wrap_angle: non-finite angle " + std::to_string(deg));
    double r = std::fmod(deg + 180.0, 360.0);
    if (r < 0.0) r += 360.0;
    return r - 180.0;
}

// Wraps an angle in degrees into [0, 360).
inline double wrap_angle_360(double deg) {
    if (!std::isfinite(deg))
        throw Error(ErrorKind::invalid_input,
                    "wrap_angle_360: non-finite angle " + std::to_string(deg));
    double r = std::fmod(deg, 360.0);
    if (r < 0.0) r += 360.0;
    // fmod of a tiny negative can round up to exactly 360.
    if (r >= 360.0) r = 0.0;
    return r;
}

// Signed shortest rotation from `from` to `to`, in (-180, 180].
inline double angle_difference(double to, double from) {
    double d = wrap_angle(to - from);
    return d;
}

// Mean of angles via the unit-vector resultant. Returns degrees in [-180, 180).
// A vanishing resultant (antipodal mass) yields atan2(0, 0) = 0 by convention.
inline double circular_mean(std::span<const double> deg) {
    if (deg.empty())
        throw Error(ErrorKind::insufficient_data, "circular_mean: empty input");
    double s = 0.0, c = 0.0;
    for (double a : deg) {
        if (!std::isfinite(a))
            throw Error(ErrorKind::invalid_input, "circular_mean: non-finite angle");
        s += std::sin(deg2rad(a));
        c += std::cos(deg2rad(a));
    }
    double m = rad2deg(std::atan2(s, c));
    return m >= 180.0 ? m - 360.0 : m;
}

// Same resultant mean mapped to [0, 360), for compass-style channels.
inline double circular_mean_360(std::span<const double> deg) {
    return wrap_angle_360(circular_mean(deg));
}

}  // namespace yawcal
