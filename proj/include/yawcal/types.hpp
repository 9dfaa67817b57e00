#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "yawcal/angles.hpp"
#include "yawcal/errors.hpp"

namespace yawcal {

// One SCADA sample. Directions are compass degrees in [0, 360); power and
// power limit in kW; air density in kg/m^3; fault_code 0 means healthy.
struct TelemetryRecord {
    std::int64_t timestamp = 0;  // Unix seconds
    double wind_speed = 0.0;     // m/s
    double wind_direction = 0.0;
    double nacelle_direction = 0.0;
    double power = 0.0;
    double power_limit = 0.0;
    double pitch_angle = 0.0;    // deg
    double air_density = 0.0;
    int fault_code = 0;
};

// Throws ErrorKind::invalid_input when a record violates its invariants.
inline void validate(const TelemetryRecord& r) {
    auto bad = [&](const std::string& msg) {
        throw Error(ErrorKind::invalid_input,
                    "record at t=" + std::to_string(r.timestamp) + ": " + msg);
    };
    for (double v : {r.wind_speed, r.wind_direction, r.nacelle_direction,
                     r.power, r.power_limit, r.pitch_angle, r.air_density}) {
        if (!std::isfinite(v)) bad("non-finite field");
    }
    if (r.wind_speed < 0.0) bad("negative wind speed");
    if (r.wind_direction < 0.0 || r.wind_direction >= 360.0)
        bad("wind direction outside [0, 360)");
    if (r.nacelle_direction < 0.0 || r.nacelle_direction >= 360.0)
        bad("nacelle direction outside [0, 360)");
    if (r.power_limit <= 0.0) bad("non-positive power limit");
    if (r.air_density <= 0.0) bad("non-positive air density");
}

// Instantaneous misalignment seen by the vane: wind minus nacelle heading,
// wrapped to [-180, 180).
inline double dynamic_yaw(const TelemetryRecord& r) {
    return wrap_angle(r.wind_direction - r.nacelle_direction);
}

// Decomposition of the total yaw error into a fixed sensor offset and the
// time-varying tracking error. total == wrap(static + dynamic) always.
struct YawAngles {
    double static_yaw = 0.0;
    double dynamic_yaw = 0.0;
    double total_yaw = 0.0;
};

inline YawAngles make_yaw_angles(double static_yaw, double dyn) {
    return YawAngles{static_yaw, dyn, wrap_angle(static_yaw + dyn)};
}

// Turbine nameplate facts used by region classification and the synthesizer.
struct TurbineConfig {
    double cut_in_speed = 3.0;    // m/s
    double rated_speed = 11.0;    // m/s; also the top of Region II here
    double cut_out_speed = 25.0;  // m/s
    double rated_power = 2500.0;  // kW
    double standard_density = 1.225;  // kg/m^3, reference air density
    double region2_low = 4.0;     // m/s, analysis window lower bound
    double region2_high = 11.0;   // m/s, analysis window upper bound
};

inline void validate(const TurbineConfig& c) {
    auto bad = [](const std::string& msg) {
        throw Error(ErrorKind::invalid_input, "turbine config: " + msg);
    };
    if (!(c.cut_in_speed > 0.0)) bad("cut-in speed must be positive");
    if (!(c.cut_in_speed < c.rated_speed && c.rated_speed < c.cut_out_speed))
        bad("need cut_in < rated < cut_out");
    if (!(c.rated_power > 0.0)) bad("rated power must be positive");
    if (!(c.standard_density > 0.0)) bad("standard density must be positive");
    if (!(c.region2_low < c.region2_high))
        bad("region II bounds must satisfy low < high");
}

enum class OperatingRegion {
    below_cut_in,   // V < cut-in: idle
    partial_load,   // cut-in <= V < rated: power tracks the curve
    full_load,      // rated <= V <= cut-out: pitch holds rated power
    above_cut_out,  // V > cut-out: shutdown
};

inline OperatingRegion classify_region(double wind_speed, const TurbineConfig& c) {
    if (!std::isfinite(wind_speed) || wind_speed < 0.0)
        throw Error(ErrorKind::invalid_input, "classify_region: bad wind speed");
    if (wind_speed < c.cut_in_speed) return OperatingRegion::below_cut_in;
    if (wind_speed < c.rated_speed) return OperatingRegion::partial_load;
    if (wind_speed <= c.cut_out_speed) return OperatingRegion::full_load;
    return OperatingRegion::above_cut_out;
}

}  // namespace yawcal
