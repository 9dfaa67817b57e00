#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yawcal/angles.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/power_curve.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

// Linear-interpolation quantile (the common "type 7" definition): for sorted
// x and h = (n-1)q, returns x[floor(h)] + frac(h) * (x[floor(h)+1] - x[floor(h)]).
inline double quantile_type7(std::span<const double> values, double q) {
    if (values.empty())
        throw Error(ErrorKind::insufficient_data, "quantile of empty set");
    if (!(q >= 0.0 && q <= 1.0))
        throw Error(ErrorKind::invalid_input, "quantile fraction outside [0,1]");
    std::vector<double> x(values.begin(), values.end());
    std::sort(x.begin(), x.end());
    const double h = (static_cast<double>(x.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= x.size()) return x.back();
    const double frac = h - static_cast<double>(lo);
    return x[lo] + frac * (x[lo + 1] - x[lo]);
}

struct CleaningParams {
    double curtailment_threshold = 0.10;  // |P - P_L| / P_L below this is curtailed
    double max_pitch = 2.0;               // deg; partial-load pitch ceiling
    double iqr_multiplier = 1.5;
    std::size_t min_records_for_iqr = 4;
};

struct CleaningReport {
    std::size_t input_count = 0;
    std::size_t removed_fault = 0;
    std::size_t removed_curtailment = 0;
    std::size_t removed_outlier = 0;
    std::size_t removed_region = 0;
    std::size_t output_count = 0;
};

inline std::vector<TelemetryRecord> filter_faults(
    std::span<const TelemetryRecord> records, std::size_t* removed = nullptr) {
    std::vector<TelemetryRecord> out;
    out.reserve(records.size());
    for (const auto& r : records)
        if (r.fault_code == 0) out.push_back(r);
    if (removed) *removed = records.size() - out.size();
    return out;
}

// Drops records whose power sits within the threshold band of the active
// power limit; production pinned at the limit is curtailed, not free response.
inline std::vector<TelemetryRecord> filter_curtailment(
    std::span<const TelemetryRecord> records, double threshold = 0.10,
    std::size_t* removed = nullptr) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw Error(ErrorKind::invalid_input,
                    "curtailment threshold must be in (0,1)");
    std::vector<TelemetryRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (r.power_limit <= 0.0)
            throw Error(ErrorKind::invalid_input, "non-positive power limit");
        const double rel = std::fabs(r.power - r.power_limit) / r.power_limit;
        if (rel >= threshold) out.push_back(r);
    }
    if (removed) *removed = records.size() - out.size();
    return out;
}

// Tukey-fence outlier removal. Channels: vane misalignment always; normalized
// power residual against the reference curve when one is supplied (evaluated
// only where the speed is inside the curve's domain), raw power otherwise.
// A record is dropped if any applicable channel value falls strictly outside
// [q1 - k*iqr, q3 + k*iqr] for that channel.
inline std::vector<TelemetryRecord> filter_outliers_iqr(
    std::span<const TelemetryRecord> records, double multiplier = 1.5,
    const PowerCurve* curve = nullptr, std::size_t* removed = nullptr,
    std::size_t min_records = 4) {
    if (!(multiplier > 0.0))
        throw Error(ErrorKind::invalid_input, "iqr multiplier must be positive");
    if (records.size() < min_records)
        throw Error(ErrorKind::insufficient_data,
                    "iqr filter needs at least " + std::to_string(min_records) +
                        " records, got " + std::to_string(records.size()));

    struct Channel {
        std::vector<double> values;        // per-record, NaN when not applicable
        std::vector<double> applicable;    // values only where defined
        double lo = 0.0, hi = 0.0;
    };
    auto in_curve_range = [&](double v) {
        return curve && v >= curve->v_min && v <= curve->v_max;
    };
    Channel yaw, power;
    for (const auto& r : records) {
        const double dy = dynamic_yaw(r);
        yaw.values.push_back(dy);
        yaw.applicable.push_back(dy);
        double pv;
        if (!curve) {
            pv = r.power;
        } else if (in_curve_range(r.wind_speed)) {
            pv = r.power * (curve->standard_density / r.air_density) -
                 curve->evaluate(r.wind_speed);
        } else {
            power.values.push_back(std::nan(""));
            continue;
        }
        power.values.push_back(pv);
        power.applicable.push_back(pv);
    }
    for (Channel* ch : {&yaw, &power}) {
        if (ch->applicable.size() < min_records)
            throw Error(ErrorKind::insufficient_data,
                        "iqr channel has fewer than " +
                            std::to_string(min_records) + " usable records");
        const double q1 = quantile_type7(ch->applicable, 0.25);
        const double q3 = quantile_type7(ch->applicable, 0.75);
        const double iqr = q3 - q1;
        ch->lo = q1 - multiplier * iqr;
        ch->hi = q3 + multiplier * iqr;
    }
    std::vector<TelemetryRecord> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const bool yaw_ok = yaw.values[i] >= yaw.lo && yaw.values[i] <= yaw.hi;
        const double pv = power.values[i];
        const bool power_ok = std::isnan(pv) || (pv >= power.lo && pv <= power.hi);
        if (yaw_ok && power_ok) out.push_back(records[i]);
    }
    if (removed) *removed = records.size() - out.size();
    return out;
}

// Keeps the free partial-load regime: speed inside [region2_low, region2_high]
// (inclusive) and pitch strictly below the ceiling.
inline std::vector<TelemetryRecord> filter_operating_region(
    std::span<const TelemetryRecord> records, const TurbineConfig& turbine,
    double max_pitch = 2.0, std::size_t* removed = nullptr) {
    validate(turbine);
    std::vector<TelemetryRecord> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        const bool speed_ok = r.wind_speed >= turbine.region2_low &&
                              r.wind_speed <= turbine.region2_high;
        if (speed_ok && r.pitch_angle < max_pitch) out.push_back(r);
    }
    if (removed) *removed = records.size() - out.size();
    return out;
}

// Full cleaning chain: faults, curtailment, IQR outliers, operating region.
// An input that is empty after the fault or curtailment stage short-circuits
// to an empty output (there is no distribution left to fence).
inline std::pair<std::vector<TelemetryRecord>, CleaningReport> clean_pipeline(
    std::span<const TelemetryRecord> records, const TurbineConfig& turbine,
    const CleaningParams& params = {}, const PowerCurve* curve = nullptr) {
    CleaningReport rep;
    rep.input_count = records.size();
    auto stage1 = filter_faults(records, &rep.removed_fault);
    auto stage2 =
        filter_curtailment(stage1, params.curtailment_threshold, &rep.removed_curtailment);
    std::vector<TelemetryRecord> stage3;
    if (stage2.empty()) {
        rep.removed_outlier = 0;
    } else {
        stage3 = filter_outliers_iqr(stage2, params.iqr_multiplier, curve,
                                     &rep.removed_outlier,
                                     params.min_records_for_iqr);
    }
    auto stage4 = filter_operating_region(stage3, turbine, params.max_pitch,
                                          &rep.removed_region);
    rep.output_count = stage4.size();
    return {std::move(stage4), rep};
}

// Averages raw records into fixed windows anchored at the epoch. Directions
// use the circular mean; the fault code is the worst (max) code seen in the
// window; the output timestamp is the window start.
inline std::vector<TelemetryRecord> block_average(
    std::span<const TelemetryRecord> records, std::int64_t window_s = 60) {
    if (window_s <= 0)
        throw Error(ErrorKind::invalid_input, "block_average: window must be > 0");
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].timestamp <= records[i - 1].timestamp)
            throw Error(ErrorKind::ordering,
                        "block_average: timestamps not strictly increasing");
    std::vector<TelemetryRecord> out;
    std::size_t i = 0;
    while (i < records.size()) {
        const std::int64_t key = records[i].timestamp / window_s -
                                 (records[i].timestamp % window_s < 0 ? 1 : 0);
        std::size_t j = i;
        double speed = 0, power = 0, limit = 0, pitch = 0, rho = 0;
        std::vector<double> wd, nd;
        int fault = 0;
        while (j < records.size()) {
            const std::int64_t kj = records[j].timestamp / window_s -
                                    (records[j].timestamp % window_s < 0 ? 1 : 0);
            if (kj != key) break;
            const auto& r = records[j];
            speed += r.wind_speed;
            power += r.power;
            limit += r.power_limit;
            pitch += r.pitch_angle;
            rho += r.air_density;
            wd.push_back(r.wind_direction);
            nd.push_back(r.nacelle_direction);
            fault = std::max(fault, r.fault_code);
            ++j;
        }
        const double n = static_cast<double>(j - i);
        TelemetryRecord avg;
        avg.timestamp = key * window_s;
        avg.wind_speed = speed / n;
        avg.wind_direction = circular_mean_360(wd);
        avg.nacelle_direction = circular_mean_360(nd);
        avg.power = power / n;
        avg.power_limit = limit / n;
        avg.pitch_angle = pitch / n;
        avg.air_density = rho / n;
        avg.fault_code = fault;
        out.push_back(avg);
        i = j;
    }
    return out;
}

// Centered moving average over a time window, with symmetric shrinking at the
// edges: the half-width at t_i is min(window/2, t_i - t_first, t_last - t_i),
// which keeps the window balanced around its center everywhere. `circular`
// averages via the unit-vector resultant and returns degrees in [-180, 180).
inline std::vector<double> moving_average(std::span<const std::int64_t> times,
                                          std::span<const double> values,
                                          double window_s,
                                          bool circular = false) {
    if (times.size() != values.size())
        throw Error(ErrorKind::invalid_input, "moving_average: length mismatch");
    if (!(window_s >= 0.0))
        throw Error(ErrorKind::invalid_input, "moving_average: bad window");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (times[i] <= times[i - 1])
            throw Error(ErrorKind::ordering,
                        "moving_average: timestamps not strictly increasing");
    const std::size_t n = times.size();
    std::vector<double> out(n);
    if (n == 0) return out;
    const double t0 = static_cast<double>(times.front());
    const double tn = static_cast<double>(times.back());
    std::size_t lo = 0, hi = 0;  // [lo, hi) window; both bounds only move right
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(times[i]);
        const double half = std::min({window_s / 2.0, t - t0, tn - t});
        const double eps = 1e-9;
        while (lo < n && static_cast<double>(times[lo]) < t - half - eps) ++lo;
        if (hi < i + 1) hi = i + 1;
        while (hi < n && static_cast<double>(times[hi]) <= t + half + eps) ++hi;
        if (circular) {
            double s = 0.0, c = 0.0;
            for (std::size_t j = lo; j < hi; ++j) {
                s += std::sin(deg2rad(values[j]));
                c += std::cos(deg2rad(values[j]));
            }
            double m = rad2deg(std::atan2(s, c));
            out[i] = m >= 180.0 ? m - 360.0 : m;
        } else {
            double acc = 0.0;
            for (std::size_t j = lo; j < hi; ++j) acc += values[j];
            out[i] = acc / static_cast<double>(hi - lo);
        }
    }
    return out;
}

}  // namespace yawcal
