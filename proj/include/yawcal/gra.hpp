#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "yawcal/errors.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

struct NamedSeries {
    std::string name;
    std::vector<double> values;
};

struct GraResult {
    std::string name;
    double grade = 0.0;
    bool degenerate = false;  // channel had zero range before normalization
};

// Grey relational grades of candidate channels against a target series.
// Every series is min-max normalized to [0,1]; per-point distances are scored
// with the classic coefficient (d_min + rho*d_max)/(d + rho*d_max) using the
// global two-level extrema, and averaged. Results are sorted by grade, best
// first, ties broken by name.
inline std::vector<GraResult> gra_rank(std::span<const NamedSeries> channels,
                                       std::span<const double> target,
                                       double rho = 0.5) {
    if (!(rho > 0.0 && rho <= 1.0))
        throw Error(ErrorKind::invalid_input, "gra_rank: rho must be in (0,1]");
    if (channels.size() < 2)
        throw Error(ErrorKind::invalid_input,
                    "gra_rank: need at least two channels to rank");
    const std::size_t n = target.size();
    if (n < 10)
        throw Error(ErrorKind::insufficient_data,
                    "gra_rank: need at least 10 points");
    for (const auto& ch : channels)
        if (ch.values.size() != n)
            throw Error(ErrorKind::invalid_input,
                        "gra_rank: channel '" + ch.name +
                            "' length differs from target");

    auto normalize = [](std::span<const double> v, bool* degenerate) {
        double lo = v[0], hi = v[0];
        for (double x : v) {
            if (!std::isfinite(x))
                throw Error(ErrorKind::invalid_input, "gra_rank: non-finite value");
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
        std::vector<double> out(v.size(), 0.0);
        const double range = hi - lo;
        if (degenerate) *degenerate = range <= 0.0;
        if (range > 0.0)
            for (std::size_t i = 0; i < v.size(); ++i)
                out[i] = (v[i] - lo) / range;
        return out;
    };

    auto y = normalize(target, nullptr);
    std::vector<std::vector<double>> deltas(channels.size());
    std::vector<bool> degenerate(channels.size());
    double d_min = std::numeric_limits<double>::infinity();
    double d_max = 0.0;
    for (std::size_t c = 0; c < channels.size(); ++c) {
        bool deg = false;
        auto x = normalize(channels[c].values, &deg);
        degenerate[c] = deg;
        deltas[c].resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double d = std::fabs(x[k] - y[k]);
            deltas[c][k] = d;
            d_min = std::min(d_min, d);
            d_max = std::max(d_max, d);
        }
    }
    if (d_max <= 0.0) d_max = 1.0;  // all channels identical to target

    std::vector<GraResult> out;
    for (std::size_t c = 0; c < channels.size(); ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            acc += (d_min + rho * d_max) / (deltas[c][k] + rho * d_max);
        out.push_back({channels[c].name, acc / static_cast<double>(n),
                       degenerate[c]});
    }
    std::sort(out.begin(), out.end(), [](const GraResult& a, const GraResult& b) {
        if (a.grade != b.grade) return a.grade > b.grade;
        return a.name < b.name;
    });
    return out;
}

// Ranks the standard SCADA channels as predictors of the next-minute vane
// misalignment. Only strictly consecutive record pairs (step_s apart) form
// points; gaps are dropped.
inline std::vector<GraResult> rank_yaw_predictors(
    std::span<const TelemetryRecord> records, double rho = 0.5,
    std::int64_t step_s = 60) {
    static const char* names[] = {"wind_speed",   "wind_direction",
                                  "nacelle_direction", "power",
                                  "power_limit",  "pitch_angle",
                                  "air_density",  "dynamic_yaw"};
    std::vector<NamedSeries> channels(8);
    for (int c = 0; c < 8; ++c) channels[static_cast<std::size_t>(c)].name = names[c];
    std::vector<double> target;
    for (std::size_t i = 0; i + 1 < records.size(); ++i) {
        if (records[i + 1].timestamp - records[i].timestamp != step_s) continue;
        const auto& r = records[i];
        channels[0].values.push_back(r.wind_speed);
        channels[1].values.push_back(r.wind_direction);
        channels[2].values.push_back(r.nacelle_direction);
        channels[3].values.push_back(r.power);
        channels[4].values.push_back(r.power_limit);
        channels[5].values.push_back(r.pitch_angle);
        channels[6].values.push_back(r.air_density);
        channels[7].values.push_back(dynamic_yaw(r));
        target.push_back(dynamic_yaw(records[i + 1]));
    }
    return gra_rank(channels, target, rho);
}

}  // namespace yawcal
