#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "yawcal/errors.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

inline constexpr std::size_t kFeatureCount = 8;

// Inputs for one next-minute misalignment prediction, all taken at time t:
// the vane misalignment at t and its four previous minutes, then power,
// wind direction and wind speed at t.
struct FeatureVector {
    std::array<double, kFeatureCount> values{};

    double yaw_lag(std::size_t k) const { return values[k]; }  // k in [0,4]
    double power() const { return values[5]; }
    double wind_direction() const { return values[6]; }
    double wind_speed() const { return values[7]; }
};

struct ForecastSample {
    std::int64_t timestamp = 0;   // time t the features are taken at
    FeatureVector features;
    double target = 0.0;          // vane misalignment at t + step
    // Misalignment at t-1, t-2, ... (most recent first), capped at 10 and
    // limited to the contiguous run the sample came from.
    std::vector<double> history;
};

struct FeatureOptions {
    std::int64_t step_s = 60;
    double max_abs_yaw = 90.0;  // |misalignment| above this breaks a run
    std::size_t max_history = 10;
};

// Builds supervised samples from contiguous runs of records. A run breaks on
// a timestamp gap or an out-of-range misalignment. Within a run of length L
// the emitted samples sit at positions 5..L-2 (one lookback position beyond
// the four lags must exist, and the target at t+step must exist), so a run
// yields max(0, L-6) samples.
inline std::vector<ForecastSample> build_features(
    std::span<const TelemetryRecord> records, const FeatureOptions& opt = {}) {
    if (opt.step_s <= 0)
        throw Error(ErrorKind::invalid_input, "build_features: step must be positive");
    if (!(opt.max_abs_yaw > 0.0))
        throw Error(ErrorKind::invalid_input,
                    "build_features: max_abs_yaw must be positive");
    for (std::size_t i = 1; i < records.size(); ++i)
        if (records[i].timestamp <= records[i - 1].timestamp)
            throw Error(ErrorKind::ordering,
                        "build_features: timestamps must be strictly increasing");

    std::vector<ForecastSample> out;
    struct Point {
        std::int64_t t;
        double yaw, power, wind_direction, wind_speed;
    };
    std::vector<Point> run;

    auto flush = [&] {
        const std::size_t len = run.size();
        for (std::size_t j = 5; j + 1 < len; ++j) {
            ForecastSample s;
            s.timestamp = run[j].t;
            for (std::size_t k = 0; k < 5; ++k)
                s.features.values[k] = run[j - k].yaw;
            s.features.values[5] = run[j].power;
            s.features.values[6] = run[j].wind_direction;
            s.features.values[7] = run[j].wind_speed;
            s.target = run[j + 1].yaw;
            const std::size_t depth = std::min(opt.max_history, j);
            s.history.reserve(depth);
            for (std::size_t k = 1; k <= depth; ++k)
                s.history.push_back(run[j - k].yaw);
            out.push_back(std::move(s));
        }
        run.clear();
    };

    for (const auto& r : records) {
        const double yaw = dynamic_yaw(r);
        const bool yaw_ok = std::fabs(yaw) <= opt.max_abs_yaw;
        const bool contiguous =
            !run.empty() && r.timestamp - run.back().t == opt.step_s;
        if (!contiguous) flush();
        if (!yaw_ok) {
            flush();
            continue;
        }
        run.push_back({r.timestamp, yaw, r.power, r.wind_direction, r.wind_speed});
    }
    flush();
    return out;
}

struct TrainTestSplit {
    std::vector<ForecastSample> train;
    std::vector<ForecastSample> test;
    std::size_t embargoed = 0;  // candidate test samples dropped next to the cut
};

// Chronological split: first `train_fraction` of samples train, the rest
// test. Test samples whose feature window could touch a training target are
// embargoed: a sample at t reaches back to t - 4*step while the last train
// target sits at train_end + step, so everything at or before
// train_end + embargo_lags*step goes.
inline TrainTestSplit chronological_split(std::span<const ForecastSample> samples,
                                          double train_fraction = 0.8,
                                          std::int64_t step_s = 60,
                                          int embargo_lags = 5) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw Error(ErrorKind::invalid_input,
                    "chronological_split: fraction must be in (0,1)");
    if (embargo_lags < 0)
        throw Error(ErrorKind::invalid_input,
                    "chronological_split: embargo must be non-negative");
    for (std::size_t i = 1; i < samples.size(); ++i)
        if (samples[i].timestamp <= samples[i - 1].timestamp)
            throw Error(ErrorKind::ordering,
                        "chronological_split: samples must be strictly increasing "
                        "in time; split each stream separately");

    const std::size_t n = samples.size();
    const auto cut = static_cast<std::size_t>(
        std::floor(static_cast<double>(n) * train_fraction));
    if (cut == 0 || cut >= n)
        throw Error(ErrorKind::insufficient_data,
                    "chronological_split: a side of the split is empty");

    TrainTestSplit split;
    split.train.assign(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(cut));
    const std::int64_t horizon =
        split.train.back().timestamp + static_cast<std::int64_t>(embargo_lags) * step_s;
    for (std::size_t i = cut; i < n; ++i) {
        if (samples[i].timestamp <= horizon)
            ++split.embargoed;
        else
            split.test.push_back(samples[i]);
    }
    if (split.test.empty())
        throw Error(ErrorKind::insufficient_data,
                    "chronological_split: no test samples survive the embargo");
    return split;
}

// Per-feature standardization fitted on training data.
struct Normalization {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> stddev{};

    static Normalization fit(std::span<const ForecastSample> samples) {
        if (samples.empty())
            throw Error(ErrorKind::insufficient_data,
                        "Normalization::fit: no samples");
        Normalization norm;
        const double n = static_cast<double>(samples.size());
        for (const auto& s : samples)
            for (std::size_t k = 0; k < kFeatureCount; ++k)
                norm.mean[k] += s.features.values[k];
        for (auto& m : norm.mean) m /= n;
        for (const auto& s : samples)
            for (std::size_t k = 0; k < kFeatureCount; ++k) {
                const double d = s.features.values[k] - norm.mean[k];
                norm.stddev[k] += d * d;
            }
        for (auto& sd : norm.stddev) {
            sd = std::sqrt(sd / n);
            if (sd < 1e-12) sd = 1.0;  // constant feature maps to zero
        }
        return norm;
    }

    std::array<double, kFeatureCount> apply(const FeatureVector& x) const {
        std::array<double, kFeatureCount> z{};
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            z[k] = (x.values[k] - mean[k]) / stddev[k];
        return z;
    }
};

}  // namespace yawcal
