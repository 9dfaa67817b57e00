#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "yawcal/angles.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/preprocess.hpp"
#include "yawcal/rng.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

// First-order autoregressive process parameters; the initial value is a
// stationary draw.
struct Ar1Process {
    double mean = 0.0;
    double persistence = 0.95;  // in [0, 1)
    double noise_std = 1.0;
};

// Minute-step yaw controller: when the vane error stays at or beyond the
// deadband for `wait_steps` consecutive minutes, the nacelle slews toward the
// measured wind direction at the given rate.
struct YawControllerParams {
    double deadband = 6.0;       // deg
    int wait_steps = 5;          // minutes of persistent error before a move
    double rate_deg_per_s = 0.5;
};

// Poisson-ish episode injection: each minute outside an episode starts one
// with probability starts_per_hour/60; lengths are uniform on [min_len, max_len].
struct EpisodeModel {
    double starts_per_hour = 0.0;
    int min_len = 10;   // minutes
    int max_len = 40;
};

struct SynthConfig {
    std::uint64_t seed = 1;
    int duration_minutes = 5000;
    std::int64_t start_time = 1704067200;  // minute-aligned epoch seconds
    double static_yaw = 0.0;               // deg, the miscalibration to inject
    double alpha = 3.0;                    // cosine loss exponent
    TurbineConfig turbine;
    Ar1Process wind{8.0, 0.97, 0.35};        // m/s
    Ar1Process direction{270.0, 0.995, 1.2}; // deg, slow meander
    double vane_noise_std = 0.2;   // deg, fast local-flow fluctuation
    double density_mean = 1.225;
    double density_std = 0.004;
    double power_noise_std = 0.0;  // fractional, truncated at 4 sigma
    YawControllerParams controller;
    EpisodeModel faults{0.2, 10, 40};
    EpisodeModel curtailment{0.2, 10, 40};
    double normal_limit_fraction = 1.25;     // power limit over rated, healthy
    double curtailed_limit_fraction = 0.6;   // power limit over rated, curtailed
    double curtailed_band = 0.08;            // |P-P_L|/P_L stays inside this
};

inline void validate(const SynthConfig& c) {
    validate(c.turbine);
    auto bad = [](const std::string& m) {
        throw Error(ErrorKind::invalid_input, "synth config: " + m);
    };
    if (c.duration_minutes < 1) bad("duration must be at least one minute");
    if (c.start_time % 60 != 0) bad("start time must be minute-aligned");
    if (!(std::fabs(c.static_yaw) < 90.0)) bad("static yaw must be within (-90, 90)");
    if (!(c.alpha > 0.0)) bad("alpha must be positive");
    for (const Ar1Process* p : {&c.wind, &c.direction}) {
        if (!(p->persistence >= 0.0 && p->persistence < 1.0))
            bad("AR persistence must be in [0, 1)");
        if (!(p->noise_std >= 0.0)) bad("AR noise must be non-negative");
    }
    if (!(c.vane_noise_std >= 0.0)) bad("vane noise must be non-negative");
    if (!(c.density_mean > 0.0)) bad("density mean must be positive");
    if (!(c.density_std >= 0.0)) bad("density std must be non-negative");
    if (!(c.power_noise_std >= 0.0 && c.power_noise_std < 0.125))
        bad("power noise fraction must be in [0, 0.125)");
    if (c.controller.wait_steps < 1) bad("controller wait must be >= 1");
    if (!(c.controller.deadband > 0.0)) bad("controller deadband must be > 0");
    for (const EpisodeModel* e : {&c.faults, &c.curtailment}) {
        if (!(e->starts_per_hour >= 0.0)) bad("episode rate must be >= 0");
        if (e->min_len < 1 || e->max_len < e->min_len) bad("bad episode lengths");
    }
    if (!(c.curtailed_band > 0.0 && c.curtailed_band < 0.1))
        bad("curtailed band must be in (0, 0.1)");
    if (!(c.curtailed_limit_fraction > 0.0)) bad("bad curtailed limit fraction");
    // Healthy records must never look curtailed under the conventional 10%
    // filter band: the worst-case power is rated * (1 + 4 sigma noise) times
    // the largest density factor, and must clear the band below the limit.
    const double max_power_factor =
        (1.0 + 4.0 * c.power_noise_std) *
        ((c.density_mean + 4.0 * c.density_std) / c.turbine.standard_density);
    if (c.normal_limit_fraction * 0.9 <= max_power_factor)
        bad("normal power limit too close to attainable power");
    if (c.curtailed_limit_fraction * c.normal_limit_fraction >= 1.0)
        bad("curtailed limit must sit well below the normal limit");
}

struct GroundTruth {
    std::vector<std::int64_t> timestamps;
    std::vector<double> static_yaw;   // constant series, one per record
    std::vector<double> dynamic_yaw;
    std::vector<double> total_yaw;    // wrap(static + dynamic)
};

struct SynthDataset {
    std::vector<TelemetryRecord> records;
    GroundTruth truth;
    SynthConfig config;
    // Injected episode minutes (disjoint), for reconciliation against the
    // cleaning stages.
    std::vector<std::int64_t> injected_fault_times;
    std::vector<std::int64_t> injected_curtailment_times;
};

// Idealized free-response power at standard density: cubic up to rated speed,
// flat at rated until cut-out, zero outside the operating range.
inline double ideal_power(const TurbineConfig& t, double wind_speed) {
    if (wind_speed < t.cut_in_speed || wind_speed > t.cut_out_speed) return 0.0;
    if (wind_speed >= t.rated_speed) return t.rated_power;
    const double c = t.rated_power / (t.rated_speed * t.rated_speed * t.rated_speed);
    return c * wind_speed * wind_speed * wind_speed;
}

namespace detail {

inline std::vector<bool> draw_episodes(Rng& g, int minutes, const EpisodeModel& m) {
    std::vector<bool> mask(static_cast<std::size_t>(minutes), false);
    const double p_start = m.starts_per_hour / 60.0;
    int t = 0;
    while (t < minutes) {
        if (p_start > 0.0 && g.uniform() < p_start) {
            const int len = m.min_len +
                            static_cast<int>(g.uniform_int(
                                static_cast<std::uint64_t>(m.max_len - m.min_len + 1)));
            for (int k = 0; k < len && t + k < minutes; ++k)
                mask[static_cast<std::size_t>(t + k)] = true;
            t += len + 1;
        } else {
            ++t;
        }
    }
    return mask;
}

}  // namespace detail

// Generates a minute-resolution SCADA series with a known injected static yaw
// offset. The emitted data satisfies, exactly:
//   dynamic_yaw(record) == truth.dynamic_yaw
//   truth.total_yaw == wrap(static_yaw + truth.dynamic_yaw)
// and the produced power is ideal_power(V) * rho/rho_std * cos^alpha(total).
inline SynthDataset generate_scada(const SynthConfig& cfg) {
    validate(cfg);
    const int n = cfg.duration_minutes;
    Rng wind_rng(cfg.seed, 1), dir_rng(cfg.seed, 2), vane_rng(cfg.seed, 3),
        rho_rng(cfg.seed, 4), pnoise_rng(cfg.seed, 5), fault_rng(cfg.seed, 6),
        curtail_rng(cfg.seed, 7), code_rng(cfg.seed, 8);

    auto stationary0 = [](const Ar1Process& p, Rng& g) {
        const double denom = std::sqrt(1.0 - p.persistence * p.persistence);
        return p.mean + (denom > 0.0 ? p.noise_std / denom : 0.0) * g.normal();
    };

    auto fault_mask = detail::draw_episodes(fault_rng, n, cfg.faults);
    auto curtail_mask = detail::draw_episodes(curtail_rng, n, cfg.curtailment);
    for (int i = 0; i < n; ++i)  // keep the injected sets disjoint
        if (fault_mask[static_cast<std::size_t>(i)])
            curtail_mask[static_cast<std::size_t>(i)] = false;

    SynthDataset out;
    out.config = cfg;
    out.records.reserve(static_cast<std::size_t>(n));

    double wind = stationary0(cfg.wind, wind_rng);
    double meander = stationary0(cfg.direction, dir_rng);  // unwrapped
    double nacelle = meander + cfg.vane_noise_std * vane_rng.normal() -
                     cfg.static_yaw;  // start roughly aligned to the vane
    int wait_counter = 0;

    for (int i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        if (i > 0) {
            wind = cfg.wind.mean +
                   cfg.wind.persistence * (wind - cfg.wind.mean) +
                   cfg.wind.noise_std * wind_rng.normal();
            meander = cfg.direction.mean +
                      cfg.direction.persistence * (meander - cfg.direction.mean) +
                      cfg.direction.noise_std * dir_rng.normal();
        }
        const double speed = std::max(0.05, wind);
        // Local inflow direction: slow meander plus fast fluctuation. The vane
        // sees this flow through a sensor chain miscalibrated by -static_yaw.
        const double local_wind =
            meander + cfg.vane_noise_std * vane_rng.normal();
        const double measured_wind = local_wind - cfg.static_yaw;
        const double vane_error = measured_wind - nacelle;  // unwrapped, small

        // Yaw controller acts on the vane error it can see.
        if (std::fabs(vane_error) >= cfg.controller.deadband) {
            ++wait_counter;
            if (wait_counter >= cfg.controller.wait_steps) {
                const double max_move = cfg.controller.rate_deg_per_s * 60.0;
                const double move =
                    std::clamp(vane_error, -max_move, max_move);
                nacelle += move;
                wait_counter = 0;
            }
        } else {
            wait_counter = 0;
        }

        const double dyn = measured_wind - nacelle;
        const double total = cfg.static_yaw + dyn;  // true misalignment
        const double rho = std::min(
            std::max(0.6, rho_rng.truncated_normal(cfg.density_mean,
                                                   cfg.density_std, 4.0)),
            2.0);

        TelemetryRecord r;
        r.timestamp = cfg.start_time + 60LL * i;
        r.wind_speed = speed;
        r.wind_direction = wrap_angle_360(measured_wind);
        r.nacelle_direction = wrap_angle_360(nacelle);
        r.air_density = rho;

        const bool faulted = fault_mask[ui];
        const bool curtailed = curtail_mask[ui];
        if (faulted) {
            r.fault_code = 1 + static_cast<int>(code_rng.uniform_int(5));
            r.power = 0.0;
            r.power_limit = cfg.normal_limit_fraction * cfg.turbine.rated_power;
            r.pitch_angle = 90.0;
        } else if (curtailed) {
            r.fault_code = 0;
            r.power_limit =
                cfg.curtailed_limit_fraction * cfg.turbine.rated_power;
            r.power = r.power_limit *
                      (1.0 + cfg.curtailed_band * (2.0 * pnoise_rng.uniform() - 1.0));
            r.pitch_angle = 4.0;
        } else {
            r.fault_code = 0;
            r.power_limit = cfg.normal_limit_fraction * cfg.turbine.rated_power;
            const double region_power = ideal_power(cfg.turbine, speed);
            double p = region_power * (rho / cfg.turbine.standard_density);
            if (speed < cfg.turbine.rated_speed) {
                const double c = std::cos(deg2rad(total));
                p *= c > 0.0 ? std::pow(c, cfg.alpha) : 0.0;
            }
            if (cfg.power_noise_std > 0.0)
                p *= 1.0 + pnoise_rng.truncated_normal(0.0, cfg.power_noise_std, 4.0);
            r.power = std::max(0.0, p);
            r.pitch_angle = speed >= cfg.turbine.rated_speed
                                ? 12.0 + 2.0 * (speed - cfg.turbine.rated_speed)
                                : 0.4;
        }

        validate(r);
        out.records.push_back(r);
        out.truth.timestamps.push_back(r.timestamp);
        out.truth.static_yaw.push_back(cfg.static_yaw);
        out.truth.dynamic_yaw.push_back(wrap_angle(dyn));
        out.truth.total_yaw.push_back(wrap_angle(total));
        if (faulted) out.injected_fault_times.push_back(r.timestamp);
        if (curtailed) out.injected_curtailment_times.push_back(r.timestamp);
    }
    return out;
}

// Restricts a ground-truth table to the given (sorted, unique) timestamps.
inline GroundTruth align_truth(const GroundTruth& truth,
                               std::span<const TelemetryRecord> records) {
    GroundTruth out;
    std::size_t j = 0;
    for (const auto& r : records) {
        while (j < truth.timestamps.size() && truth.timestamps[j] < r.timestamp)
            ++j;
        if (j == truth.timestamps.size() || truth.timestamps[j] != r.timestamp)
            throw Error(ErrorKind::invalid_input,
                        "align_truth: record timestamp missing from truth");
        out.timestamps.push_back(truth.timestamps[j]);
        out.static_yaw.push_back(truth.static_yaw[j]);
        out.dynamic_yaw.push_back(truth.dynamic_yaw[j]);
        out.total_yaw.push_back(truth.total_yaw[j]);
    }
    return out;
}

struct BenchmarkCase {
    std::string name;
    std::string purpose;  // "modeling" or "transferability" or "baseline"
    double true_static_yaw = 0.0;
    std::vector<TelemetryRecord> records;  // cleaned
    GroundTruth truth;                     // aligned with records
    CleaningReport cleaning;
    SynthConfig config;
};

struct BenchmarkSuite {
    std::vector<BenchmarkCase> cases;  // 4 modeling + 2 transferability
    BenchmarkCase baseline;            // zero offset, for curve fitting
};

// Field-like conditions for benchmarking: a wind vane with realistic
// minute-scale noise and a locally mean-reverting direction meander. Both
// make one-step forecasting a genuine problem instead of a random walk.
inline SynthConfig benchmark_base_config() {
    SynthConfig cfg;
    cfg.vane_noise_std = 1.5;
    cfg.direction.persistence = 0.99;
    return cfg;
}

struct BenchmarkOptions {
    double power_noise_std = 0.02;
    int records_per_case = 4500;
    int initial_duration = 5800;
    // Seed/offset/duration fields are overwritten per case.
    SynthConfig base = benchmark_base_config();
};

// Six known-offset cases plus a zero-offset baseline, each generated with an
// independent seed stream, cleaned by the standard pipeline and trimmed to
// exactly records_per_case rows with truth kept aligned.
inline BenchmarkSuite standard_benchmark(std::uint64_t seed,
                                         const BenchmarkOptions& opts = {}) {
    struct Spec {
        const char* name;
        const char* purpose;
        double offset;
    };
    const Spec specs[] = {
        {"modeling_p5", "modeling", 5.0},   {"modeling_p10", "modeling", 10.0},
        {"modeling_m8", "modeling", -8.0},  {"modeling_m10", "modeling", -10.0},
        {"transfer_p8", "transferability", 8.0},
        {"transfer_m6", "transferability", -6.0},
    };

    // Cases occupy disjoint time ranges (stride sized for the retry-grown
    // worst case) so pooled per-case streams stay strictly increasing.
    int max_duration = opts.initial_duration;
    for (int k = 0; k < 4; ++k) max_duration += max_duration / 4;
    const std::int64_t stride_s = 60LL * (max_duration + 60);

    auto build_case = [&](const char* name, const char* purpose, double offset,
                          std::uint64_t salt) {
        BenchmarkCase bc;
        bc.name = name;
        bc.purpose = purpose;
        bc.true_static_yaw = offset;
        SynthConfig cfg = opts.base;
        cfg.power_noise_std = opts.power_noise_std;
        cfg.static_yaw = offset;
        cfg.seed = seed ^ (0x9e3779b97f4a7c15ull * (salt + 1));
        cfg.start_time = opts.base.start_time +
                         stride_s * static_cast<std::int64_t>(salt);
        int duration = opts.initial_duration;
        for (int attempt = 0;; ++attempt) {
            cfg.duration_minutes = duration;
            auto raw = generate_scada(cfg);
            auto [cleaned, report] = clean_pipeline(raw.records, cfg.turbine);
            if (cleaned.size() >=
                static_cast<std::size_t>(opts.records_per_case)) {
                cleaned.resize(static_cast<std::size_t>(opts.records_per_case));
                bc.records = std::move(cleaned);
                bc.truth = align_truth(raw.truth, bc.records);
                bc.cleaning = report;
                bc.config = cfg;
                return bc;
            }
            if (attempt >= 4)
                throw Error(ErrorKind::insufficient_data,
                            std::string("standard_benchmark: case ") + name +
                                " cannot reach the record target");
            duration = duration + duration / 4;
        }
    };

    BenchmarkSuite suite;
    std::uint64_t salt = 0;
    for (const auto& s : specs)
        suite.cases.push_back(build_case(s.name, s.purpose, s.offset, salt++));
    suite.baseline = build_case("baseline", "baseline", 0.0, salt);
    return suite;
}

}  // namespace yawcal
