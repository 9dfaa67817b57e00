#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "yawcal/angles.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"
#include "yawcal/forecast.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

// Total misalignment from its static and dynamic parts, wrapped.
inline double total_yaw(double static_yaw, double dyn_yaw) {
    if (!std::isfinite(static_yaw) || !std::isfinite(dyn_yaw))
        throw Error(ErrorKind::invalid_input, "total_yaw: non-finite input");
    return wrap_angle(static_yaw + dyn_yaw);
}

// Percentage reduction in the root-sum-square misalignment achieved by the
// estimates: 100 * (1 - |est - truth|_2 / |truth|_2). Negative when the
// correction would make alignment worse.
inline double correction_factor(std::span<const double> estimates,
                                std::span<const double> truths) {
    if (estimates.size() != truths.size())
        throw Error(ErrorKind::invalid_input, "correction_factor: length mismatch");
    if (estimates.empty())
        throw Error(ErrorKind::insufficient_data, "correction_factor: empty series");
    double err = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!std::isfinite(estimates[i]) || !std::isfinite(truths[i]))
            throw Error(ErrorKind::invalid_input, "correction_factor: non-finite value");
        const double d = estimates[i] - truths[i];
        err += d * d;
        ref += truths[i] * truths[i];
    }
    if (ref <= 0.0)
        throw Error(ErrorKind::undefined_metric,
                    "correction_factor: truth series is identically zero");
    return (1.0 - std::sqrt(err) / std::sqrt(ref)) * 100.0;
}

struct ModelCorrection {
    ModelKind kind = ModelKind::persistence;
    std::vector<double> dynamic_hat;         // predicted next-minute misalignment
    std::vector<double> estimated_total;     // static_hat + dynamic_hat, wrapped
    std::vector<double> corrected_nacelle;   // compass degrees
    std::vector<double> residual_error;      // truth runs only
    double cf_ye = 0.0;
    bool has_cf = false;
    ForecastMetrics dynamic_metrics;         // vs measured next-minute vane signal
};

// Offsets the controller could apply one minute ahead. Rows land at t+1 for
// every feature window at t; scoring against ground truth requires the true
// static offset, which only benchmarking or synthetic data provides.
struct CorrectionReport {
    double static_hat = 0.0;
    std::int64_t step_s = 60;
    std::vector<std::int64_t> timestamps;    // t+1 per row
    std::vector<double> measured_wind;       // compass, at the row time
    std::vector<double> measured_nacelle;    // compass, at the row time
    bool has_truth = false;
    double true_static_yaw = 0.0;
    std::vector<double> real_wind_direction; // measured_wind + true static
    std::vector<double> true_total;          // true static + measured vane offset
    std::vector<ModelCorrection> models;
};

inline CorrectionReport apply_correction(
    std::span<const TelemetryRecord> records, double static_hat,
    const std::map<ModelKind, ForecastModel>& models,
    std::optional<double> true_static_yaw = {},
    const FeatureOptions& feature_opt = {}) {
    if (!std::isfinite(static_hat))
        throw Error(ErrorKind::invalid_input,
                    "apply_correction: static estimate must be finite");
    if (models.empty())
        throw Error(ErrorKind::invalid_input, "apply_correction: no models");
    auto samples = build_features(records, feature_opt);
    if (samples.empty())
        throw Error(ErrorKind::insufficient_data,
                    "apply_correction: no valid feature windows");

    CorrectionReport report;
    report.static_hat = static_hat;
    report.step_s = feature_opt.step_s;
    report.has_truth = true_static_yaw.has_value();
    report.true_static_yaw = true_static_yaw.value_or(0.0);

    // Row records sit one step after each sample; runs are contiguous, so the
    // lookup walks forward in lockstep.
    std::vector<const TelemetryRecord*> rows;
    std::size_t at = 0;
    for (const auto& s : samples) {
        const std::int64_t target_time = s.timestamp + feature_opt.step_s;
        while (at < records.size() && records[at].timestamp < target_time) ++at;
        if (at == records.size() || records[at].timestamp != target_time)
            throw Error(ErrorKind::invalid_input,
                        "apply_correction: record after the feature window is missing");
        rows.push_back(&records[at]);
    }

    report.timestamps.reserve(samples.size());
    for (const auto* r : rows) {
        report.timestamps.push_back(r->timestamp);
        report.measured_wind.push_back(r->wind_direction);
        report.measured_nacelle.push_back(r->nacelle_direction);
        if (report.has_truth) {
            report.real_wind_direction.push_back(
                wrap_angle_360(r->wind_direction + report.true_static_yaw));
            report.true_total.push_back(
                total_yaw(report.true_static_yaw, dynamic_yaw(*r)));
        }
    }

    std::vector<double> measured_next(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        measured_next[i] = samples[i].target;

    for (const auto& [kind, model] : models) {
        ModelCorrection mc;
        mc.kind = kind;
        mc.dynamic_hat = predict_series(model, samples);
        mc.estimated_total.reserve(samples.size());
        mc.corrected_nacelle.reserve(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            mc.estimated_total.push_back(total_yaw(static_hat, mc.dynamic_hat[i]));
            mc.corrected_nacelle.push_back(wrap_angle_360(
                rows[i]->nacelle_direction + mc.dynamic_hat[i] + static_hat));
        }
        mc.dynamic_metrics = score_forecast(mc.dynamic_hat, measured_next);
        if (report.has_truth) {
            mc.residual_error.reserve(samples.size());
            for (std::size_t i = 0; i < samples.size(); ++i)
                mc.residual_error.push_back(angle_difference(
                    report.real_wind_direction[i], mc.corrected_nacelle[i]));
            mc.cf_ye = correction_factor(mc.estimated_total, report.true_total);
            mc.has_cf = true;
        }
        report.models.push_back(std::move(mc));
    }
    return report;
}

// Re-scores a report as if the yaw controller ignored offset changes smaller
// than the deadband until they persist for `wait_steps` rows. The applied
// offset starts at zero and is replaced only after a persistent demand.
inline CorrectionReport wait_time_overlay(const CorrectionReport& report,
                                          double deadband = 6.0,
                                          int wait_steps = 5) {
    if (!(deadband >= 0.0) || wait_steps < 0)
        throw Error(ErrorKind::invalid_input,
                    "wait_time_overlay: negative deadband or wait");
    CorrectionReport out = report;
    if (deadband == 0.0 || wait_steps == 0) return out;

    for (auto& mc : out.models) {
        double applied = 0.0;
        int counter = 0;
        for (std::size_t i = 0; i < mc.estimated_total.size(); ++i) {
            const double demand = mc.estimated_total[i];
            if (std::fabs(angle_difference(demand, applied)) >= deadband) {
                if (++counter >= wait_steps) {
                    applied = demand;
                    counter = 0;
                }
            } else {
                counter = 0;
            }
            mc.estimated_total[i] = applied;
            mc.corrected_nacelle[i] = wrap_angle_360(out.measured_nacelle[i] +
                                                     applied);
        }
        if (out.has_truth) {
            for (std::size_t i = 0; i < mc.estimated_total.size(); ++i)
                mc.residual_error[i] = angle_difference(
                    out.real_wind_direction[i], mc.corrected_nacelle[i]);
            mc.cf_ye = correction_factor(mc.estimated_total, out.true_total);
        }
    }
    return out;
}

}  // namespace yawcal
