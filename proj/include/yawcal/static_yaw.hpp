#pragma once

#include <array>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "yawcal/angles.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/optimize.hpp"
#include "yawcal/power_curve.hpp"
#include "yawcal/preprocess.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

// Model power for one sample under a trial misalignment: the cosine-law value
// where the factor is positive, zero beyond 90 degrees. Continuous in theta.
inline double cosine_law_power(double reference_power, double misalign_deg,
                               double alpha) {
    const double c = std::cos(deg2rad(misalign_deg));
    return c > 0.0 ? reference_power * std::pow(c, alpha) : 0.0;
}

struct AlphaDataset {
    std::vector<TelemetryRecord> records;  // cleaned, inside the curve domain
    double known_static_yaw = 0.0;         // deg
};

struct AlphaOptions {
    double alpha_min = 0.05;
    double alpha_max = 6.0;
    double tol = 1e-6;
    int max_iter = 200;
    std::size_t min_case_records = 10;
    // Relative objective variation below this marks a case as carrying no
    // information about alpha (e.g. all misalignments near zero).
    double identifiability_spread = 1e-10;
};

struct AlphaCaseResult {
    double known_static_yaw = 0.0;
    double alpha = 0.0;
    double objective = 0.0;
    std::size_t sample_count = 0;
    bool identifiable = true;
};

struct ExponentEstimate {
    double alpha = 0.0;             // mean over identifiable cases
    std::array<double, 2> ci95{0.0, 0.0};
    std::vector<double> per_case_alphas;  // identifiable cases, input order
    double objective_value = 0.0;   // sum of per-case minima
    std::vector<AlphaCaseResult> cases;
};

// Estimates the cosine-law exponent from datasets with known static offsets:
// per case, minimizes sum_i (P_i - P0_i cos^a(theta_s + theta_d_i))^2 over a,
// then averages the per-case minimizers and attaches a t-based 95% interval.
inline ExponentEstimate estimate_alpha(std::span<const AlphaDataset> datasets,
                                       const PowerCurve& curve,
                                       const AlphaOptions& opts = {}) {
    if (datasets.empty())
        throw Error(ErrorKind::insufficient_data, "estimate_alpha: no datasets");
    if (!(opts.alpha_min > 0.0 && opts.alpha_min < opts.alpha_max))
        throw Error(ErrorKind::invalid_input, "estimate_alpha: bad alpha bounds");

    ExponentEstimate est;
    for (std::size_t ci = 0; ci < datasets.size(); ++ci) {
        const auto& ds = datasets[ci];
        if (ds.records.size() < opts.min_case_records)
            throw Error(ErrorKind::insufficient_data,
                        "estimate_alpha: case " + std::to_string(ci) + " has " +
                            std::to_string(ds.records.size()) + " records");
        std::vector<double> p0, p, cosv;
        p0.reserve(ds.records.size());
        for (const auto& r : ds.records) {
            const double total = ds.known_static_yaw + dynamic_yaw(r);
            const double c = std::cos(deg2rad(total));
            if (c <= 0.0)
                throw Error(ErrorKind::domain,
                            "estimate_alpha: sample at t=" +
                                std::to_string(r.timestamp) +
                                " has misalignment beyond 90 degrees");
            p0.push_back(reference_power(curve, r.wind_speed, r.air_density));
            p.push_back(r.power);
            cosv.push_back(c);
        }
        auto objective = [&](double a) {
            double acc = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double resid = p[i] - p0[i] * std::pow(cosv[i], a);
                acc += resid * resid;
            }
            return acc;
        };

        AlphaCaseResult cr;
        cr.known_static_yaw = ds.known_static_yaw;
        cr.sample_count = ds.records.size();

        double j_lo = 0.0, j_hi = 0.0;
        for (int k = 0; k <= 4; ++k) {
            const double a = opts.alpha_min +
                             (opts.alpha_max - opts.alpha_min) * (k / 4.0);
            const double j = objective(a);
            if (k == 0) { j_lo = j_hi = j; }
            j_lo = std::min(j_lo, j);
            j_hi = std::max(j_hi, j);
        }
        cr.identifiable =
            j_hi - j_lo > opts.identifiability_spread * std::max(j_hi, 1e-300);

        if (cr.identifiable) {
            auto r = brent_minimize(objective, opts.alpha_min, opts.alpha_max,
                                    opts.tol, opts.max_iter);
            if (!r.converged)
                throw Error(ErrorKind::fit_failure,
                            "estimate_alpha: case " + std::to_string(ci) +
                                " did not converge in " +
                                std::to_string(r.iterations) + " iterations");
            cr.alpha = r.x;
            cr.objective = r.fx;
            est.per_case_alphas.push_back(r.x);
            est.objective_value += r.fx;
        }
        est.cases.push_back(cr);
    }

    const auto& a = est.per_case_alphas;
    if (a.empty())
        throw Error(ErrorKind::fit_failure,
                    "estimate_alpha: no case carries information about alpha");
    double mean = 0.0;
    for (double v : a) mean += v;
    mean /= static_cast<double>(a.size());
    est.alpha = mean;
    if (a.size() >= 2) {
        double ss = 0.0;
        for (double v : a) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(a.size() - 1));
        boost::math::students_t dist(static_cast<double>(a.size() - 1));
        const double t = boost::math::quantile(dist, 0.975);
        const double half = t * sd / std::sqrt(static_cast<double>(a.size()));
        est.ci95 = {mean - half, mean + half};
    } else {
        est.ci95 = {mean, mean};
    }
    return est;
}

struct ReferenceRefinement {
    PowerCurve curve;
    ExponentEstimate alpha;
    int iterations_run = 0;
};

// Builds the reference curve and exponent jointly. A curve fitted from nearly
// aligned records still absorbs the residual cos^alpha(theta_d) loss of the
// baseline itself, which biases the exponent; alternating between correcting
// the baseline power with the current exponent and re-estimating contracts
// that bias geometrically. No ground truth is consulted.
inline ReferenceRefinement refine_reference_curve(
    std::span<const TelemetryRecord> baseline,
    std::span<const AlphaDataset> known_offset_cases,
    const TurbineConfig& turbine, int degree = 9, double max_align_deg = 3.0,
    int iterations = 6, const AlphaOptions& alpha_opts = {}) {
    if (iterations < 1)
        throw Error(ErrorKind::invalid_input,
                    "refine_reference_curve: iterations must be >= 1");
    auto aligned = select_aligned_records(baseline, max_align_deg);

    ReferenceRefinement out;
    double alpha_hat = 0.0;  // first pass: no correction
    for (int it = 0; it < iterations; ++it) {
        std::vector<TelemetryRecord> corrected = aligned;
        if (alpha_hat > 0.0)
            for (auto& r : corrected) {
                const double c = std::cos(deg2rad(dynamic_yaw(r)));
                r.power /= std::pow(c, alpha_hat);
            }
        out.curve = fit_power_curve(corrected, turbine, degree);

        std::vector<AlphaDataset> usable;
        for (const auto& ds : known_offset_cases)
            usable.push_back(
                {filter_to_curve_domain(ds.records, out.curve), ds.known_static_yaw});
        out.alpha = estimate_alpha(usable, out.curve, alpha_opts);
        out.iterations_run = it + 1;
        if (std::fabs(out.alpha.alpha - alpha_hat) < 1e-7) break;
        alpha_hat = out.alpha.alpha;
    }
    return out;
}

struct StaticYawOptions {
    double bin_width = 0.5;          // m/s
    std::size_t min_bin_count = 20;  // samples needed to fit a bin
    double theta_min = -45.0;        // deg, search bracket
    double theta_max = 45.0;
    double tol = 1e-6;
    int max_iter = 200;
    double smooth_window_s = 0.0;    // optional pre-fit smoothing, 0 disables
    std::optional<std::pair<double, double>> speed_range;  // extra restriction
};

struct BinEstimate {
    double v_lo = 0.0;
    double v_hi = 0.0;
    double theta_hat = 0.0;
    double objective = 0.0;
    std::size_t count = 0;
    bool at_boundary = false;
};

struct StaticYawEstimate {
    std::vector<BinEstimate> bins;
    double static_yaw = 0.0;        // mean of per-bin estimates
    std::size_t used_samples = 0;
};

// Recovers the static offset from cleaned records with unknown miscalibration:
// per wind-speed bin, minimizes sum_i (P_i - P0_i cos^alpha(theta + theta_d_i))^2
// over theta, then averages the per-bin minimizers. Derived per-record series
// (reference power first) are optionally smoothed before binning, so the
// reference is never computed from smoothed inputs.
inline StaticYawEstimate estimate_static_yaw(
    std::span<const TelemetryRecord> records, const PowerCurve& curve,
    double alpha, const StaticYawOptions& opts = {}) {
    if (!(alpha > 0.0))
        throw Error(ErrorKind::invalid_input, "estimate_static_yaw: bad alpha");
    if (!(opts.bin_width > 0.0))
        throw Error(ErrorKind::invalid_input, "estimate_static_yaw: bad bin width");
    if (!(opts.theta_min < opts.theta_max))
        throw Error(ErrorKind::invalid_input,
                    "estimate_static_yaw: bad theta bracket");
    if (records.empty())
        throw Error(ErrorKind::insufficient_data,
                    "estimate_static_yaw: no records");

    // The reference is undefined outside the curve's fitted speed domain.
    const auto usable = filter_to_curve_domain(records, curve);
    if (usable.empty())
        throw Error(ErrorKind::insufficient_data,
                    "estimate_static_yaw: no records inside the curve domain");

    std::vector<std::int64_t> times;
    std::vector<double> speed, p0, p, dyn;
    times.reserve(usable.size());
    for (const auto& r : usable) {
        times.push_back(r.timestamp);
        speed.push_back(r.wind_speed);
        p0.push_back(reference_power(curve, r.wind_speed, r.air_density));
        p.push_back(r.power);
        dyn.push_back(dynamic_yaw(r));
    }
    if (opts.smooth_window_s > 0.0) {
        speed = moving_average(times, speed, opts.smooth_window_s);
        p0 = moving_average(times, p0, opts.smooth_window_s);
        p = moving_average(times, p, opts.smooth_window_s);
        dyn = moving_average(times, dyn, opts.smooth_window_s, true);
    }

    std::map<long long, std::vector<std::size_t>> bins;
    for (std::size_t i = 0; i < speed.size(); ++i) {
        if (opts.speed_range && (speed[i] < opts.speed_range->first ||
                                 speed[i] > opts.speed_range->second))
            continue;
        bins[static_cast<long long>(std::floor(speed[i] / opts.bin_width))]
            .push_back(i);
    }

    StaticYawEstimate est;
    double sum_theta = 0.0;
    for (const auto& [k, idx] : bins) {
        if (idx.size() < opts.min_bin_count) continue;
        auto objective = [&](double theta) {
            double acc = 0.0;
            for (std::size_t i : idx) {
                const double resid =
                    p[i] - cosine_law_power(p0[i], theta + dyn[i], alpha);
                acc += resid * resid;
            }
            return acc;
        };
        auto r = brent_minimize(objective, opts.theta_min, opts.theta_max,
                                opts.tol, opts.max_iter);
        if (!r.converged)
            throw Error(ErrorKind::fit_failure,
                        "estimate_static_yaw: bin " + std::to_string(k) +
                            " did not converge");
        BinEstimate b;
        b.v_lo = static_cast<double>(k) * opts.bin_width;
        b.v_hi = b.v_lo + opts.bin_width;
        b.theta_hat = r.x;
        b.objective = r.fx;
        b.count = idx.size();
        // Brent's terminal interval scales with tol * |x| near the edges.
        const double edge_eps =
            10.0 * (opts.tol * std::max(std::fabs(opts.theta_min),
                                        std::fabs(opts.theta_max)) +
                    opts.tol);
        b.at_boundary = r.x - opts.theta_min <= edge_eps ||
                        opts.theta_max - r.x <= edge_eps;
        est.bins.push_back(b);
        est.used_samples += idx.size();
        sum_theta += r.x;
    }
    if (est.bins.empty())
        throw Error(ErrorKind::insufficient_data,
                    "estimate_static_yaw: no wind-speed bin reaches " +
                        std::to_string(opts.min_bin_count) + " samples");
    est.static_yaw = sum_theta / static_cast<double>(est.bins.size());
    return est;
}

// Signed relative error of an estimate against a nonzero truth, in percent.
inline double rmae_percent(double estimate, double truth) {
    if (truth == 0.0 || !std::isfinite(truth))
        throw Error(ErrorKind::undefined_metric,
                    "relative error undefined for zero truth");
    return (estimate - truth) / std::fabs(truth) * 100.0;
}

// Mean relative distance between cosine-corrected power and the reference
// curve over a speed window: |P / cos^alpha(theta_total) - P0| / P0 averaged
// over records. Measures how well division by the cosine law collapses a
// misaligned dataset back onto the aligned curve.
inline double cosine_collapse_deviation(std::span<const TelemetryRecord> records,
                                        double static_yaw,
                                        const PowerCurve& curve, double alpha,
                                        double v_lo, double v_hi) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& r : records) {
        if (r.wind_speed < v_lo || r.wind_speed > v_hi) continue;
        const double c = std::cos(deg2rad(static_yaw + dynamic_yaw(r)));
        if (c <= 0.1) continue;  // hopeless geometry: not a collapse candidate
        const double p0 = reference_power(curve, r.wind_speed, r.air_density);
        if (p0 <= 0.0) continue;
        acc += std::fabs(r.power / std::pow(c, alpha) - p0) / p0;
        ++n;
    }
    if (n == 0)
        throw Error(ErrorKind::insufficient_data,
                    "cosine_collapse_deviation: no usable records in window");
    return acc / static_cast<double>(n);
}

}  // namespace yawcal
