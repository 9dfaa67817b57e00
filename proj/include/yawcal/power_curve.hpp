#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "yawcal/errors.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

// Polynomial wind-to-power reference at standard air density. Coefficients
// live in the affinely scaled variable u = (2v - (v_min + v_max)) / span to
// keep the high-degree Vandermonde tame.
struct PowerCurve {
    std::vector<double> coefficients;  // c0 + c1 u + ... in ascending order
    double v_min = 0.0;
    double v_max = 0.0;
    double rated_power = 0.0;
    double standard_density = 1.225;
    double residual_rms = 0.0;

    int degree() const { return static_cast<int>(coefficients.size()) - 1; }

    // Expected power (kW) at standard density. Queries outside the fit range
    // are refused rather than extrapolated.
    double evaluate(double wind_speed) const {
        if (coefficients.empty())
            throw Error(ErrorKind::invalid_input, "power curve has no coefficients");
        if (!std::isfinite(wind_speed))
            throw Error(ErrorKind::invalid_input, "power curve: non-finite speed");
        const double span = v_max - v_min;
        const double eps = 1e-9 * std::max(1.0, span);
        if (wind_speed < v_min - eps || wind_speed > v_max + eps)
            throw Error(ErrorKind::out_of_range,
                        "wind speed " + std::to_string(wind_speed) +
                            " outside fitted range [" + std::to_string(v_min) +
                            ", " + std::to_string(v_max) + "]");
        const double u = (2.0 * wind_speed - (v_min + v_max)) / span;
        double acc = 0.0;
        for (std::size_t i = coefficients.size(); i-- > 0;)
            acc = acc * u + coefficients[i];
        return acc;
    }
};

// Density-corrected reference power: the curve value scaled by rho / rho_std.
inline double reference_power(const PowerCurve& curve, double wind_speed,
                              double air_density) {
    if (!(air_density > 0.0) || !std::isfinite(air_density))
        throw Error(ErrorKind::invalid_input, "reference_power: bad air density");
    return curve.evaluate(wind_speed) * (air_density / curve.standard_density);
}

// Records suitable for reference-curve fitting: vane misalignment within
// +-max_abs_dynamic_yaw degrees.
inline std::vector<TelemetryRecord> select_aligned_records(
    std::span<const TelemetryRecord> records, double max_abs_dynamic_yaw = 3.0) {
    std::vector<TelemetryRecord> out;
    for (const auto& r : records)
        if (std::fabs(dynamic_yaw(r)) <= max_abs_dynamic_yaw) out.push_back(r);
    return out;
}

// Least-squares polynomial fit of density-normalized power against speed.
// Powers are referred to standard density (P * rho_std / rho) before fitting.
// The fitted curve must stay physically plausible on its own domain
// (no excursions below -2% or above 120% of rated power).
inline PowerCurve fit_power_curve(std::span<const TelemetryRecord> records,
                                  const TurbineConfig& turbine, int degree = 9) {
    validate(turbine);
    if (degree < 1 || degree > 20)
        throw Error(ErrorKind::invalid_input, "fit_power_curve: degree out of range");
    const std::size_t n = records.size();
    const std::size_t n_coef = static_cast<std::size_t>(degree) + 1;
    if (n < n_coef)
        throw Error(ErrorKind::insufficient_data,
                    "fit_power_curve: " + std::to_string(n) + " records for " +
                        std::to_string(n_coef) + " coefficients");

    std::set<double> distinct;
    double v_min = records[0].wind_speed, v_max = records[0].wind_speed;
    for (const auto& r : records) {
        validate(r);
        distinct.insert(r.wind_speed);
        v_min = std::min(v_min, r.wind_speed);
        v_max = std::max(v_max, r.wind_speed);
    }
    if (distinct.size() < n_coef)
        throw Error(ErrorKind::ill_conditioned,
                    "fit_power_curve: only " + std::to_string(distinct.size()) +
                        " distinct wind speeds for " + std::to_string(n_coef) +
                        " coefficients");

    const double span = v_max - v_min;
    Eigen::MatrixXd a(n, n_coef);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = (2.0 * records[i].wind_speed - (v_min + v_max)) / span;
        double p = 1.0;
        for (std::size_t j = 0; j < n_coef; ++j) {
            a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p;
            p *= u;
        }
        y(static_cast<Eigen::Index>(i)) =
            records[i].power * (turbine.standard_density / records[i].air_density);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < static_cast<Eigen::Index>(n_coef))
        throw Error(ErrorKind::ill_conditioned,
                    "fit_power_curve: rank-deficient design matrix");
    Eigen::VectorXd c = qr.solve(y);

    PowerCurve curve;
    curve.coefficients.assign(c.data(), c.data() + c.size());
    curve.v_min = v_min;
    curve.v_max = v_max;
    curve.rated_power = turbine.rated_power;
    curve.standard_density = turbine.standard_density;
    curve.residual_rms = std::sqrt((a * c - y).squaredNorm() / static_cast<double>(n));

    for (int k = 0; k <= 256; ++k) {
        const double v = v_min + span * (static_cast<double>(k) / 256.0);
        const double p = curve.evaluate(v);
        if (p < -0.02 * turbine.rated_power || p > 1.2 * turbine.rated_power)
            throw Error(ErrorKind::ill_conditioned,
                        "fit_power_curve: unphysical curve value " +
                            std::to_string(p) + " kW at " + std::to_string(v) +
                            " m/s");
    }
    return curve;
}

// Records whose wind speed lies inside the curve's fitted domain.
inline std::vector<TelemetryRecord> filter_to_curve_domain(
    std::span<const TelemetryRecord> records, const PowerCurve& curve) {
    std::vector<TelemetryRecord> out;
    for (const auto& r : records)
        if (r.wind_speed >= curve.v_min && r.wind_speed <= curve.v_max)
            out.push_back(r);
    return out;
}

// Classical binned power curve: mean speed and mean normalized power per
// fixed-width speed bin anchored at multiples of the width.
struct SpeedBin {
    double v_lo = 0.0;
    double v_hi = 0.0;
    double mean_speed = 0.0;
    double mean_power = 0.0;
    std::size_t count = 0;
};

inline std::vector<SpeedBin> bin_averaged_curve(
    std::span<const TelemetryRecord> records, double standard_density,
    double bin_width = 0.5, std::size_t min_count = 1) {
    if (!(bin_width > 0.0))
        throw Error(ErrorKind::invalid_input, "bin_averaged_curve: bad bin width");
    std::map<long long, SpeedBin> bins;
    for (const auto& r : records) {
        const long long k = static_cast<long long>(std::floor(r.wind_speed / bin_width));
        auto& b = bins[k];
        if (b.count == 0) {
            b.v_lo = static_cast<double>(k) * bin_width;
            b.v_hi = b.v_lo + bin_width;
        }
        b.mean_speed += r.wind_speed;
        b.mean_power += r.power * (standard_density / r.air_density);
        ++b.count;
    }
    std::vector<SpeedBin> out;
    for (auto& [k, b] : bins) {
        if (b.count < min_count) continue;
        b.mean_speed /= static_cast<double>(b.count);
        b.mean_power /= static_cast<double>(b.count);
        out.push_back(b);
    }
    return out;
}

}  // namespace yawcal
