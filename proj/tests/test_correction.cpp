#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "oracles.hpp"
#include "yawcal/correction.hpp"
#include "yawcal/forecast.hpp"
#include "yawcal/synth.hpp"

using namespace yawcal;

namespace {

TelemetryRecord rec(int minute, double yaw, double nacelle = 270.0) {
    TelemetryRecord r;
    r.timestamp = static_cast<std::int64_t>(minute) * 60;
    r.nacelle_direction = nacelle;
    r.wind_direction = wrap_angle_360(nacelle + yaw);
    r.wind_speed = 8.0 + 0.01 * minute;
    r.power = 1100.0 + minute;
    r.power_limit = 3125.0;
    r.pitch_angle = 0.0;
    r.air_density = 1.22;
    return r;
}

std::vector<TelemetryRecord> run_of(std::span<const double> yaws) {
    std::vector<TelemetryRecord> out;
    for (std::size_t m = 0; m < yaws.size(); ++m)
        out.push_back(rec(static_cast<int>(m), yaws[m]));
    return out;
}

// Predicts exactly zero everywhere: zero weights on unit-scale standardization.
LinearModel zero_linear() {
    LinearModel m;
    m.norm.stddev.fill(1.0);
    return m;
}

}  // namespace

TEST_CASE("total yaw is the wrapped sum of its parts") {
    CHECK(total_yaw(10.0, -3.0) == 7.0);
    CHECK(total_yaw(0.0, 0.0) == 0.0);
    CHECK(total_yaw(-8.0, 2.5) == -5.5);
    CHECK_THAT(total_yaw(170.0, 20.0), Catch::Matchers::WithinAbs(-170.0, 1e-12));
    CHECK_THROWS_AS(total_yaw(std::nan(""), 0.0), Error);
}

TEST_CASE("correction factor matches the direct formula") {
    std::mt19937_64 gen(515);
    std::normal_distribution<double> noise(0.0, 2.0);
    std::vector<double> truth, est;
    for (int i = 0; i < 200; ++i) {
        truth.push_back(8.0 + noise(gen));
        est.push_back(truth.back() + 0.4 * noise(gen));
    }
    CHECK_THAT(correction_factor(est, truth),
               Catch::Matchers::WithinAbs(reference_cf(est, truth), 1e-12));

    // An estimate worse than doing nothing scores below zero.
    std::vector<double> wild(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) wild[i] = -3.0 * truth[i];
    CHECK(correction_factor(wild, truth) < 0.0);
}

TEST_CASE("correction factor is scale invariant") {
    std::vector<double> truth{4.0, -2.0, 7.5, 1.0, -6.0};
    std::vector<double> est{3.5, -2.5, 8.0, 0.5, -4.0};
    const double base = correction_factor(est, truth);
    for (double k : {0.1, 3.0, 1000.0}) {
        std::vector<double> te(truth), ee(est);
        for (auto& v : te) v *= k;
        for (auto& v : ee) v *= k;
        CHECK_THAT(correction_factor(ee, te), Catch::Matchers::WithinAbs(base, 1e-9));
    }
}

TEST_CASE("correction factor hits 100 exactly when estimates are exact") {
    std::vector<double> truth{4.0, -2.0, 7.5, 1.0};
    CHECK(correction_factor(truth, truth) == 100.0);
    auto est = truth;
    est[2] += 1e-6;
    CHECK(correction_factor(est, truth) < 100.0);
    // All-zero estimates leave the misalignment untouched: zero improvement.
    std::vector<double> zeros(truth.size(), 0.0);
    CHECK(correction_factor(zeros, truth) == 0.0);
}

TEST_CASE("correction factor rejects degenerate input") {
    std::vector<double> a{1.0, 2.0}, b{1.0};
    CHECK_THROWS_AS(correction_factor(a, b), Error);
    std::vector<double> empty;
    CHECK_THROWS_AS(correction_factor(empty, empty), Error);
    std::vector<double> zeros{0.0, 0.0}, est{0.1, 0.2};
    try {
        correction_factor(est, zeros);
        FAIL("expected undefined_metric");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::undefined_metric);
    }
    std::vector<double> nan{1.0, std::nan("")};
    CHECK_THROWS_AS(correction_factor(nan, a), Error);
}

TEST_CASE("zero model with zero static estimate leaves the turbine uncorrected") {
    std::vector<double> yaws{2.0, -1.0, 0.5, 3.0, -2.0, 1.0,
                             4.0, -0.5, 2.5, -3.0, 1.5, 0.0};
    auto records = run_of(yaws);
    std::map<ModelKind, ForecastModel> models;
    models.emplace(ModelKind::linear, zero_linear());
    auto report = apply_correction(records, 0.0, models, 4.0);

    REQUIRE(report.timestamps.size() == yaws.size() - 6);  // positions 5..10
    REQUIRE(report.models.size() == 1);
    const auto& mc = report.models[0];
    for (std::size_t i = 0; i < report.timestamps.size(); ++i) {
        CHECK(mc.dynamic_hat[i] == 0.0);
        CHECK_THAT(mc.corrected_nacelle[i],
                   Catch::Matchers::WithinAbs(report.measured_nacelle[i], 1e-12));
        // Unmoved nacelle keeps the full true misalignment as residual.
        CHECK_THAT(mc.residual_error[i],
                   Catch::Matchers::WithinAbs(report.true_total[i], 1e-12));
    }
    REQUIRE(mc.has_cf);
    CHECK(mc.cf_ye == 0.0);
}

TEST_CASE("residual equals the wrapped gap between true and estimated totals") {
    std::vector<double> yaws{2.0, -1.0, 0.5, 3.0, -2.0, 1.0,
                             4.0, -0.5, 2.5, -3.0, 1.5, 0.0, -1.5, 2.0};
    auto records = run_of(yaws);
    std::map<ModelKind, ForecastModel> models;
    models.emplace(ModelKind::persistence, PersistenceModel{});
    auto report = apply_correction(records, 2.5, models, 4.0);
    const auto& mc = report.models[0];
    REQUIRE(report.has_truth);
    for (std::size_t i = 0; i < report.timestamps.size(); ++i) {
        const double expected =
            angle_difference(report.true_total[i], mc.estimated_total[i]);
        CHECK_THAT(mc.residual_error[i],
                   Catch::Matchers::WithinAbs(expected, 1e-9));
        CHECK_THAT(mc.corrected_nacelle[i],
                   Catch::Matchers::WithinAbs(
                       wrap_angle_360(report.measured_nacelle[i] +
                                      mc.dynamic_hat[i] + report.static_hat),
                       1e-9));
    }
}

TEST_CASE("persistence report scores against a hand-built reference") {
    std::vector<double> yaws{2.0, -1.0, 0.5, 3.0, -2.0, 1.0,
                             4.0, -0.5, 2.5, -3.0, 1.5, 0.0};
    auto records = run_of(yaws);
    std::map<ModelKind, ForecastModel> models;
    models.emplace(ModelKind::persistence, PersistenceModel{});
    const double static_truth = 10.0;
    auto report = apply_correction(records, static_truth, models, static_truth);

    // Rows cover minutes 6..11; persistence forecasts yaw(j) for yaw(j+1).
    std::vector<double> est, truth;
    for (std::size_t j = 5; j + 1 < yaws.size(); ++j) {
        est.push_back(static_truth + yaws[j]);
        truth.push_back(static_truth + yaws[j + 1]);
    }
    const auto& mc = report.models[0];
    REQUIRE(mc.estimated_total.size() == est.size());
    for (std::size_t i = 0; i < est.size(); ++i) {
        CHECK_THAT(mc.estimated_total[i], Catch::Matchers::WithinAbs(est[i], 1e-12));
        CHECK_THAT(report.true_total[i], Catch::Matchers::WithinAbs(truth[i], 1e-12));
        CHECK(report.timestamps[i] == static_cast<std::int64_t>(6 + i) * 60);
    }
    CHECK_THAT(mc.cf_ye,
               Catch::Matchers::WithinAbs(reference_cf(est, truth), 1e-12));
}

TEST_CASE("report without a known static offset carries no scores") {
    std::vector<double> yaws(20, 1.0);
    for (std::size_t i = 0; i < yaws.size(); ++i) yaws[i] += 0.1 * double(i % 3);
    auto records = run_of(yaws);
    std::map<ModelKind, ForecastModel> models;
    models.emplace(ModelKind::persistence, PersistenceModel{});
    auto report = apply_correction(records, 1.5, models);
    CHECK_FALSE(report.has_truth);
    CHECK(report.real_wind_direction.empty());
    CHECK(report.true_total.empty());
    REQUIRE(report.models.size() == 1);
    CHECK_FALSE(report.models[0].has_cf);
    CHECK(report.models[0].residual_error.empty());
    CHECK(report.models[0].corrected_nacelle.size() == report.timestamps.size());
}

TEST_CASE("exact static estimate ties the score ranking to forecast accuracy") {
    SynthConfig cfg;
    cfg.seed = 808;
    cfg.duration_minutes = 700;
    cfg.static_yaw = 6.0;
    cfg.faults.starts_per_hour = 0.0;
    cfg.curtailment.starts_per_hour = 0.0;
    auto data = generate_scada(cfg);

    auto samples = build_features(data.records, {});
    auto split = chronological_split(samples);
    std::map<ModelKind, ForecastModel> models;
    models.emplace(ModelKind::linear, train_linear(split.train, {}));
    ForestOptions fo;
    fo.n_trees = 60;
    models.emplace(ModelKind::forest, train_forest(split.train, fo));
    models.emplace(ModelKind::persistence, PersistenceModel{});
    models.emplace(ModelKind::persistence10, Persistence10Model{});

    auto report = apply_correction(data.records, cfg.static_yaw, models,
                                   cfg.static_yaw);
    REQUIRE(report.models.size() == 4);
    for (const auto& mc : report.models) {
        REQUIRE(mc.has_cf);
        // With the static part exact, the score is a fixed monotone map of the
        // forecast error, so recomputing it from the predictions must agree.
        std::vector<double> est, truth;
        for (std::size_t i = 0; i < mc.dynamic_hat.size(); ++i) {
            est.push_back(cfg.static_yaw + mc.dynamic_hat[i]);
            truth.push_back(report.true_total[i]);
        }
        CHECK_THAT(mc.cf_ye,
                   Catch::Matchers::WithinAbs(reference_cf(est, truth), 1e-9));
    }
    auto by_cf = report.models;
    std::sort(by_cf.begin(), by_cf.end(),
              [](const auto& a, const auto& b) { return a.cf_ye > b.cf_ye; });
    for (std::size_t i = 1; i < by_cf.size(); ++i)
        CHECK(by_cf[i - 1].dynamic_metrics.rmse <=
              by_cf[i].dynamic_metrics.rmse + 1e-12);
}

TEST_CASE("wait overlay with zero wait or deadband changes nothing") {
    std::vector<double> yaws{2.0, -1.0, 0.5, 3.0, -2.0, 1.0,
                             4.0, -0.5, 2.5, -3.0, 1.5, 0.0};
    auto records = run_of(yaws);
    std::map<ModelKind, ForecastModel> models;
    models.emplace(ModelKind::persistence, PersistenceModel{});
    auto report = apply_correction(records, 2.0, models, 4.0);
    for (auto overlaid : {wait_time_overlay(report, 6.0, 0),
                          wait_time_overlay(report, 0.0, 5)}) {
        const auto& a = report.models[0];
        const auto& b = overlaid.models[0];
        CHECK(a.estimated_total == b.estimated_total);
        CHECK(a.corrected_nacelle == b.corrected_nacelle);
        CHECK(a.residual_error == b.residual_error);
        CHECK(a.cf_ye == b.cf_ye);
    }
    CHECK_THROWS_AS(wait_time_overlay(report, -1.0, 5), Error);
    CHECK_THROWS_AS(wait_time_overlay(report, 6.0, -1), Error);
}

TEST_CASE("wait overlay holds the applied offset until demand persists") {
    CorrectionReport report;
    report.static_hat = 0.0;
    report.timestamps = {60, 120, 180, 240, 300, 360, 420};
    report.measured_wind.assign(7, 100.0);
    report.measured_nacelle.assign(7, 100.0);
    ModelCorrection mc;
    mc.kind = ModelKind::persistence;
    mc.estimated_total = {0.0, 3.0, 3.0, 3.0, 1.0, 5.0, 5.0};
    mc.dynamic_hat = mc.estimated_total;
    mc.corrected_nacelle.assign(7, 0.0);
    report.models.push_back(mc);

    auto out = wait_time_overlay(report, 2.0, 2);
    const std::vector<double> applied{0.0, 0.0, 3.0, 3.0, 3.0, 5.0, 5.0};
    REQUIRE(out.models[0].estimated_total == applied);
    for (std::size_t i = 0; i < applied.size(); ++i)
        CHECK(out.models[0].corrected_nacelle[i] ==
              wrap_angle_360(100.0 + applied[i]));
}

TEST_CASE("waiting never improves the correction score") {
    SynthConfig cfg;
    cfg.seed = 909;
    cfg.duration_minutes = 600;
    cfg.static_yaw = 8.0;
    cfg.faults.starts_per_hour = 0.0;
    cfg.curtailment.starts_per_hour = 0.0;
    auto data = generate_scada(cfg);
    std::map<ModelKind, ForecastModel> models;
    models.emplace(ModelKind::persistence, PersistenceModel{});
    models.emplace(ModelKind::persistence10, Persistence10Model{});
    auto report = apply_correction(data.records, cfg.static_yaw, models,
                                   cfg.static_yaw);
    auto waited = wait_time_overlay(report, 6.0, 5);
    REQUIRE(waited.models.size() == report.models.size());
    for (std::size_t m = 0; m < report.models.size(); ++m)
        CHECK(waited.models[m].cf_ye <= report.models[m].cf_ye + 1e-9);
}

TEST_CASE("apply correction validates its input") {
    std::vector<double> yaws(12, 1.0);
    auto records = run_of(yaws);
    std::map<ModelKind, ForecastModel> models;
    CHECK_THROWS_AS(apply_correction(records, 0.0, models), Error);  // no models
    models.emplace(ModelKind::persistence, PersistenceModel{});
    CHECK_THROWS_AS(
        apply_correction(records, std::numeric_limits<double>::infinity(), models),
        Error);
    std::vector<TelemetryRecord> tiny(records.begin(), records.begin() + 4);
    CHECK_THROWS_AS(apply_correction(tiny, 0.0, models), Error);
}
