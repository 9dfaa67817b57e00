#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "yawcal/features.hpp"

using namespace yawcal;

namespace {

// Minute `m` with a chosen misalignment; other channels get distinct values so
// tests can check which record each feature came from.
TelemetryRecord rec(int m, double yaw, std::int64_t step = 60) {
    TelemetryRecord r;
    r.timestamp = step * m;
    r.nacelle_direction = 270.0;
    r.wind_direction = wrap_angle_360(270.0 + yaw);
    r.wind_speed = 8.0 + 0.01 * m;
    r.power = 1000.0 + m;
    r.power_limit = 3000.0;
    r.pitch_angle = 0.4;
    r.air_density = 1.225;
    r.fault_code = 0;
    return r;
}

std::vector<TelemetryRecord> run_of(int length, int start_minute = 0) {
    std::vector<TelemetryRecord> records;
    for (int j = 0; j < length; ++j)
        records.push_back(rec(start_minute + j, start_minute + j));
    return records;
}

}  // namespace

TEST_CASE("seven consecutive minutes yield exactly one sample") {
    auto records = run_of(7);  // misalignment j at minute j
    auto samples = build_features(records);
    REQUIRE(samples.size() == 1);
    const auto& s = samples[0];
    CHECK(s.timestamp == 5 * 60);
    CHECK(s.features.yaw_lag(0) == Catch::Approx(5.0));
    CHECK(s.features.yaw_lag(1) == Catch::Approx(4.0));
    CHECK(s.features.yaw_lag(2) == Catch::Approx(3.0));
    CHECK(s.features.yaw_lag(3) == Catch::Approx(2.0));
    CHECK(s.features.yaw_lag(4) == Catch::Approx(1.0));
    CHECK(s.features.power() == Catch::Approx(1005.0));
    CHECK(s.features.wind_speed() == Catch::Approx(8.05));
    CHECK(s.features.wind_direction() == Catch::Approx(275.0));
    CHECK(s.target == Catch::Approx(6.0));
    REQUIRE(s.history.size() == 5);
    CHECK(s.history[0] == Catch::Approx(4.0));
    CHECK(s.history[4] == Catch::Approx(0.0));
}

TEST_CASE("six consecutive minutes yield nothing") {
    CHECK(build_features(run_of(6)).empty());
}

TEST_CASE("a run of length L yields max(0, L-6) samples") {
    for (int length = 1; length <= 30; ++length) {
        auto samples = build_features(run_of(length));
        CHECK(samples.size() ==
              static_cast<std::size_t>(std::max(0, length - 6)));
    }
}

TEST_CASE("two separated runs contribute independently") {
    auto records = run_of(7);
    auto second = run_of(7, 20);  // 13-minute hole
    records.insert(records.end(), second.begin(), second.end());
    auto samples = build_features(records);
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].timestamp == 5 * 60);
    CHECK(samples[1].timestamp == 25 * 60);
}

TEST_CASE("history is capped at ten lags and limited to the run") {
    auto samples = build_features(run_of(20));
    REQUIRE(samples.size() == 14);
    // First sample sits at position 5: only five earlier minutes exist.
    CHECK(samples[0].history.size() == 5);
    // Position 12 has twelve predecessors, capped at ten.
    const auto& deep = samples[7];
    CHECK(deep.timestamp == 12 * 60);
    REQUIRE(deep.history.size() == 10);
    CHECK(deep.history.front() == Catch::Approx(11.0));
    CHECK(deep.history.back() == Catch::Approx(2.0));
}

TEST_CASE("an out-of-range misalignment breaks the run and is dropped") {
    std::vector<TelemetryRecord> records;
    for (int j = 0; j < 15; ++j) records.push_back(rec(j, j == 7 ? 120.0 : 1.0));
    auto samples = build_features(records);
    // Runs of 7 and 7 around the bad minute: one sample each.
    REQUIRE(samples.size() == 2);
    CHECK(samples[0].timestamp == 5 * 60);
    CHECK(samples[1].timestamp == 13 * 60);
}

TEST_CASE("misalignment of exactly 90 degrees is kept") {
    std::vector<TelemetryRecord> records;
    for (int j = 0; j < 7; ++j) records.push_back(rec(j, 90.0));
    CHECK(build_features(records).size() == 1);
    records.clear();
    for (int j = 0; j < 7; ++j) records.push_back(rec(j, 90.5));
    CHECK(build_features(records).empty());
}

TEST_CASE("build_features honors a non-default step") {
    std::vector<TelemetryRecord> records;
    for (int j = 0; j < 9; ++j) records.push_back(rec(j, j, 30));
    FeatureOptions opt;
    opt.step_s = 30;
    CHECK(build_features(records, opt).size() == 3);
    CHECK(build_features(records).empty());  // 60 s steps see only gaps
}

TEST_CASE("build_features rejects unsorted input and bad options") {
    auto records = run_of(7);
    std::swap(records[2], records[3]);
    CHECK_THROWS_AS(build_features(records), Error);
    FeatureOptions bad;
    bad.step_s = 0;
    CHECK_THROWS_AS(build_features(run_of(7), bad), Error);
    bad = {};
    bad.max_abs_yaw = 0.0;
    CHECK_THROWS_AS(build_features(run_of(7), bad), Error);
}

namespace {

std::vector<ForecastSample> contiguous_samples(int n, std::int64_t t0 = 0) {
    std::vector<ForecastSample> samples(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        samples[static_cast<std::size_t>(i)].timestamp = t0 + 60LL * i;
        samples[static_cast<std::size_t>(i)].target = i;
    }
    return samples;
}

}  // namespace

TEST_CASE("chronological split embargoes the cut boundary") {
    auto samples = contiguous_samples(100);
    auto split = chronological_split(samples, 0.8, 60, 5);
    CHECK(split.train.size() == 80);
    CHECK(split.embargoed == 5);
    CHECK(split.test.size() == 15);
    CHECK(split.train.back().timestamp == 79 * 60);
    CHECK(split.test.front().timestamp == 85 * 60);
}

TEST_CASE("no test feature window touches a training target") {
    auto samples = contiguous_samples(200);
    auto split = chronological_split(samples, 0.7, 60, 5);
    const std::int64_t last_train_target = split.train.back().timestamp + 60;
    for (const auto& s : split.test)
        for (int lag = 0; lag <= 4; ++lag)
            CHECK(s.timestamp - 60 * lag > last_train_target);
}

TEST_CASE("zero embargo keeps every candidate test sample") {
    auto samples = contiguous_samples(50);
    auto split = chronological_split(samples, 0.8, 60, 0);
    CHECK(split.embargoed == 0);
    CHECK(split.train.size() + split.test.size() == samples.size());
}

TEST_CASE("chronological split validates input") {
    auto samples = contiguous_samples(40);
    CHECK_THROWS_AS(chronological_split(samples, 0.0), Error);
    CHECK_THROWS_AS(chronological_split(samples, 1.0), Error);
    CHECK_THROWS_AS(chronological_split(samples, 0.8, 60, -1), Error);
    auto shuffled = samples;
    std::swap(shuffled[5], shuffled[6]);
    CHECK_THROWS_AS(chronological_split(shuffled, 0.8), Error);
    // Everything past the cut falls inside the embargo horizon.
    CHECK_THROWS_AS(chronological_split(contiguous_samples(6), 0.8, 60, 5), Error);
    CHECK_THROWS_AS(
        chronological_split(std::vector<ForecastSample>{samples[0]}, 0.8), Error);
}

TEST_CASE("normalization standardizes the training block") {
    auto samples = contiguous_samples(60);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            samples[i].features.values[k] =
                100.0 * static_cast<double>(k + 1) +
                static_cast<double>(i) * (k % 2 ? 1.0 : -2.0);
        samples[i].features.values[3] = 42.0;  // constant channel
    }
    auto norm = Normalization::fit(samples);
    CHECK(norm.mean[3] == Catch::Approx(42.0));
    CHECK(norm.stddev[3] == 1.0);  // floored, maps the channel to zero
    std::array<double, kFeatureCount> mean{}, var{};
    for (const auto& s : samples) {
        auto z = norm.apply(s.features);
        for (std::size_t k = 0; k < kFeatureCount; ++k) {
            mean[k] += z[k];
            var[k] += z[k] * z[k];
        }
    }
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        mean[k] /= static_cast<double>(samples.size());
        var[k] /= static_cast<double>(samples.size());
        CHECK(mean[k] == Catch::Approx(0.0).margin(1e-9));
        if (k != 3) CHECK(var[k] == Catch::Approx(1.0).epsilon(1e-9));
        else CHECK(var[k] == Catch::Approx(0.0).margin(1e-12));
    }
    CHECK_THROWS_AS(Normalization::fit(std::vector<ForecastSample>{}), Error);
}
