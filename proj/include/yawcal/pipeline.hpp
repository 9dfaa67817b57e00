#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "yawcal/config.hpp"
#include "yawcal/correction.hpp"
#include "yawcal/csv.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"
#include "yawcal/forecast.hpp"
#include "yawcal/serialize.hpp"
#include "yawcal/static_yaw.hpp"
#include "yawcal/synth.hpp"

namespace yawcal {

// Knobs for the end-to-end benchmark evaluation. Defaults mirror the study
// design: four modeling offsets train the forecasters, two more probe
// transferability, and hyperparameters are tuned on the leading tenth of the
// pooled training window.
struct PipelineOptions {
    std::uint64_t seed = 1;
    int records_per_case = 4500;
    bool run_grid_search = true;
    bool wait_overlay = false;
    double wait_deadband = 6.0;
    int wait_steps = 5;
    TrainConfig train;
    GridSearchSpec grid;
    FeatureOptions features;
    double split_fraction = 0.8;
    int embargo_lags = 5;
    StaticYawOptions static_opts;
    int curve_degree = 9;
    double max_align_deg = 3.0;
    int refine_iterations = 6;
};

struct ModelScore {
    ForecastMetrics metrics;   // dynamic-yaw forecast on the held-out window
    double cf = 0.0;           // total-misalignment correction factor
    std::optional<double> cf_wait;
};

struct CaseEvaluation {
    std::string name;
    std::string purpose;
    double true_static_yaw = 0.0;
    StaticYawEstimate static_estimate;
    double static_error = 0.0;   // estimate - truth
    double rmae_percent = 0.0;   // |static_error| / |truth| * 100
    std::map<ModelKind, ModelScore> scores;
    CorrectionReport correction;             // held-out rows only
    std::optional<CorrectionReport> waited;
};

struct EvaluationResult {
    PipelineOptions options;
    BenchmarkSuite suite;
    PowerCurve curve;
    ExponentEstimate alpha;
    double alpha_used = 0.0;
    std::optional<GridSearchResult> grid;
    TrainConfig tuned;
    std::map<ModelKind, ForecastModel> models;
    std::vector<CaseEvaluation> cases;
    std::map<ModelKind, ForecastMetrics> pooled;  // modeling cases' test pool
    std::size_t train_count = 0;
    std::size_t test_count = 0;
};

namespace detail {

// Restricts a report to rows at or after `min_row_time`, rescoring against the
// surviving truth rows. Keeps correction evaluation strictly on the held-out
// window while the features behind each row still use full history.
inline CorrectionReport trim_report(const CorrectionReport& report,
                                    std::int64_t min_row_time) {
    auto lo = std::lower_bound(report.timestamps.begin(),
                               report.timestamps.end(), min_row_time);
    const auto start = static_cast<std::size_t>(lo - report.timestamps.begin());
    if (start == report.timestamps.size())
        throw Error(ErrorKind::insufficient_data,
                    "trim_report: no rows in the held-out window");
    auto tail = [start](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(start),
                                   v.end());
    };
    CorrectionReport out;
    out.static_hat = report.static_hat;
    out.step_s = report.step_s;
    out.has_truth = report.has_truth;
    out.true_static_yaw = report.true_static_yaw;
    out.timestamps.assign(report.timestamps.begin() +
                              static_cast<std::ptrdiff_t>(start),
                          report.timestamps.end());
    out.measured_wind = tail(report.measured_wind);
    out.measured_nacelle = tail(report.measured_nacelle);
    if (report.has_truth) {
        out.real_wind_direction = tail(report.real_wind_direction);
        out.true_total = tail(report.true_total);
    }
    for (const auto& mc : report.models) {
        ModelCorrection m;
        m.kind = mc.kind;
        m.dynamic_hat = tail(mc.dynamic_hat);
        m.estimated_total = tail(mc.estimated_total);
        m.corrected_nacelle = tail(mc.corrected_nacelle);
        if (report.has_truth) {
            m.residual_error = tail(mc.residual_error);
            m.cf_ye = correction_factor(m.estimated_total, out.true_total);
            m.has_cf = true;
        }
        std::vector<double> measured_next(out.timestamps.size());
        for (std::size_t i = 0; i < measured_next.size(); ++i)
            measured_next[i] =
                wrap_angle(out.measured_wind[i] - out.measured_nacelle[i]);
        m.dynamic_metrics = score_forecast(m.dynamic_hat, measured_next);
        out.models.push_back(std::move(m));
    }
    return out;
}

}  // namespace detail

inline EvaluationResult run_evaluation(const PipelineOptions& opt) {
    EvaluationResult result;
    result.options = opt;

    BenchmarkOptions bopts;
    bopts.records_per_case = opt.records_per_case;
    // Cleaning drops roughly a fifth of raw minutes; the generator grows the
    // duration on its own when a draw falls short.
    bopts.initial_duration = opt.records_per_case * 13 / 10 + 100;
    result.suite = standard_benchmark(opt.seed, bopts);
    const auto& suite = result.suite;

    // Reference curve and exponent from the known-offset modeling cases.
    std::vector<AlphaDataset> alpha_sets;
    for (const auto& bc : suite.cases)
        if (bc.purpose == "modeling")
            alpha_sets.push_back({bc.records, bc.true_static_yaw});
    auto refined = refine_reference_curve(
        suite.baseline.records, alpha_sets, suite.baseline.config.turbine,
        opt.curve_degree, opt.max_align_deg, opt.refine_iterations);
    result.curve = refined.curve;
    result.alpha = refined.alpha;
    result.alpha_used = refined.alpha.alpha;

    // Per-case features and chronological splits; modeling cases pool their
    // training windows.
    std::vector<ForecastSample> train_pool;
    std::vector<std::vector<ForecastSample>> case_tests(suite.cases.size());
    for (std::size_t c = 0; c < suite.cases.size(); ++c) {
        auto samples = build_features(suite.cases[c].records, opt.features);
        auto split = chronological_split(samples, opt.split_fraction,
                                         opt.features.step_s, opt.embargo_lags);
        if (suite.cases[c].purpose == "modeling")
            train_pool.insert(train_pool.end(), split.train.begin(),
                              split.train.end());
        case_tests[c] = std::move(split.test);
    }
    result.train_count = train_pool.size();

    result.tuned = opt.train;
    if (opt.run_grid_search) {
        result.grid = grid_search(train_pool, opt.grid, opt.features.step_s);
        result.tuned = result.grid->best;
    }
    result.models = train_all_models(train_pool, result.tuned);

    // Pooled held-out metrics over the modeling cases.
    std::vector<ForecastSample> test_pool;
    for (std::size_t c = 0; c < suite.cases.size(); ++c)
        if (suite.cases[c].purpose == "modeling")
            test_pool.insert(test_pool.end(), case_tests[c].begin(),
                             case_tests[c].end());
    result.test_count = test_pool.size();
    std::vector<double> pool_truth(test_pool.size());
    for (std::size_t i = 0; i < test_pool.size(); ++i)
        pool_truth[i] = test_pool[i].target;
    for (const auto& [kind, model] : result.models)
        result.pooled[kind] =
            score_forecast(predict_series(model, test_pool), pool_truth);

    for (std::size_t c = 0; c < suite.cases.size(); ++c) {
        const auto& bc = suite.cases[c];
        CaseEvaluation ce;
        ce.name = bc.name;
        ce.purpose = bc.purpose;
        ce.true_static_yaw = bc.true_static_yaw;
        ce.static_estimate = estimate_static_yaw(bc.records, result.curve,
                                                 result.alpha_used,
                                                 opt.static_opts);
        ce.static_error = ce.static_estimate.static_yaw - bc.true_static_yaw;
        ce.rmae_percent =
            std::fabs(ce.static_error) / std::fabs(bc.true_static_yaw) * 100.0;

        const auto& tests = case_tests[c];
        if (tests.empty())
            throw Error(ErrorKind::insufficient_data,
                        "run_evaluation: case " + bc.name + " has no test window");
        std::vector<double> truth(tests.size());
        for (std::size_t i = 0; i < tests.size(); ++i) truth[i] = tests[i].target;
        for (const auto& [kind, model] : result.models) {
            ModelScore score;
            score.metrics =
                score_forecast(predict_series(model, tests), truth);
            ce.scores.emplace(kind, score);
        }

        // Corrections run over the case stream but are scored on rows strictly
        // inside the held-out window.
        auto full = apply_correction(bc.records,
                                     ce.static_estimate.static_yaw,
                                     result.models, bc.true_static_yaw,
                                     opt.features);
        const std::int64_t first_row =
            tests.front().timestamp + opt.features.step_s;
        ce.correction = detail::trim_report(full, first_row);
        for (const auto& mc : ce.correction.models)
            ce.scores.at(mc.kind).cf = mc.cf_ye;
        if (opt.wait_overlay) {
            ce.waited = wait_time_overlay(ce.correction, opt.wait_deadband,
                                          opt.wait_steps);
            for (const auto& mc : ce.waited->models)
                ce.scores.at(mc.kind).cf_wait = mc.cf_ye;
        }
        result.cases.push_back(std::move(ce));
    }
    return result;
}

// Serializes an evaluation into its artifact files. Shared by the CLI and the
// determinism checks, which byte-compare two output trees.
inline void write_evaluation_artifacts(const EvaluationResult& r,
                                       const std::filesystem::path& dir) {
    write_json_file(dir / "power_curve.json", curve_to_json(r.curve));
    write_json_file(dir / "alpha.json", exponent_to_json(r.alpha));
    write_json_file(dir / "models.json", models_to_json(r.models));

    std::vector<std::vector<std::string>> static_rows;
    for (const auto& ce : r.cases)
        static_rows.push_back({ce.name, ce.purpose,
                               format_double(ce.true_static_yaw),
                               format_double(ce.static_estimate.static_yaw),
                               format_double(ce.static_error),
                               format_double(ce.rmae_percent),
                               std::to_string(ce.static_estimate.used_samples)});
    write_csv_table(dir / "static.csv",
                    {"case", "purpose", "true_static_yaw", "estimate", "error",
                     "rmae_percent", "used_samples"},
                    static_rows);

    std::vector<std::vector<std::string>> metric_rows;
    auto row = [&](const std::string& name, const std::string& model,
                   const ForecastMetrics& m, const std::string& cf,
                   const std::string& cf_wait) {
        metric_rows.push_back({name, model, format_double(m.mae),
                               format_double(m.rmse), std::to_string(m.count),
                               cf, cf_wait});
    };
    for (const auto& ce : r.cases)
        for (const auto& [kind, score] : ce.scores)
            row(ce.name, to_string(kind), score.metrics,
                format_double(score.cf),
                score.cf_wait ? format_double(*score.cf_wait) : "");
    for (const auto& [kind, m] : r.pooled)
        row("pooled_modeling", to_string(kind), m, "", "");
    write_csv_table(dir / "metrics.csv",
                    {"case", "model", "mae", "rmse", "count", "cf", "cf_wait"},
                    metric_rows);

    auto j = make_envelope("evaluation");
    j["seed"] = r.options.seed;
    j["records_per_case"] = r.options.records_per_case;
    j["grid_search"] = r.options.run_grid_search;
    j["alpha"] = r.alpha.alpha;
    j["alpha_used"] = r.alpha_used;
    j["train_count"] = r.train_count;
    j["test_count"] = r.test_count;
    j["tuned"] = {{"ridge_lambda", r.tuned.ridge.lambda},
                  {"svr_epsilon", r.tuned.svr.epsilon},
                  {"svr_c", r.tuned.svr.c},
                  {"forest_trees", r.tuned.forest.n_trees},
                  {"forest_min_samples", r.tuned.forest.min_samples}};
    if (r.grid) {
        auto& table = j["grid_table"] = nlohmann::json::array();
        for (const auto& e : r.grid->table)
            table.push_back({{"candidate", e.description}, {"mae", e.mae}});
    }
    auto& cases = j["cases"] = nlohmann::json::array();
    for (const auto& ce : r.cases) {
        nlohmann::json cj{{"name", ce.name},
                          {"purpose", ce.purpose},
                          {"true_static_yaw", ce.true_static_yaw},
                          {"static_estimate", ce.static_estimate.static_yaw},
                          {"static_error", ce.static_error},
                          {"rmae_percent", ce.rmae_percent}};
        auto& models = cj["models"] = nlohmann::json::array();
        for (const auto& [kind, score] : ce.scores) {
            nlohmann::json mj{{"model", to_string(kind)},
                              {"mae", score.metrics.mae},
                              {"rmse", score.metrics.rmse},
                              {"cf", score.cf}};
            if (score.cf_wait) mj["cf_wait"] = *score.cf_wait;
            models.push_back(std::move(mj));
        }
        cases.push_back(std::move(cj));
    }
    auto& pooled = j["pooled"] = nlohmann::json::array();
    for (const auto& [kind, m] : r.pooled)
        pooled.push_back({{"model", to_string(kind)},
                          {"mae", m.mae},
                          {"rmse", m.rmse},
                          {"count", m.count}});
    write_json_file(dir / "evaluation.json", j);
}

}  // namespace yawcal
