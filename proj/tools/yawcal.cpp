// Command-line front end: each subcommand reads its inputs, computes the full
// result in memory, and only then writes artifacts, so a failing run leaves
// no partial files behind.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "yawcal/config.hpp"
#include "yawcal/correction.hpp"
#include "yawcal/csv.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"
#include "yawcal/forecast.hpp"
#include "yawcal/pipeline.hpp"
#include "yawcal/preprocess.hpp"
#include "yawcal/serialize.hpp"
#include "yawcal/static_yaw.hpp"
#include "yawcal/synth.hpp"

namespace {

using namespace yawcal;
namespace fs = std::filesystem;

// 0 success, 1 validation, 2 fit failure, 3 I/O, 4 completed with warnings.
constexpr int kExitWarning = 4;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::io: return 3;
    case ErrorKind::fit_failure:
    case ErrorKind::ill_conditioned: return 2;
    default: return 1;
    }
}

RunConfig load_config(const std::string& flag) {
    if (auto path = resolve_config_path(flag)) return load_run_config(*path);
    return RunConfig{};
}

fs::path prepare_out_dir(const RunConfig& cfg, const std::string& flag) {
    fs::path dir = flag.empty() ? fs::path(cfg.output_dir) : fs::path(flag);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw Error(ErrorKind::io,
                    "cannot create output directory '" + dir.string() +
                        "': " + ec.message());
    return dir;
}

std::vector<TelemetryRecord> load_records(const fs::path& path,
                                          const CsvSchema& schema) {
    auto csv = load_telemetry_csv(path, schema);
    if (!csv.skipped.empty())
        std::fprintf(stderr, "yawcal: %s: skipped %zu malformed row(s)\n",
                     path.string().c_str(), csv.skipped.size());
    return std::move(csv.records);
}

std::string fmt(double v) { return format_double(v); }

// ---- clean ----------------------------------------------------------------

int cmd_clean(const RunConfig& cfg, const fs::path& in, const fs::path& dir) {
    auto records = load_records(in, cfg.schema);
    auto [cleaned, report] = clean_pipeline(records, cfg.turbine, cfg.clean.params);
    if (cfg.clean.average_window_s > 0.0)
        cleaned = block_average(
            cleaned, static_cast<std::int64_t>(cfg.clean.average_window_s));

    save_telemetry_csv(dir / "cleaned.csv", cleaned, cfg.schema);
    write_json_file(dir / "cleaning_report.json",
                    cleaning_report_to_json(report));

    std::printf("kept %zu of %zu rows (faults %zu, curtailment %zu, "
                "outliers %zu, region %zu)\n",
                report.output_count, report.input_count, report.removed_fault,
                report.removed_curtailment, report.removed_outlier,
                report.removed_region);
    if (cleaned.empty()) {
        std::fprintf(stderr,
                     "yawcal: warning: cleaning removed every row; "
                     "cleaned.csv is empty\n");
        return kExitWarning;
    }
    return 0;
}

// ---- synth ----------------------------------------------------------------

int cmd_synth(const RunConfig& cfg, const fs::path& dir) {
    auto data = generate_scada(cfg.synth);

    save_telemetry_csv(dir / "scada.csv", data.records, cfg.schema);
    std::vector<std::vector<std::string>> rows;
    rows.reserve(data.truth.timestamps.size());
    for (std::size_t i = 0; i < data.truth.timestamps.size(); ++i)
        rows.push_back({std::to_string(data.truth.timestamps[i]),
                        fmt(data.truth.static_yaw[i]),
                        fmt(data.truth.dynamic_yaw[i]),
                        fmt(data.truth.total_yaw[i])});
    write_csv_table(dir / "truth.csv",
                    {"timestamp", "static_yaw", "dynamic_yaw", "total_yaw"},
                    rows);
    write_json_file(dir / "synth_config.json", synth_config_to_json(cfg.synth));

    std::printf("generated %zu records (seed %llu, static yaw %s deg)\n",
                data.records.size(),
                static_cast<unsigned long long>(cfg.synth.seed),
                fmt(cfg.synth.static_yaw).c_str());
    return 0;
}

// ---- benchmark ------------------------------------------------------------

int cmd_benchmark(const RunConfig& cfg, const fs::path& dir, bool snap_alpha) {
    const auto& bm = cfg.benchmark;
    if (bm.baseline.empty())
        throw Error(ErrorKind::invalid_input,
                    "benchmark: config needs benchmark.baseline (zero-offset "
                    "cleaned CSV)");
    if (bm.cases.empty())
        throw Error(ErrorKind::invalid_input,
                    "benchmark: config needs benchmark.cases with known "
                    "static offsets");
    for (const auto& c : bm.cases)
        if (std::fabs(c.static_yaw) > 20.0)
            throw Error(ErrorKind::invalid_input,
                        "benchmark: offset " + fmt(c.static_yaw) + " deg in '" +
                            c.path + "' exceeds the 20 deg limit");
    if (bm.cases.size() < 4)
        std::fprintf(stderr,
                     "yawcal: warning: only %zu offset case(s); at least 4 "
                     "spanning both signs give a reliable exponent\n",
                     bm.cases.size());

    auto baseline = load_records(bm.baseline, cfg.schema);
    std::vector<AlphaDataset> datasets;
    for (const auto& c : bm.cases)
        datasets.push_back({load_records(c.path, cfg.schema), c.static_yaw});

    auto refined = refine_reference_curve(baseline, datasets, cfg.turbine,
                                          bm.degree, bm.max_align_deg,
                                          bm.iterations);

    auto alpha_json = exponent_to_json(refined.alpha);
    if (snap_alpha) alpha_json["alpha_snapped"] = std::round(refined.alpha.alpha);
    write_json_file(dir / "power_curve.json", curve_to_json(refined.curve));
    write_json_file(dir / "alpha.json", alpha_json);

    std::printf("alpha = %s (95%% CI [%s, %s]) from %zu case(s), "
                "%d refinement pass(es)\n",
                fmt(refined.alpha.alpha).c_str(),
                fmt(refined.alpha.ci95[0]).c_str(),
                fmt(refined.alpha.ci95[1]).c_str(),
                refined.alpha.per_case_alphas.size(), refined.iterations_run);
    if (snap_alpha)
        std::printf("alpha_snapped = %s\n",
                    fmt(std::round(refined.alpha.alpha)).c_str());
    return 0;
}

// ---- detect-static --------------------------------------------------------

int cmd_detect_static(const RunConfig& cfg, const fs::path& in,
                      const fs::path& curve_path, const fs::path& alpha_path,
                      const fs::path& dir) {
    auto records = load_records(in, cfg.schema);
    auto curve_json = read_json_file(curve_path);
    auto curve = curve_from_json(curve_json);

    auto alpha_json = read_json_file(alpha_path);
    check_envelope(alpha_json, "exponent");
    double alpha_used;
    if (cfg.static_detection.alpha_override)
        alpha_used = *cfg.static_detection.alpha_override;
    else if (alpha_json.contains("alpha_snapped"))
        alpha_used = alpha_json["alpha_snapped"].get<double>();
    else
        alpha_used = exponent_from_json(alpha_json).alpha;

    auto est = estimate_static_yaw(records, curve, alpha_used,
                                   cfg.static_detection.options);

    auto est_json = static_estimate_to_json(est);
    est_json["alpha_used"] = alpha_used;
    write_json_file(dir / "static.json", est_json);
    std::vector<std::vector<std::string>> rows;
    for (const auto& b : est.bins)
        rows.push_back({fmt(b.v_lo), fmt(b.v_hi), fmt(b.theta_hat),
                        fmt(b.objective), std::to_string(b.count),
                        b.at_boundary ? "1" : "0"});
    write_csv_table(dir / "bins.csv",
                    {"v_lo", "v_hi", "theta_hat", "objective", "count",
                     "at_boundary"},
                    rows);

    std::printf("static yaw = %s deg from %zu bin(s), %zu samples "
                "(alpha %s)\n",
                fmt(est.static_yaw).c_str(), est.bins.size(),
                est.used_samples, fmt(alpha_used).c_str());
    for (const auto& b : est.bins)
        if (b.at_boundary)
            std::fprintf(stderr,
                         "yawcal: warning: bin [%s, %s) m/s hit the search "
                         "bracket edge\n",
                         fmt(b.v_lo).c_str(), fmt(b.v_hi).c_str());
    return 0;
}

// ---- train ----------------------------------------------------------------

int cmd_train(const RunConfig& cfg, const std::vector<std::string>& inputs,
              const fs::path& dir, bool grid_flag) {
    const auto& fc = cfg.forecast;
    struct Case {
        std::string name;
        TrainTestSplit split;
    };
    // Row labels: file stems, from which collisions (four dirs all holding a
    // cleaned.csv) escalate to parent/stem and then to the full path.
    std::vector<std::string> names;
    for (const auto& path : inputs) names.push_back(fs::path(path).stem().string());
    auto has_dupes = [](const std::vector<std::string>& v) {
        std::vector<std::string> s(v);
        std::sort(s.begin(), s.end());
        return std::adjacent_find(s.begin(), s.end()) != s.end();
    };
    if (has_dupes(names))
        for (std::size_t i = 0; i < names.size(); ++i) {
            const fs::path p(inputs[i]);
            names[i] = (p.parent_path().filename() / p.stem()).string();
        }
    if (has_dupes(names))
        for (std::size_t i = 0; i < names.size(); ++i) names[i] = inputs[i];

    std::vector<Case> cases;
    std::vector<ForecastSample> pooled;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto records = load_records(inputs[i], cfg.schema);
        auto samples = build_features(records, fc.features);
        auto split = chronological_split(samples, fc.split_fraction,
                                         fc.features.step_s, fc.embargo_lags);
        pooled.insert(pooled.end(), split.train.begin(), split.train.end());
        cases.push_back({names[i], std::move(split)});
    }

    const bool run_grid = grid_flag || fc.grid_search;
    TrainConfig tuned = fc.train;
    if (run_grid) {
        // The sweep's inner split needs one chronological stream, so the
        // input files must cover increasing, non-overlapping time ranges.
        for (std::size_t i = 1; i < pooled.size(); ++i)
            if (pooled[i].timestamp <= pooled[i - 1].timestamp)
                throw Error(ErrorKind::ordering,
                            "train: pooled training data is not in "
                            "chronological order; pass the case files oldest "
                            "first or disable the grid search");
        auto grid = grid_search(pooled, fc.grid, fc.features.step_s);
        tuned = grid.best;
        for (const auto& entry : grid.table)
            std::printf("grid %-40s mae=%s\n", entry.description.c_str(),
                        fmt(entry.mae).c_str());
    }
    auto models = train_all_models(pooled, tuned);

    std::vector<std::vector<std::string>> rows;
    for (const auto& c : cases)
        for (const auto& [kind, model] : models) {
            auto pred = predict_series(model, c.split.test);
            std::vector<double> truth(c.split.test.size());
            for (std::size_t i = 0; i < truth.size(); ++i)
                truth[i] = c.split.test[i].target;
            auto m = score_forecast(pred, truth);
            rows.push_back({c.name, to_string(kind), fmt(m.mae), fmt(m.rmse),
                            std::to_string(m.count)});
        }

    write_json_file(dir / "models.json", models_to_json(models));
    write_csv_table(dir / "metrics.csv",
                    {"case", "model", "mae", "rmse", "count"}, rows);

    std::printf("trained 6 models on %zu pooled samples from %zu case(s)\n",
                pooled.size(), cases.size());
    return 0;
}

// ---- correct --------------------------------------------------------------

int cmd_correct(const RunConfig& cfg, const fs::path& in,
                const fs::path& static_path, const fs::path& models_path,
                const fs::path& dir, bool wait_flag) {
    auto records = load_records(in, cfg.schema);
    auto static_json = read_json_file(static_path);
    auto est = static_estimate_from_json(static_json);
    auto models = models_from_json(read_json_file(models_path));

    auto report = apply_correction(records, est.static_yaw, models,
                                   cfg.correct.true_static_yaw,
                                   cfg.forecast.features);
    const bool wait = wait_flag || cfg.correct.wait_overlay;
    std::optional<CorrectionReport> waited;
    if (wait)
        waited = wait_time_overlay(report, cfg.correct.wait_deadband,
                                   cfg.correct.wait_steps);

    auto summary = correction_summary_to_json(report);
    if (waited) {
        summary["wait"] = {
            {"deadband", cfg.correct.wait_deadband},
            {"steps", cfg.correct.wait_steps},
            {"models", correction_summary_to_json(*waited)["models"]}};
    }

    std::vector<std::string> header{"timestamp", "model", "dynamic_yaw_hat",
                                    "estimated_total_yaw", "corrected_nacelle"};
    if (report.has_truth) header.push_back("residual_error");
    if (waited) {
        header.push_back("estimated_total_yaw_wait");
        header.push_back("corrected_nacelle_wait");
        if (report.has_truth) header.push_back("residual_error_wait");
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t m = 0; m < report.models.size(); ++m) {
        const auto& mc = report.models[m];
        for (std::size_t i = 0; i < report.timestamps.size(); ++i) {
            std::vector<std::string> row{std::to_string(report.timestamps[i]),
                                         to_string(mc.kind),
                                         fmt(mc.dynamic_hat[i]),
                                         fmt(mc.estimated_total[i]),
                                         fmt(mc.corrected_nacelle[i])};
            if (report.has_truth) row.push_back(fmt(mc.residual_error[i]));
            if (waited) {
                const auto& wc = waited->models[m];
                row.push_back(fmt(wc.estimated_total[i]));
                row.push_back(fmt(wc.corrected_nacelle[i]));
                if (report.has_truth) row.push_back(fmt(wc.residual_error[i]));
            }
            rows.push_back(std::move(row));
        }
    }

    write_json_file(dir / "summary.json", summary);
    write_csv_table(dir / "correction.csv", header, rows);

    for (const auto& mc : report.models) {
        std::printf("%-14s forecast mae=%s rmse=%s", to_string(mc.kind).c_str(),
                    fmt(mc.dynamic_metrics.mae).c_str(),
                    fmt(mc.dynamic_metrics.rmse).c_str());
        if (mc.has_cf) std::printf(" cf=%s%%", fmt(mc.cf_ye).c_str());
        std::printf("\n");
    }
    return 0;
}

// ---- evaluate -------------------------------------------------------------

PipelineOptions pipeline_options(const RunConfig& cfg) {
    PipelineOptions opt;
    opt.seed = cfg.evaluate.seed;
    opt.records_per_case = cfg.evaluate.records_per_case;
    opt.run_grid_search = cfg.evaluate.grid_search;
    opt.wait_overlay = cfg.evaluate.wait_overlay;
    opt.wait_deadband = cfg.correct.wait_deadband;
    opt.wait_steps = cfg.correct.wait_steps;
    opt.train = cfg.forecast.train;
    opt.grid = cfg.forecast.grid;
    opt.features = cfg.forecast.features;
    opt.split_fraction = cfg.forecast.split_fraction;
    opt.embargo_lags = cfg.forecast.embargo_lags;
    opt.static_opts = cfg.static_detection.options;
    opt.curve_degree = cfg.benchmark.degree;
    opt.max_align_deg = cfg.benchmark.max_align_deg;
    opt.refine_iterations = cfg.benchmark.iterations;
    return opt;
}

int cmd_evaluate(const PipelineOptions& opt, const fs::path& dir) {
    auto result = run_evaluation(opt);
    write_evaluation_artifacts(result, dir);

    std::printf("alpha = %s (used %s), %zu train / %zu test samples\n",
                fmt(result.alpha.alpha).c_str(), fmt(result.alpha_used).c_str(),
                result.train_count, result.test_count);
    for (const auto& [kind, m] : result.pooled)
        std::printf("pooled %-14s mae=%s rmse=%s\n", to_string(kind).c_str(),
                    fmt(m.mae).c_str(), fmt(m.rmse).c_str());
    for (const auto& ce : result.cases) {
        std::printf("case %-13s static %s -> %s deg (rmae %s%%)\n",
                    ce.name.c_str(), fmt(ce.true_static_yaw).c_str(),
                    fmt(ce.static_estimate.static_yaw).c_str(),
                    fmt(ce.rmae_percent).c_str());
        for (const auto& [kind, s] : ce.scores) {
            std::printf("  %-14s mae=%s cf=%s%%", to_string(kind).c_str(),
                        fmt(s.metrics.mae).c_str(), fmt(s.cf).c_str());
            if (s.cf_wait) std::printf(" cf_wait=%s%%", fmt(*s.cf_wait).c_str());
            std::printf("\n");
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Detects and corrects wind-turbine yaw miscalibration from "
                 "SCADA telemetry"};
    app.require_subcommand(1);

    std::string config_flag, out_flag;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_flag,
                        "JSON config file (or set YAWCAL_CONFIG)");
        sub->add_option("--out-dir", out_flag, "output directory");
    };

    std::string in_flag, curve_flag, alpha_flag, static_flag, models_flag;
    std::vector<std::string> train_inputs;
    bool snap_alpha = false, grid_flag = false, wait_flag = false;
    std::uint64_t seed_flag = 0;
    int records_flag = 0, minutes_flag = 0;
    double static_yaw_flag = 0.0;

    auto* clean = app.add_subcommand(
        "clean", "filter faults, curtailment, outliers and off-region rows");
    add_common(clean);
    clean->add_option("--in", in_flag, "raw SCADA CSV")->required();

    auto* synth = app.add_subcommand(
        "synth", "generate synthetic SCADA with known misalignment");
    add_common(synth);
    auto* synth_seed = synth->add_option("--seed", seed_flag, "RNG seed");
    auto* synth_minutes =
        synth->add_option("--minutes", minutes_flag, "duration in minutes");
    auto* synth_offset = synth->add_option("--static-yaw", static_yaw_flag,
                                           "injected static offset, degrees");

    auto* bench = app.add_subcommand(
        "benchmark",
        "fit the reference curve and cosine exponent from known-offset runs");
    add_common(bench);
    bench->add_flag("--snap-alpha", snap_alpha,
                    "also report the exponent rounded to the nearest integer");

    auto* detect = app.add_subcommand(
        "detect-static", "estimate the static yaw offset of a cleaned dataset");
    add_common(detect);
    detect->add_option("--in", in_flag, "cleaned SCADA CSV")->required();
    detect->add_option("--curve", curve_flag,
                       "power curve artifact (default <out-dir>/power_curve.json)");
    detect->add_option("--alpha", alpha_flag,
                       "exponent artifact (default <out-dir>/alpha.json)");

    auto* train = app.add_subcommand(
        "train", "train one-step dynamic-yaw forecasters on cleaned datasets");
    add_common(train);
    train->add_option("inputs", train_inputs, "cleaned SCADA CSVs")
        ->required()
        ->expected(-1);
    train->add_flag("--grid-search", grid_flag,
                    "sweep hyperparameters on the leading training slice");

    auto* correct = app.add_subcommand(
        "correct", "produce corrected nacelle headings from trained models");
    add_common(correct);
    correct->add_option("--in", in_flag, "cleaned SCADA CSV")->required();
    correct->add_option("--static", static_flag,
                        "static yaw artifact (default <out-dir>/static.json)");
    correct->add_option("--models", models_flag,
                        "model set artifact (default <out-dir>/models.json)");
    correct->add_flag("--wait-time", wait_flag,
                      "overlay deadband-plus-wait controller behavior");

    auto* evaluate = app.add_subcommand(
        "evaluate", "run the synthetic benchmark end to end and score it");
    add_common(evaluate);
    auto* eval_seed = evaluate->add_option("--seed", seed_flag, "benchmark seed");
    auto* eval_records =
        evaluate->add_option("--records", records_flag, "records per case");
    auto* eval_grid_on = evaluate->add_flag(
        "--grid-search", "run the hyperparameter sweep (config default: on)");
    auto* eval_grid_off =
        evaluate->add_flag("--no-grid-search", "skip the hyperparameter sweep");
    eval_grid_on->excludes(eval_grid_off);
    evaluate->add_flag("--wait-time", wait_flag,
                       "also score with the wait-time overlay");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        RunConfig cfg = load_config(config_flag);
        const fs::path dir = prepare_out_dir(cfg, out_flag);

        if (*clean) return cmd_clean(cfg, in_flag, dir);
        if (*synth) {
            if (synth_seed->count()) cfg.synth.seed = seed_flag;
            if (synth_minutes->count()) cfg.synth.duration_minutes = minutes_flag;
            if (synth_offset->count()) cfg.synth.static_yaw = static_yaw_flag;
            validate(cfg.synth);
            return cmd_synth(cfg, dir);
        }
        if (*bench)
            return cmd_benchmark(cfg, dir, snap_alpha || cfg.benchmark.snap_alpha);
        if (*detect) {
            const fs::path curve =
                curve_flag.empty() ? dir / "power_curve.json" : fs::path(curve_flag);
            const fs::path alpha =
                alpha_flag.empty() ? dir / "alpha.json" : fs::path(alpha_flag);
            return cmd_detect_static(cfg, in_flag, curve, alpha, dir);
        }
        if (*train) return cmd_train(cfg, train_inputs, dir, grid_flag);
        if (*correct) {
            const fs::path est =
                static_flag.empty() ? dir / "static.json" : fs::path(static_flag);
            const fs::path mods =
                models_flag.empty() ? dir / "models.json" : fs::path(models_flag);
            return cmd_correct(cfg, in_flag, est, mods, dir, wait_flag);
        }
        if (*evaluate) {
            auto opt = pipeline_options(cfg);
            if (eval_seed->count()) opt.seed = seed_flag;
            if (eval_records->count()) opt.records_per_case = records_flag;
            if (eval_grid_on->count()) opt.run_grid_search = true;
            if (eval_grid_off->count()) opt.run_grid_search = false;
            if (wait_flag) opt.wait_overlay = true;
            return cmd_evaluate(opt, dir);
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "yawcal: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "yawcal: %s\n", e.what());
        return 1;
    }
    return 1;
}
