#pragma once

#include <cstdlib>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "yawcal/csv.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"
#include "yawcal/forecast.hpp"
#include "yawcal/preprocess.hpp"
#include "yawcal/serialize.hpp"
#include "yawcal/static_yaw.hpp"
#include "yawcal/synth.hpp"
#include "yawcal/types.hpp"

namespace yawcal {

struct CleanSection {
    CleaningParams params;
    double average_window_s = 0.0;  // 0 keeps the input rate
};

struct BenchmarkDatasetRef {
    std::string path;            // cleaned CSV
    double static_yaw = 0.0;     // the offset intentionally applied
};

struct BenchmarkSection {
    std::string baseline;        // zero-offset cleaned CSV for curve fitting
    std::vector<BenchmarkDatasetRef> cases;
    int degree = 9;
    double max_align_deg = 3.0;
    int iterations = 6;
    bool snap_alpha = false;     // additionally report round(alpha)
};

struct StaticSection {
    StaticYawOptions options;
    std::optional<double> alpha_override;  // wins over any alpha artifact
};

struct ForecastSection {
    TrainConfig train;
    FeatureOptions features;
    double split_fraction = 0.8;
    int embargo_lags = 5;
    bool grid_search = false;
    GridSearchSpec grid;
};

struct CorrectSection {
    bool wait_overlay = false;
    double wait_deadband = 6.0;
    int wait_steps = 5;
    std::optional<double> true_static_yaw;  // enables scoring when known
};

struct EvaluateSection {
    std::uint64_t seed = 1;
    int records_per_case = 4500;
    bool grid_search = true;
    bool wait_overlay = false;
};

// One JSON document with a section per subcommand. CLI flags override fields
// parsed here; unknown keys anywhere are rejected.
struct RunConfig {
    TurbineConfig turbine;
    CsvSchema schema;
    std::string output_dir = ".";
    CleanSection clean;
    BenchmarkSection benchmark;
    StaticSection static_detection;
    ForecastSection forecast;
    CorrectSection correct;
    SynthConfig synth;
    EvaluateSection evaluate;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw Error(ErrorKind::schema, where + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) { known = true; break; }
        if (!known)
            throw Error(ErrorKind::schema,
                        where + ": unknown key \"" + item.key() + "\"");
    }
}

template <typename T>
void opt(const nlohmann::json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse,
                    std::string("bad config value for \"") + key + "\": " +
                        e.what());
    }
}

inline void parse_turbine(const nlohmann::json& j, TurbineConfig& t) {
    check_keys(j, "turbine",
               {"cut_in_speed", "rated_speed", "cut_out_speed", "rated_power",
                "standard_density", "region2_low", "region2_high"});
    opt(j, "cut_in_speed", t.cut_in_speed);
    opt(j, "rated_speed", t.rated_speed);
    opt(j, "cut_out_speed", t.cut_out_speed);
    opt(j, "rated_power", t.rated_power);
    opt(j, "standard_density", t.standard_density);
    opt(j, "region2_low", t.region2_low);
    opt(j, "region2_high", t.region2_high);
}

inline void parse_io(const nlohmann::json& j, RunConfig& cfg) {
    check_keys(j, "io", {"columns", "timestamp_format", "strict", "output_dir"});
    if (auto it = j.find("columns"); it != j.end()) {
        check_keys(*it, "io.columns",
                   {"timestamp", "wind_speed", "wind_direction",
                    "nacelle_direction", "power", "power_limit", "pitch_angle",
                    "air_density", "fault_code"});
        for (const auto& item : it->items()) {
            if (!item.value().is_string())
                throw Error(ErrorKind::parse,
                            "io.columns." + item.key() + ": expected a string");
            cfg.schema.columns[item.key()] = item.value().get<std::string>();
        }
    }
    std::string fmt;
    opt(j, "timestamp_format", fmt);
    if (!fmt.empty()) {
        if (fmt == "epoch_seconds")
            cfg.schema.timestamp_format = TimestampFormat::epoch_seconds;
        else if (fmt == "iso8601")
            cfg.schema.timestamp_format = TimestampFormat::iso8601;
        else
            throw Error(ErrorKind::parse, "io: unknown timestamp_format " + fmt);
    }
    opt(j, "strict", cfg.schema.strict);
    opt(j, "output_dir", cfg.output_dir);
}

inline void parse_clean(const nlohmann::json& j, CleanSection& s) {
    check_keys(j, "clean",
               {"curtailment_threshold", "max_pitch", "iqr_multiplier",
                "min_records_for_iqr", "average_window_s"});
    opt(j, "curtailment_threshold", s.params.curtailment_threshold);
    opt(j, "max_pitch", s.params.max_pitch);
    opt(j, "iqr_multiplier", s.params.iqr_multiplier);
    opt(j, "min_records_for_iqr", s.params.min_records_for_iqr);
    opt(j, "average_window_s", s.average_window_s);
}

inline void parse_benchmark(const nlohmann::json& j, BenchmarkSection& s) {
    check_keys(j, "benchmark",
               {"baseline", "cases", "degree", "max_align_deg", "iterations",
                "snap_alpha"});
    opt(j, "baseline", s.baseline);
    if (auto it = j.find("cases"); it != j.end()) {
        if (!it->is_array())
            throw Error(ErrorKind::schema, "benchmark.cases: expected an array");
        for (const auto& c : *it) {
            check_keys(c, "benchmark.cases[]", {"path", "static_yaw"});
            BenchmarkDatasetRef ref;
            ref.path = field<std::string>(c, "path");
            ref.static_yaw = field<double>(c, "static_yaw");
            s.cases.push_back(std::move(ref));
        }
    }
    opt(j, "degree", s.degree);
    opt(j, "max_align_deg", s.max_align_deg);
    opt(j, "iterations", s.iterations);
    opt(j, "snap_alpha", s.snap_alpha);
}

inline void parse_static(const nlohmann::json& j, StaticSection& s) {
    check_keys(j, "static",
               {"bin_width", "min_bin_count", "theta_min", "theta_max", "tol",
                "max_iter", "smooth_window_s", "speed_range", "alpha_override"});
    opt(j, "bin_width", s.options.bin_width);
    opt(j, "min_bin_count", s.options.min_bin_count);
    opt(j, "theta_min", s.options.theta_min);
    opt(j, "theta_max", s.options.theta_max);
    opt(j, "tol", s.options.tol);
    opt(j, "max_iter", s.options.max_iter);
    opt(j, "smooth_window_s", s.options.smooth_window_s);
    if (auto it = j.find("speed_range"); it != j.end()) {
        std::array<double, 2> range{};
        try {
            range = it->get<std::array<double, 2>>();
        } catch (const nlohmann::json::exception&) {
            throw Error(ErrorKind::parse,
                        "static.speed_range: expected [v_lo, v_hi]");
        }
        s.options.speed_range = std::make_pair(range[0], range[1]);
    }
    if (j.contains("alpha_override"))
        s.alpha_override = field<double>(j, "alpha_override");
}

inline void parse_forecast(const nlohmann::json& j, ForecastSection& s) {
    check_keys(j, "forecast",
               {"ridge", "svr", "forest", "features", "split_fraction",
                "embargo_lags", "grid_search", "grid"});
    if (auto it = j.find("ridge"); it != j.end()) {
        check_keys(*it, "forecast.ridge", {"lambda", "grad_tol", "max_iter"});
        opt(*it, "lambda", s.train.ridge.lambda);
        opt(*it, "grad_tol", s.train.ridge.grad_tol);
        opt(*it, "max_iter", s.train.ridge.max_iter);
    }
    if (auto it = j.find("svr"); it != j.end()) {
        check_keys(*it, "forecast.svr",
                   {"epsilon", "c", "kkt_tol", "max_iter_factor"});
        opt(*it, "epsilon", s.train.svr.epsilon);
        opt(*it, "c", s.train.svr.c);
        opt(*it, "kkt_tol", s.train.svr.kkt_tol);
        opt(*it, "max_iter_factor", s.train.svr.max_iter_factor);
    }
    if (auto it = j.find("forest"); it != j.end()) {
        check_keys(*it, "forecast.forest",
                   {"n_trees", "min_samples", "rule", "max_features", "seed"});
        opt(*it, "n_trees", s.train.forest.n_trees);
        opt(*it, "min_samples", s.train.forest.min_samples);
        if (it->contains("rule"))
            s.train.forest.rule =
                split_rule_from_string(field<std::string>(*it, "rule"));
        opt(*it, "max_features", s.train.forest.max_features);
        opt(*it, "seed", s.train.forest.seed);
    }
    if (auto it = j.find("features"); it != j.end()) {
        check_keys(*it, "forecast.features",
                   {"step_seconds", "max_abs_yaw", "max_history"});
        opt(*it, "step_seconds", s.features.step_s);
        opt(*it, "max_abs_yaw", s.features.max_abs_yaw);
        opt(*it, "max_history", s.features.max_history);
    }
    opt(j, "split_fraction", s.split_fraction);
    opt(j, "embargo_lags", s.embargo_lags);
    opt(j, "grid_search", s.grid_search);
    if (auto it = j.find("grid"); it != j.end()) {
        check_keys(*it, "forecast.grid",
                   {"lambdas", "epsilons", "costs", "tree_counts", "leaf_floors",
                    "subset_fraction", "inner_fraction"});
        opt(*it, "lambdas", s.grid.lambdas);
        opt(*it, "epsilons", s.grid.epsilons);
        opt(*it, "costs", s.grid.costs);
        opt(*it, "tree_counts", s.grid.tree_counts);
        opt(*it, "leaf_floors", s.grid.leaf_floors);
        opt(*it, "subset_fraction", s.grid.subset_fraction);
        opt(*it, "inner_fraction", s.grid.inner_fraction);
    }
}

inline void parse_correct(const nlohmann::json& j, CorrectSection& s) {
    check_keys(j, "correct",
               {"wait_overlay", "wait_deadband", "wait_steps",
                "true_static_yaw"});
    opt(j, "wait_overlay", s.wait_overlay);
    opt(j, "wait_deadband", s.wait_deadband);
    opt(j, "wait_steps", s.wait_steps);
    if (j.contains("true_static_yaw"))
        s.true_static_yaw = field<double>(j, "true_static_yaw");
}

inline void parse_ar1(const nlohmann::json& j, const std::string& where,
                      Ar1Process& p) {
    check_keys(j, where, {"mean", "persistence", "noise_std"});
    opt(j, "mean", p.mean);
    opt(j, "persistence", p.persistence);
    opt(j, "noise_std", p.noise_std);
}

inline void parse_episodes(const nlohmann::json& j, const std::string& where,
                           EpisodeModel& e) {
    check_keys(j, where, {"starts_per_hour", "min_len", "max_len"});
    opt(j, "starts_per_hour", e.starts_per_hour);
    opt(j, "min_len", e.min_len);
    opt(j, "max_len", e.max_len);
}

inline void parse_synth(const nlohmann::json& j, SynthConfig& c) {
    check_keys(j, "synth",
               {"seed", "duration_minutes", "start_time", "static_yaw", "alpha",
                "turbine", "wind", "direction", "vane_noise_std", "density_mean",
                "density_std", "power_noise_std", "controller", "faults",
                "curtailment", "normal_limit_fraction",
                "curtailed_limit_fraction", "curtailed_band"});
    opt(j, "seed", c.seed);
    opt(j, "duration_minutes", c.duration_minutes);
    opt(j, "start_time", c.start_time);
    opt(j, "static_yaw", c.static_yaw);
    opt(j, "alpha", c.alpha);
    if (auto it = j.find("turbine"); it != j.end()) parse_turbine(*it, c.turbine);
    if (auto it = j.find("wind"); it != j.end())
        parse_ar1(*it, "synth.wind", c.wind);
    if (auto it = j.find("direction"); it != j.end())
        parse_ar1(*it, "synth.direction", c.direction);
    opt(j, "vane_noise_std", c.vane_noise_std);
    opt(j, "density_mean", c.density_mean);
    opt(j, "density_std", c.density_std);
    opt(j, "power_noise_std", c.power_noise_std);
    if (auto it = j.find("controller"); it != j.end()) {
        check_keys(*it, "synth.controller",
                   {"deadband", "wait_steps", "rate_deg_per_s"});
        opt(*it, "deadband", c.controller.deadband);
        opt(*it, "wait_steps", c.controller.wait_steps);
        opt(*it, "rate_deg_per_s", c.controller.rate_deg_per_s);
    }
    if (auto it = j.find("faults"); it != j.end())
        parse_episodes(*it, "synth.faults", c.faults);
    if (auto it = j.find("curtailment"); it != j.end())
        parse_episodes(*it, "synth.curtailment", c.curtailment);
    opt(j, "normal_limit_fraction", c.normal_limit_fraction);
    opt(j, "curtailed_limit_fraction", c.curtailed_limit_fraction);
    opt(j, "curtailed_band", c.curtailed_band);
}

inline void parse_evaluate(const nlohmann::json& j, EvaluateSection& s) {
    check_keys(j, "evaluate",
               {"seed", "records_per_case", "grid_search", "wait_overlay"});
    opt(j, "seed", s.seed);
    opt(j, "records_per_case", s.records_per_case);
    opt(j, "grid_search", s.grid_search);
    opt(j, "wait_overlay", s.wait_overlay);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail::check_keys(j, "config",
                       {"turbine", "io", "clean", "benchmark", "static",
                        "forecast", "correct", "synth", "evaluate"});
    RunConfig cfg;
    if (auto it = j.find("turbine"); it != j.end())
        detail::parse_turbine(*it, cfg.turbine);
    if (auto it = j.find("io"); it != j.end()) detail::parse_io(*it, cfg);
    if (auto it = j.find("clean"); it != j.end())
        detail::parse_clean(*it, cfg.clean);
    if (auto it = j.find("benchmark"); it != j.end())
        detail::parse_benchmark(*it, cfg.benchmark);
    if (auto it = j.find("static"); it != j.end())
        detail::parse_static(*it, cfg.static_detection);
    if (auto it = j.find("forecast"); it != j.end())
        detail::parse_forecast(*it, cfg.forecast);
    if (auto it = j.find("correct"); it != j.end())
        detail::parse_correct(*it, cfg.correct);
    // The synthesizer rides the shared turbine unless its section overrides it.
    cfg.synth.turbine = cfg.turbine;
    if (auto it = j.find("synth"); it != j.end())
        detail::parse_synth(*it, cfg.synth);
    if (auto it = j.find("evaluate"); it != j.end())
        detail::parse_evaluate(*it, cfg.evaluate);

    validate(cfg.turbine);
    validate(cfg.synth);
    if (!(cfg.forecast.split_fraction > 0.0 && cfg.forecast.split_fraction < 1.0))
        throw Error(ErrorKind::invalid_input,
                    "config: forecast.split_fraction must be in (0, 1)");
    if (cfg.forecast.embargo_lags < 0)
        throw Error(ErrorKind::invalid_input,
                    "config: forecast.embargo_lags must be >= 0");
    if (cfg.correct.wait_deadband < 0.0 || cfg.correct.wait_steps < 0)
        throw Error(ErrorKind::invalid_input,
                    "config: correct wait settings must be non-negative");
    if (cfg.evaluate.records_per_case < 60)
        throw Error(ErrorKind::invalid_input,
                    "config: evaluate.records_per_case too small");
    return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_json_file(path));
}

// Precedence: explicit --config flag, then YAWCAL_CONFIG, then built-in
// defaults (empty result).
inline std::optional<std::filesystem::path> resolve_config_path(
    const std::string& flag_value) {
    if (!flag_value.empty()) return std::filesystem::path(flag_value);
    if (const char* env = std::getenv("YAWCAL_CONFIG"); env && *env)
        return std::filesystem::path(env);
    return std::nullopt;
}

}  // namespace yawcal
