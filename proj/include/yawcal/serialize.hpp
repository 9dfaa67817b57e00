#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "yawcal/correction.hpp"
#include "yawcal/csv.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/forecast.hpp"
#include "yawcal/power_curve.hpp"
#include "yawcal/preprocess.hpp"
#include "yawcal/static_yaw.hpp"
#include "yawcal/synth.hpp"

namespace yawcal {

inline constexpr int kFormatVersion = 1;

namespace detail {

inline const nlohmann::json& need(const nlohmann::json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end())
        throw Error(ErrorKind::schema, std::string("missing JSON key: ") + key);
    return *it;
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
    try {
        return need(j, key).get<T>();
    } catch (const Error&) {
        throw;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::parse,
                    std::string("bad JSON value for \"") + key + "\": " + e.what());
    }
}

}  // namespace detail

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorKind::io, "cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out)
        throw Error(ErrorKind::io, "cannot write " + path.string());
    // Streaming keeps the serializer from building a second full copy of a
    // large document in memory.
    out << std::setw(2) << j << '\n';
    if (!out)
        throw Error(ErrorKind::io, "short write to " + path.string());
}

// Every top-level artifact carries its format version and a kind tag so a
// reader can reject a file produced for a different purpose.
inline nlohmann::json make_envelope(const char* artifact) {
    nlohmann::json j;
    j["format_version"] = kFormatVersion;
    j["artifact"] = artifact;
    return j;
}

inline void check_envelope(const nlohmann::json& j, const char* artifact) {
    if (!j.is_object())
        throw Error(ErrorKind::schema, "expected a JSON object");
    const int version = detail::field<int>(j, "format_version");
    if (version != kFormatVersion)
        throw Error(ErrorKind::schema,
                    "unsupported format_version " + std::to_string(version));
    const auto kind = detail::field<std::string>(j, "artifact");
    if (kind != artifact)
        throw Error(ErrorKind::schema,
                    "expected artifact \"" + std::string(artifact) +
                        "\", found \"" + kind + "\"");
}

// ---- power curve ----

inline nlohmann::json curve_to_json(const PowerCurve& c) {
    auto j = make_envelope("power_curve");
    j["coefficients"] = c.coefficients;
    j["v_min"] = c.v_min;
    j["v_max"] = c.v_max;
    j["rated_power"] = c.rated_power;
    j["standard_density"] = c.standard_density;
    j["residual_rms"] = c.residual_rms;
    return j;
}

inline PowerCurve curve_from_json(const nlohmann::json& j) {
    check_envelope(j, "power_curve");
    PowerCurve c;
    c.coefficients = detail::field<std::vector<double>>(j, "coefficients");
    c.v_min = detail::field<double>(j, "v_min");
    c.v_max = detail::field<double>(j, "v_max");
    c.rated_power = detail::field<double>(j, "rated_power");
    c.standard_density = detail::field<double>(j, "standard_density");
    c.residual_rms = detail::field<double>(j, "residual_rms");
    if (c.coefficients.empty() || !(c.v_min < c.v_max))
        throw Error(ErrorKind::schema, "power_curve: degenerate curve data");
    return c;
}

// ---- cleaning report ----

inline nlohmann::json cleaning_report_to_json(const CleaningReport& r) {
    auto j = make_envelope("cleaning_report");
    j["input_count"] = r.input_count;
    j["removed_fault"] = r.removed_fault;
    j["removed_curtailment"] = r.removed_curtailment;
    j["removed_outlier"] = r.removed_outlier;
    j["removed_region"] = r.removed_region;
    j["output_count"] = r.output_count;
    return j;
}

// ---- exponent estimate ----

inline nlohmann::json exponent_to_json(const ExponentEstimate& e) {
    auto j = make_envelope("exponent");
    j["alpha"] = e.alpha;
    j["ci95"] = e.ci95;
    j["per_case_alphas"] = e.per_case_alphas;
    j["objective_value"] = e.objective_value;
    auto& cases = j["cases"] = nlohmann::json::array();
    for (const auto& c : e.cases) {
        cases.push_back({{"known_static_yaw", c.known_static_yaw},
                         {"alpha", c.alpha},
                         {"objective", c.objective},
                         {"sample_count", c.sample_count},
                         {"identifiable", c.identifiable}});
    }
    return j;
}

inline ExponentEstimate exponent_from_json(const nlohmann::json& j) {
    check_envelope(j, "exponent");
    ExponentEstimate e;
    e.alpha = detail::field<double>(j, "alpha");
    e.ci95 = detail::field<std::array<double, 2>>(j, "ci95");
    e.per_case_alphas = detail::field<std::vector<double>>(j, "per_case_alphas");
    e.objective_value = detail::field<double>(j, "objective_value");
    for (const auto& c : detail::need(j, "cases")) {
        AlphaCaseResult r;
        r.known_static_yaw = detail::field<double>(c, "known_static_yaw");
        r.alpha = detail::field<double>(c, "alpha");
        r.objective = detail::field<double>(c, "objective");
        r.sample_count = detail::field<std::size_t>(c, "sample_count");
        r.identifiable = detail::field<bool>(c, "identifiable");
        e.cases.push_back(r);
    }
    return e;
}

// ---- static yaw estimate ----

inline nlohmann::json static_estimate_to_json(const StaticYawEstimate& e) {
    auto j = make_envelope("static_yaw");
    j["static_yaw"] = e.static_yaw;
    j["used_samples"] = e.used_samples;
    auto& bins = j["bins"] = nlohmann::json::array();
    for (const auto& b : e.bins) {
        bins.push_back({{"v_lo", b.v_lo},
                        {"v_hi", b.v_hi},
                        {"theta_hat", b.theta_hat},
                        {"objective", b.objective},
                        {"count", b.count},
                        {"at_boundary", b.at_boundary}});
    }
    return j;
}

inline StaticYawEstimate static_estimate_from_json(const nlohmann::json& j) {
    check_envelope(j, "static_yaw");
    StaticYawEstimate e;
    e.static_yaw = detail::field<double>(j, "static_yaw");
    e.used_samples = detail::field<std::size_t>(j, "used_samples");
    for (const auto& b : detail::need(j, "bins")) {
        BinEstimate be;
        be.v_lo = detail::field<double>(b, "v_lo");
        be.v_hi = detail::field<double>(b, "v_hi");
        be.theta_hat = detail::field<double>(b, "theta_hat");
        be.objective = detail::field<double>(b, "objective");
        be.count = detail::field<std::size_t>(b, "count");
        be.at_boundary = detail::field<bool>(b, "at_boundary");
        e.bins.push_back(be);
    }
    return e;
}

// ---- forecast models ----

inline const char* to_string(SplitRule r) {
    return r == SplitRule::node_size ? "node_size" : "leaf_size";
}

inline SplitRule split_rule_from_string(const std::string& s) {
    if (s == "node_size") return SplitRule::node_size;
    if (s == "leaf_size") return SplitRule::leaf_size;
    throw Error(ErrorKind::parse, "unknown split rule: " + s);
}

namespace detail {

inline nlohmann::json norm_to_json(const Normalization& n) {
    return {{"mean", n.mean}, {"stddev", n.stddev}};
}

inline Normalization norm_from_json(const nlohmann::json& j) {
    Normalization n;
    n.mean = field<std::array<double, kFeatureCount>>(j, "mean");
    n.stddev = field<std::array<double, kFeatureCount>>(j, "stddev");
    for (double sd : n.stddev)
        if (!(sd > 0.0))
            throw Error(ErrorKind::schema,
                        "normalization: stddev entries must be positive");
    return n;
}

inline nlohmann::json linear_to_json(const LinearModel& m) {
    return {{"kind", to_string(ModelKind::linear)},
            {"beta", m.beta},
            {"bias", m.bias},
            {"normalization", norm_to_json(m.norm)},
            {"lambda", m.lambda},
            {"iterations", m.iterations}};
}

inline LinearModel linear_from_json(const nlohmann::json& j) {
    LinearModel m;
    m.beta = field<std::array<double, kFeatureCount>>(j, "beta");
    m.bias = field<double>(j, "bias");
    m.norm = norm_from_json(need(j, "normalization"));
    m.lambda = field<double>(j, "lambda");
    m.iterations = field<int>(j, "iterations");
    return m;
}

inline nlohmann::json svr_to_json(const SvrModel& m) {
    return {{"kind", to_string(ModelKind::svr)},
            {"support", m.support},
            {"coeff", m.coeff},
            {"bias", m.bias},
            {"normalization", norm_to_json(m.norm)},
            {"options",
             {{"epsilon", m.options.epsilon},
              {"c", m.options.c},
              {"kkt_tol", m.options.kkt_tol},
              {"max_iter_factor", m.options.max_iter_factor}}},
            {"diag",
             {{"iterations", m.diag.iterations},
              {"gap", m.diag.gap},
              {"dual_objective", m.diag.dual_objective},
              {"support_count", m.diag.support_count}}}};
}

inline SvrModel svr_from_json(const nlohmann::json& j) {
    SvrModel m;
    m.support = field<std::vector<std::array<double, kFeatureCount>>>(j, "support");
    m.coeff = field<std::vector<double>>(j, "coeff");
    m.bias = field<double>(j, "bias");
    m.norm = norm_from_json(need(j, "normalization"));
    const auto& opt = need(j, "options");
    m.options.epsilon = field<double>(opt, "epsilon");
    m.options.c = field<double>(opt, "c");
    m.options.kkt_tol = field<double>(opt, "kkt_tol");
    m.options.max_iter_factor = field<double>(opt, "max_iter_factor");
    const auto& diag = need(j, "diag");
    m.diag.iterations = field<std::size_t>(diag, "iterations");
    m.diag.gap = field<double>(diag, "gap");
    m.diag.dual_objective = field<double>(diag, "dual_objective");
    m.diag.support_count = field<std::size_t>(diag, "support_count");
    if (m.support.size() != m.coeff.size())
        throw Error(ErrorKind::schema,
                    "svr model: support and coeff lengths differ");
    return m;
}

// Trees are stored as arrays of [feature, threshold, left, right, value,
// count] tuples; -1 child indices mark absent branches.
// Each tree packs into one string, ";"-joined nodes of
// "feature,threshold,left,right,value,count". A JSON value per node costs
// roughly 30x the node's own memory, which at hundreds of trees on tens of
// thousands of samples is the difference between writing the artifact and
// getting killed by the OOM reaper. Doubles use the shortest round-trip
// form, so reloading is bit-exact.
inline nlohmann::json forest_to_json(const ForestModel& m) {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : *m.trees) {
        std::string packed;
        packed.reserve(tree.size() * 40);
        for (const auto& n : tree) {
            if (!packed.empty()) packed += ';';
            packed += std::to_string(n.feature);
            packed += ',';
            packed += format_double(n.threshold);
            packed += ',';
            packed += std::to_string(n.left);
            packed += ',';
            packed += std::to_string(n.right);
            packed += ',';
            packed += format_double(n.value);
            packed += ',';
            packed += std::to_string(n.count);
        }
        trees.push_back(std::move(packed));
    }
    return {{"kind", to_string(ModelKind::forest)},
            {"options",
             {{"n_trees", m.options.n_trees},
              {"min_samples", m.options.min_samples},
              {"rule", to_string(m.options.rule)},
              {"max_features", m.options.max_features},
              {"seed", m.options.seed}}},
            {"trees", std::move(trees)}};
}

inline TreeNode parse_tree_node(std::string_view s) {
    std::array<std::string_view, 6> part;
    std::size_t start = 0, idx = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == ',') {
            if (idx >= part.size())
                throw Error(ErrorKind::schema, "forest: node needs 6 fields");
            part[idx++] = s.substr(start, i - start);
            start = i + 1;
        }
    }
    if (idx != part.size())
        throw Error(ErrorKind::schema, "forest: node needs 6 fields");
    TreeNode n;
    n.feature = static_cast<std::int32_t>(parse_int(part[0]));
    n.threshold = parse_double(part[1]);
    n.left = static_cast<std::int32_t>(parse_int(part[2]));
    n.right = static_cast<std::int32_t>(parse_int(part[3]));
    n.value = parse_double(part[4]);
    n.count = static_cast<std::int32_t>(parse_int(part[5]));
    return n;
}

inline ForestModel forest_from_json(const nlohmann::json& j) {
    ForestModel m;
    const auto& opt = need(j, "options");
    m.options.n_trees = field<int>(opt, "n_trees");
    m.options.min_samples = field<int>(opt, "min_samples");
    m.options.rule = split_rule_from_string(field<std::string>(opt, "rule"));
    m.options.max_features = field<int>(opt, "max_features");
    m.options.seed = field<std::uint64_t>(opt, "seed");
    auto trees = std::make_shared<std::vector<std::vector<TreeNode>>>();
    for (const auto& t : need(j, "trees")) {
        if (!t.is_string())
            throw Error(ErrorKind::schema, "forest: tree must be a packed string");
        const auto& packed = t.get_ref<const std::string&>();
        std::vector<TreeNode> tree;
        std::size_t start = 0;
        while (start <= packed.size() && !packed.empty()) {
            const auto end = packed.find(';', start);
            const auto len =
                (end == std::string::npos ? packed.size() : end) - start;
            tree.push_back(
                parse_tree_node(std::string_view(packed).substr(start, len)));
            if (end == std::string::npos) break;
            start = end + 1;
        }
        const auto size = static_cast<std::int64_t>(tree.size());
        for (const auto& node : tree)
            if (node.feature >= static_cast<std::int32_t>(kFeatureCount) ||
                node.left >= size || node.right >= size)
                throw Error(ErrorKind::schema, "forest: node index out of range");
        if (tree.empty())
            throw Error(ErrorKind::schema, "forest: empty tree");
        trees->push_back(std::move(tree));
    }
    if (trees->empty())
        throw Error(ErrorKind::schema, "forest: no trees");
    m.trees = std::move(trees);
    return m;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ForecastModel& model);

namespace detail {

inline nlohmann::json hybrid_to_json(const HybridModel& m) {
    return {{"kind", to_string(ModelKind::hybrid)},
            {"linear", linear_to_json(m.linear)},
            {"svr", svr_to_json(m.svr)},
            {"forest", forest_to_json(m.forest)}};
}

}  // namespace detail

inline nlohmann::json model_to_json(const ForecastModel& model) {
    return std::visit(
        [](const auto& m) -> nlohmann::json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>)
                return detail::linear_to_json(m);
            else if constexpr (std::is_same_v<T, SvrModel>)
                return detail::svr_to_json(m);
            else if constexpr (std::is_same_v<T, ForestModel>)
                return detail::forest_to_json(m);
            else if constexpr (std::is_same_v<T, HybridModel>)
                return detail::hybrid_to_json(m);
            else if constexpr (std::is_same_v<T, Persistence10Model>)
                return {{"kind", to_string(ModelKind::persistence10)},
                        {"window", m.window}};
            else
                return {{"kind", to_string(ModelKind::persistence)}};
        },
        model);
}

inline ForecastModel model_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw Error(ErrorKind::schema, "model: expected a JSON object");
    switch (model_kind_from_string(detail::field<std::string>(j, "kind"))) {
    case ModelKind::linear:
        return detail::linear_from_json(j);
    case ModelKind::svr:
        return detail::svr_from_json(j);
    case ModelKind::forest:
        return detail::forest_from_json(j);
    case ModelKind::hybrid: {
        HybridModel m;
        m.linear = detail::linear_from_json(detail::need(j, "linear"));
        m.svr = detail::svr_from_json(detail::need(j, "svr"));
        m.forest = detail::forest_from_json(detail::need(j, "forest"));
        return m;
    }
    case ModelKind::persistence10: {
        Persistence10Model m;
        m.window = detail::field<std::size_t>(j, "window");
        if (m.window < 1)
            throw Error(ErrorKind::schema, "persistence10: window must be >= 1");
        return m;
    }
    case ModelKind::persistence:
        return PersistenceModel{};
    }
    throw Error(ErrorKind::schema, "model: unreachable kind");
}

inline nlohmann::json models_to_json(
    const std::map<ModelKind, ForecastModel>& models) {
    auto j = make_envelope("model_set");
    auto& m = j["models"] = nlohmann::json::object();
    for (const auto& [kind, model] : models)
        m[to_string(kind)] = model_to_json(model);
    return j;
}

inline std::map<ModelKind, ForecastModel> models_from_json(
    const nlohmann::json& j) {
    check_envelope(j, "model_set");
    std::map<ModelKind, ForecastModel> out;
    for (const auto& [key, value] : detail::need(j, "models").items()) {
        const ModelKind kind = model_kind_from_string(key);
        auto model = model_from_json(value);
        if (kind_of(model) != kind)
            throw Error(ErrorKind::schema,
                        "model_set: entry \"" + key + "\" holds a different kind");
        out.emplace(kind, std::move(model));
    }
    if (out.empty())
        throw Error(ErrorKind::schema, "model_set: no models");
    return out;
}

// ---- correction summary ----

inline nlohmann::json correction_summary_to_json(const CorrectionReport& r) {
    auto j = make_envelope("correction_summary");
    j["static_estimate"] = r.static_hat;
    j["step_seconds"] = r.step_s;
    j["rows"] = r.timestamps.size();
    j["has_truth"] = r.has_truth;
    if (r.has_truth) j["true_static_yaw"] = r.true_static_yaw;
    auto& models = j["models"] = nlohmann::json::array();
    for (const auto& mc : r.models) {
        nlohmann::json m{{"model", to_string(mc.kind)},
                         {"mae", mc.dynamic_metrics.mae},
                         {"rmse", mc.dynamic_metrics.rmse}};
        if (mc.has_cf) m["cf"] = mc.cf_ye;
        models.push_back(std::move(m));
    }
    return j;
}

// ---- synthesizer provenance ----

inline nlohmann::json synth_config_to_json(const SynthConfig& c) {
    auto ar = [](const Ar1Process& p) {
        return nlohmann::json{{"mean", p.mean},
                              {"persistence", p.persistence},
                              {"noise_std", p.noise_std}};
    };
    auto episodes = [](const EpisodeModel& e) {
        return nlohmann::json{{"starts_per_hour", e.starts_per_hour},
                              {"min_len", e.min_len},
                              {"max_len", e.max_len}};
    };
    auto j = make_envelope("synth_config");
    j["seed"] = c.seed;
    j["duration_minutes"] = c.duration_minutes;
    j["start_time"] = c.start_time;
    j["static_yaw"] = c.static_yaw;
    j["alpha"] = c.alpha;
    j["turbine"] = {{"cut_in_speed", c.turbine.cut_in_speed},
                    {"rated_speed", c.turbine.rated_speed},
                    {"cut_out_speed", c.turbine.cut_out_speed},
                    {"rated_power", c.turbine.rated_power},
                    {"standard_density", c.turbine.standard_density},
                    {"region2_low", c.turbine.region2_low},
                    {"region2_high", c.turbine.region2_high}};
    j["wind"] = ar(c.wind);
    j["direction"] = ar(c.direction);
    j["vane_noise_std"] = c.vane_noise_std;
    j["density_mean"] = c.density_mean;
    j["density_std"] = c.density_std;
    j["power_noise_std"] = c.power_noise_std;
    j["controller"] = {{"deadband", c.controller.deadband},
                       {"wait_steps", c.controller.wait_steps},
                       {"rate_deg_per_s", c.controller.rate_deg_per_s}};
    j["faults"] = episodes(c.faults);
    j["curtailment"] = episodes(c.curtailment);
    j["normal_limit_fraction"] = c.normal_limit_fraction;
    j["curtailed_limit_fraction"] = c.curtailed_limit_fraction;
    j["curtailed_band"] = c.curtailed_band;
    return j;
}

}  // namespace yawcal
