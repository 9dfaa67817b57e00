#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "yawcal/csv.hpp"
#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"
#include "yawcal/forest.hpp"
#include "yawcal/linear_model.hpp"
#include "yawcal/svr.hpp"

namespace yawcal {

enum class ModelKind { linear, svr, forest, hybrid, persistence, persistence10 };

inline std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear: return "linear";
        case ModelKind::svr: return "svr";
        case ModelKind::forest: return "forest";
        case ModelKind::hybrid: return "hybrid";
        case ModelKind::persistence: return "persistence";
        case ModelKind::persistence10: return "persistence10";
    }
    throw Error(ErrorKind::invalid_input, "unknown model kind");
}

inline ModelKind model_kind_from_string(const std::string& name) {
    if (name == "linear") return ModelKind::linear;
    if (name == "svr") return ModelKind::svr;
    if (name == "forest") return ModelKind::forest;
    if (name == "hybrid") return ModelKind::hybrid;
    if (name == "persistence") return ModelKind::persistence;
    if (name == "persistence10") return ModelKind::persistence10;
    throw Error(ErrorKind::invalid_input, "unknown model kind '" + name + "'");
}

// Repeats the current misalignment as the next-minute prediction.
struct PersistenceModel {};

// Predicts the mean of the previous ten minutes of misalignment.
struct Persistence10Model {
    std::size_t window = 10;
};

struct HybridModel {
    LinearModel linear;
    SvrModel svr;
    ForestModel forest;
};

using ForecastModel = std::variant<LinearModel, SvrModel, ForestModel,
                                   HybridModel, PersistenceModel,
                                   Persistence10Model>;

inline ModelKind kind_of(const ForecastModel& model) {
    struct Visitor {
        ModelKind operator()(const LinearModel&) const { return ModelKind::linear; }
        ModelKind operator()(const SvrModel&) const { return ModelKind::svr; }
        ModelKind operator()(const ForestModel&) const { return ModelKind::forest; }
        ModelKind operator()(const HybridModel&) const { return ModelKind::hybrid; }
        ModelKind operator()(const PersistenceModel&) const {
            return ModelKind::persistence;
        }
        ModelKind operator()(const Persistence10Model&) const {
            return ModelKind::persistence10;
        }
    };
    return std::visit(Visitor{}, model);
}

inline double predict(const HybridModel& model, const FeatureVector& x) {
    return (predict(model.linear, x) + predict(model.svr, x) +
            predict(model.forest, x)) /
           3.0;
}

struct PredictionDiag {
    std::size_t pm10_truncated = 0;  // samples with fewer than `window` lags
};

inline double predict(const ForecastModel& model, const ForecastSample& sample,
                      PredictionDiag* diag = nullptr) {
    if (std::holds_alternative<PersistenceModel>(model))
        return sample.features.yaw_lag(0);
    if (const auto* pm10 = std::get_if<Persistence10Model>(&model)) {
        if (sample.history.empty())
            throw Error(ErrorKind::insufficient_data,
                        "persistence10: sample carries no history");
        const std::size_t depth = std::min(pm10->window, sample.history.size());
        if (diag && depth < pm10->window) ++diag->pm10_truncated;
        double acc = 0.0;
        for (std::size_t k = 0; k < depth; ++k) acc += sample.history[k];
        return acc / static_cast<double>(depth);
    }
    return std::visit(
        [&](const auto& m) -> double {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, PersistenceModel> ||
                          std::is_same_v<T, Persistence10Model>) {
                throw Error(ErrorKind::invalid_input, "unreachable");
            } else {
                return predict(m, sample.features);
            }
        },
        model);
}

inline std::vector<double> predict_series(const ForecastModel& model,
                                          std::span<const ForecastSample> samples,
                                          PredictionDiag* diag = nullptr) {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(predict(model, s, diag));
    return out;
}

struct ForecastMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t count = 0;
};

inline ForecastMetrics score_forecast(std::span<const double> predicted,
                                      std::span<const double> actual) {
    if (predicted.size() != actual.size())
        throw Error(ErrorKind::invalid_input, "score_forecast: length mismatch");
    if (predicted.empty())
        throw Error(ErrorKind::insufficient_data, "score_forecast: no points");
    ForecastMetrics m;
    m.count = predicted.size();
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] - actual[i];
        m.mae += std::fabs(e);
        m.rmse += e * e;
    }
    m.mae /= static_cast<double>(m.count);
    m.rmse = std::sqrt(m.rmse / static_cast<double>(m.count));
    return m;
}

struct TrainConfig {
    RidgeOptions ridge;
    SvrOptions svr;
    ForestOptions forest;
};

// Trains the three learned models once and exposes all six predictors; the
// hybrid shares the fitted bases by value (forest storage is shared).
inline std::map<ModelKind, ForecastModel> train_all_models(
    std::span<const ForecastSample> samples, const TrainConfig& config = {}) {
    std::map<ModelKind, ForecastModel> models;
    LinearModel linear = train_linear(samples, config.ridge);
    SvrModel svr = train_svr(samples, config.svr);
    ForestModel forest = train_forest(samples, config.forest);
    models.emplace(ModelKind::hybrid, HybridModel{linear, svr, forest});
    models.emplace(ModelKind::linear, std::move(linear));
    models.emplace(ModelKind::svr, std::move(svr));
    models.emplace(ModelKind::forest, std::move(forest));
    models.emplace(ModelKind::persistence, PersistenceModel{});
    models.emplace(ModelKind::persistence10, Persistence10Model{});
    return models;
}

struct GridSearchSpec {
    std::vector<double> lambdas{1e-4, 1e-3, 1e-2};
    std::vector<double> epsilons{0.1, 0.5, 1.69};
    std::vector<double> costs{0.0010019, 0.1, 1.0, 10.0};
    std::vector<int> tree_counts{100, 400};
    std::vector<int> leaf_floors{2, 4};
    double subset_fraction = 0.10;  // leading share of the training window
    double inner_fraction = 0.8;
};

struct GridSearchEntry {
    std::string description;
    double mae = 0.0;
};

struct GridSearchResult {
    TrainConfig best;
    std::vector<GridSearchEntry> table;
};

// Small hyperparameter sweep on the leading slice of the training data with
// an inner chronological split. Each family is tuned independently by MAE.
inline GridSearchResult grid_search(std::span<const ForecastSample> samples,
                                    const GridSearchSpec& spec = {},
                                    std::int64_t step_s = 60) {
    if (!(spec.subset_fraction > 0.0 && spec.subset_fraction <= 1.0))
        throw Error(ErrorKind::invalid_input, "grid_search: bad subset fraction");
    const auto take = static_cast<std::size_t>(
        std::floor(static_cast<double>(samples.size()) * spec.subset_fraction));
    if (take < 20)
        throw Error(ErrorKind::insufficient_data,
                    "grid_search: subset too small to split");
    auto inner =
        chronological_split(samples.subspan(0, take), spec.inner_fraction, step_s);

    GridSearchResult result;
    auto evaluate = [&](const ForecastModel& model) {
        auto preds = predict_series(model, inner.test);
        std::vector<double> truth(inner.test.size());
        for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = inner.test[i].target;
        return score_forecast(preds, truth).mae;
    };

    double best_mae = std::numeric_limits<double>::infinity();
    for (double lambda : spec.lambdas) {
        RidgeOptions opt;
        opt.lambda = lambda;
        const double mae = evaluate(train_linear(inner.train, opt));
        result.table.push_back({"linear lambda=" + format_double(lambda), mae});
        if (mae < best_mae) {
            best_mae = mae;
            result.best.ridge = opt;
        }
    }
    best_mae = std::numeric_limits<double>::infinity();
    for (double eps : spec.epsilons)
        for (double cost : spec.costs) {
            SvrOptions opt;
            opt.epsilon = eps;
            opt.c = cost;
            const double mae = evaluate(train_svr(inner.train, opt));
            result.table.push_back({"svr epsilon=" + format_double(eps) +
                                        " c=" + format_double(cost),
                                    mae});
            if (mae < best_mae) {
                best_mae = mae;
                result.best.svr = opt;
            }
        }
    best_mae = std::numeric_limits<double>::infinity();
    for (int trees : spec.tree_counts)
        for (int floor : spec.leaf_floors) {
            ForestOptions opt;
            opt.n_trees = trees;
            opt.min_samples = floor;
            const double mae = evaluate(train_forest(inner.train, opt));
            result.table.push_back({"forest trees=" + std::to_string(trees) +
                                        " min_samples=" + std::to_string(floor),
                                    mae});
            if (mae < best_mae) {
                best_mae = mae;
                result.best.forest = opt;
            }
        }
    return result;
}

}  // namespace yawcal
