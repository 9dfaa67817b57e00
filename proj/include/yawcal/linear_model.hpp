#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"
#include "yawcal/optimize.hpp"

namespace yawcal {

struct RidgeOptions {
    double lambda = 1e-3;    // penalty on the weights, never on the bias
    double grad_tol = 1e-10;
    int max_iter = 2000;
};

struct LinearModel {
    std::array<double, kFeatureCount> beta{};
    double bias = 0.0;
    Normalization norm;
    double lambda = 0.0;
    int iterations = 0;
};

// Ridge regression on standardized features, fitted by quasi-Newton descent
// on the mean squared error plus lambda/n * |beta|^2. The stationary point
// is identical to the closed-form solution of
// (X'X + lambda I) beta = X'(y - bias), which tests verify independently.
inline LinearModel train_linear(std::span<const ForecastSample> samples,
                                const RidgeOptions& opt = {}) {
    if (opt.lambda < 0.0)
        throw Error(ErrorKind::invalid_input, "train_linear: lambda must be >= 0");
    if (samples.size() < kFeatureCount + 1)
        throw Error(ErrorKind::insufficient_data,
                    "train_linear: need more samples than coefficients");

    LinearModel model;
    model.norm = Normalization::fit(samples);
    model.lambda = opt.lambda;

    const std::size_t n = samples.size();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), kFeatureCount);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto z = model.norm.apply(samples[i].features);
        for (std::size_t k = 0; k < kFeatureCount; ++k)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = z[k];
        y(static_cast<Eigen::Index>(i)) = samples[i].target;
    }

    const double inv_n = 1.0 / static_cast<double>(n);
    auto objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
        const Eigen::VectorXd beta = w.head(kFeatureCount);
        const double bias = w(kFeatureCount);
        Eigen::VectorXd resid = X * beta;
        resid.array() += bias;
        resid -= y;
        const double value =
            inv_n * (resid.squaredNorm() + opt.lambda * beta.squaredNorm());
        grad.resize(kFeatureCount + 1);
        grad.head(kFeatureCount) =
            2.0 * inv_n * (X.transpose() * resid + opt.lambda * beta);
        grad(kFeatureCount) = 2.0 * inv_n * resid.sum();
        return value;
    };

    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kFeatureCount + 1);
    auto result = bfgs_minimize(objective, x0, opt.grad_tol, opt.max_iter);
    if (!result.converged)
        throw Error(ErrorKind::fit_failure,
                    "train_linear: descent did not reach gradient tolerance");
    for (std::size_t k = 0; k < kFeatureCount; ++k)
        model.beta[k] = result.x(static_cast<Eigen::Index>(k));
    model.bias = result.x(kFeatureCount);
    model.iterations = result.iterations;
    return model;
}

inline double predict(const LinearModel& model, const FeatureVector& x) {
    const auto z = model.norm.apply(x);
    double acc = model.bias;
    for (std::size_t k = 0; k < kFeatureCount; ++k) acc += model.beta[k] * z[k];
    return acc;
}

}  // namespace yawcal
