#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <span>
#include <unordered_map>
#include <vector>

#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"

namespace yawcal {

struct SvrOptions {
    double epsilon = 1.69;        // half-width of the insensitive tube
    double c = 0.0010019;         // box constraint per dual variable
    double kkt_tol = 1e-3;        // stop when max KKT violation falls below
    double max_iter_factor = 1e5; // iteration cap = factor * n
};

struct SvrTrainDiag {
    std::size_t iterations = 0;
    double gap = 0.0;             // final maximal violating pair gap
    double dual_objective = 0.0;
    std::size_t support_count = 0;
};

struct SvrModel {
    std::vector<std::array<double, kFeatureCount>> support;  // standardized
    std::vector<double> coeff;
    double bias = 0.0;
    Normalization norm;
    SvrOptions options;
    SvrTrainDiag diag;
};

namespace detail {

inline double gaussian_kernel(const std::array<double, kFeatureCount>& a,
                              const std::array<double, kFeatureCount>& b) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < kFeatureCount; ++k) {
        const double d = a[k] - b[k];
        d2 += d * d;
    }
    return std::exp(-d2);
}

// Fixed-budget LRU cache of kernel matrix rows.
class KernelCache {
  public:
    KernelCache(const std::vector<std::array<double, kFeatureCount>>& points,
                std::size_t budget_bytes)
        : points_(points) {
        const std::size_t row_bytes = points.size() * sizeof(double);
        capacity_ = row_bytes == 0 ? 1 : budget_bytes / row_bytes;
        if (capacity_ < 64) capacity_ = 64;
    }

    const std::vector<double>& row(std::size_t i) {
        auto it = rows_.find(i);
        if (it != rows_.end()) {
            order_.splice(order_.begin(), order_, it->second.second);
            return it->second.first;
        }
        if (rows_.size() >= capacity_) {
            rows_.erase(order_.back());
            order_.pop_back();
        }
        std::vector<double> values(points_.size());
        for (std::size_t u = 0; u < points_.size(); ++u)
            values[u] = gaussian_kernel(points_[i], points_[u]);
        order_.push_front(i);
        auto [pos, _] = rows_.emplace(i, std::pair{std::move(values), order_.begin()});
        return pos->second.first;
    }

  private:
    const std::vector<std::array<double, kFeatureCount>>& points_;
    std::size_t capacity_;
    std::list<std::size_t> order_;
    std::unordered_map<std::size_t,
                       std::pair<std::vector<double>, std::list<std::size_t>::iterator>>
        rows_;
};

}  // namespace detail

// Epsilon-SVR fitted by sequential minimal optimization on the standard dual:
//   min 1/2 a'Qa + p'a   s.t.  z'a = 0,  0 <= a <= C,
// where index s < n carries the positive multiplier of sample s and s+n the
// negative one, Q(s,t) = z_s z_t K(s,t) with K = exp(-|x_i - x_j|^2), and
// p = epsilon -+ y. Each step picks the maximal violating pair, solves the
// two-variable subproblem exactly, and stops once the pair gap is inside
// kkt_tol.
inline SvrModel train_svr(std::span<const ForecastSample> samples,
                          const SvrOptions& opt = {}) {
    if (!(opt.c > 0.0))
        throw Error(ErrorKind::invalid_input, "train_svr: C must be positive");
    if (opt.epsilon < 0.0)
        throw Error(ErrorKind::invalid_input, "train_svr: epsilon must be >= 0");
    if (!(opt.kkt_tol > 0.0))
        throw Error(ErrorKind::invalid_input, "train_svr: tolerance must be positive");
    if (samples.size() < 2)
        throw Error(ErrorKind::insufficient_data, "train_svr: need at least 2 samples");

    SvrModel model;
    model.norm = Normalization::fit(samples);
    model.options = opt;

    const std::size_t n = samples.size();
    std::vector<std::array<double, kFeatureCount>> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = model.norm.apply(samples[i].features);
        y[i] = samples[i].target;
    }

    detail::KernelCache cache(x, std::size_t{256} << 20);
    const double c = opt.c;
    std::vector<double> a(2 * n, 0.0);
    std::vector<double> grad(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        grad[i] = opt.epsilon - y[i];
        grad[n + i] = opt.epsilon + y[i];
    }
    auto sign_of = [n](std::size_t s) { return s < n ? 1.0 : -1.0; };

    const auto max_iter = static_cast<std::size_t>(
        opt.max_iter_factor * static_cast<double>(n));
    std::size_t iter = 0;
    double gap = 0.0;
    while (true) {
        // b_s = -z_s * grad_s; the up set can still grow, the low set shrink.
        std::size_t best_i = 2 * n, best_j = 2 * n;
        double m_up = -std::numeric_limits<double>::infinity();
        double m_low = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < 2 * n; ++s) {
            const double z = sign_of(s);
            const double b = -z * grad[s];
            const bool in_up = z > 0.0 ? a[s] < c : a[s] > 0.0;
            const bool in_low = z > 0.0 ? a[s] > 0.0 : a[s] < c;
            if (in_up && b > m_up) { m_up = b; best_i = s; }
            if (in_low && b < m_low) { m_low = b; best_j = s; }
        }
        if (best_i == 2 * n || best_j == 2 * n) { gap = 0.0; break; }
        gap = m_up - m_low;
        if (gap <= opt.kkt_tol) break;
        if (iter >= max_iter)
            throw Error(ErrorKind::fit_failure,
                        "train_svr: iteration cap reached before convergence");
        ++iter;

        const std::size_t i = best_i, j = best_j;
        const double zi = sign_of(i), zj = sign_of(j);
        const std::size_t bi = i % n, bj = j % n;
        const auto& ki = cache.row(bi);
        const double kjj = 1.0;  // exp(0), unit diagonal
        double q = kjj + 1.0 - 2.0 * zi * zj * ki[bj];
        if (q < 1e-12) q = 1e-12;

        // Move along a_i += z_i t, a_j -= z_j t; headroom is positive on both
        // ends because i is in the up set and j in the low set.
        double t = gap / q;
        t = std::min(t, zi > 0.0 ? c - a[i] : a[i]);
        t = std::min(t, zj > 0.0 ? a[j] : c - a[j]);
        a[i] += zi * t;
        a[j] -= zj * t;
        a[i] = std::clamp(a[i], 0.0, c);
        a[j] = std::clamp(a[j], 0.0, c);

        const auto& kj = cache.row(bj);
        for (std::size_t u = 0; u < n; ++u) {
            const double d = t * (ki[u] - kj[u]);
            grad[u] += d;
            grad[n + u] -= d;
        }
    }

    model.bias = 0.0;
    {
        // Recompute the boundary values for the bias midpoint.
        double m_up = -std::numeric_limits<double>::infinity();
        double m_low = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < 2 * n; ++s) {
            const double z = sign_of(s);
            const double b = -z * grad[s];
            const bool in_up = z > 0.0 ? a[s] < c : a[s] > 0.0;
            const bool in_low = z > 0.0 ? a[s] > 0.0 : a[s] < c;
            if (in_up) m_up = std::max(m_up, b);
            if (in_low) m_low = std::min(m_low, b);
        }
        if (std::isfinite(m_up) && std::isfinite(m_low))
            model.bias = 0.5 * (m_up + m_low);
    }

    double dual = 0.0;
    for (std::size_t s = 0; s < 2 * n; ++s) {
        const double p = s < n ? opt.epsilon - y[s] : opt.epsilon + y[s - n];
        dual += a[s] * (grad[s] + p);
    }
    model.diag.iterations = iter;
    model.diag.gap = gap;
    model.diag.dual_objective = 0.5 * dual;

    for (std::size_t u = 0; u < n; ++u) {
        const double beta = a[u] - a[n + u];
        if (beta != 0.0) {
            model.support.push_back(x[u]);
            model.coeff.push_back(beta);
        }
    }
    model.diag.support_count = model.support.size();
    return model;
}

inline double predict(const SvrModel& model, const FeatureVector& x) {
    const auto z = model.norm.apply(x);
    double acc = model.bias;
    for (std::size_t u = 0; u < model.support.size(); ++u)
        acc += model.coeff[u] * detail::gaussian_kernel(model.support[u], z);
    return acc;
}

}  // namespace yawcal
