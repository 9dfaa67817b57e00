#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "yawcal/errors.hpp"
#include "yawcal/features.hpp"
#include "yawcal/rng.hpp"

namespace yawcal {

// Which side of a split the size floor constrains: node_size stops splitting
// nodes smaller than the floor, leaf_size additionally requires both children
// to stay at or above it.
enum class SplitRule { node_size, leaf_size };

struct ForestOptions {
    int n_trees = 400;
    int min_samples = 4;
    SplitRule rule = SplitRule::node_size;
    int max_features = 3;  // features drawn per split
    std::uint64_t seed = 1;
};

struct TreeNode {
    std::int32_t feature = -1;   // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;          // leaf mean
    std::int32_t count = 0;      // training rows that reached this node
};

struct ForestModel {
    // Shared immutable storage keeps copies of the model cheap.
    std::shared_ptr<const std::vector<std::vector<TreeNode>>> trees;
    ForestOptions options;
};

namespace detail {

struct TreeBuilder {
    const std::vector<std::array<double, kFeatureCount>>& x;
    const std::vector<double>& y;
    const ForestOptions& opt;
    Rng& rng;
    std::vector<TreeNode> nodes;
    std::vector<std::size_t> scratch;

    // Builds the subtree over rows [lo, hi) of `scratch` and returns its index.
    std::int32_t build(std::size_t lo, std::size_t hi) {
        const std::size_t m = hi - lo;
        const auto node_index = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(node_index)].count = static_cast<std::int32_t>(m);

        double sum = 0.0, sum_sq = 0.0;
        for (std::size_t r = lo; r < hi; ++r) {
            sum += y[scratch[r]];
            sum_sq += y[scratch[r]] * y[scratch[r]];
        }
        const double mean = sum / static_cast<double>(m);
        const double variance = std::max(0.0, sum_sq / static_cast<double>(m) - mean * mean);
        nodes[static_cast<std::size_t>(node_index)].value = mean;

        const auto floor = static_cast<std::size_t>(opt.min_samples);
        const bool splittable = opt.rule == SplitRule::node_size
                                    ? m >= floor
                                    : m >= 2 * floor;
        if (!splittable || variance <= 1e-24) return node_index;

        // Draw the feature subset for this node (partial Fisher-Yates).
        std::array<std::size_t, kFeatureCount> feats;
        std::iota(feats.begin(), feats.end(), std::size_t{0});
        const auto n_try =
            std::min<std::size_t>(static_cast<std::size_t>(opt.max_features), kFeatureCount);
        for (std::size_t k = 0; k < n_try; ++k) {
            const auto pick = k + static_cast<std::size_t>(
                                      rng.uniform_int(static_cast<std::uint64_t>(
                                          kFeatureCount - k)));
            std::swap(feats[k], feats[pick]);
        }

        struct Best {
            double score = std::numeric_limits<double>::infinity();
            std::size_t feature = 0;
            double threshold = 0.0;
        } best;
        std::vector<std::pair<double, std::size_t>> order(m);
        std::vector<double> targets(m);
        for (std::size_t k = 0; k < n_try; ++k) {
            const std::size_t f = feats[k];
            for (std::size_t r = 0; r < m; ++r)
                order[r] = {x[scratch[lo + r]][f], scratch[lo + r]};
            std::sort(order.begin(), order.end());
            for (std::size_t r = 0; r < m; ++r) targets[r] = y[order[r].second];

            // Weighted child variance via prefix sums; a cut between rows
            // r-1 and r needs distinct feature values there.
            double left_sum = 0.0, left_sq = 0.0;
            for (std::size_t r = 1; r < m; ++r) {
                left_sum += targets[r - 1];
                left_sq += targets[r - 1] * targets[r - 1];
                if (order[r].first <= order[r - 1].first) continue;
                if (opt.rule == SplitRule::leaf_size &&
                    (r < floor || m - r < floor))
                    continue;
                const double right_sum = sum - left_sum;
                const double right_sq = sum_sq - left_sq;
                const double nl = static_cast<double>(r);
                const double nr = static_cast<double>(m - r);
                const double score = (left_sq - left_sum * left_sum / nl) +
                                     (right_sq - right_sum * right_sum / nr);
                if (score < best.score) {  // ties keep the earlier candidate
                    best.score = score;
                    best.feature = f;
                    best.threshold = 0.5 * (order[r - 1].first + order[r].first);
                }
            }
        }
        if (!std::isfinite(best.score)) return node_index;  // no admissible cut

        const auto mid = static_cast<std::size_t>(
            std::partition(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
                           scratch.begin() + static_cast<std::ptrdiff_t>(hi),
                           [&](std::size_t row) {
                               return x[row][best.feature] <= best.threshold;
                           }) -
            scratch.begin());
        if (mid == lo || mid == hi) return node_index;  // degenerate, keep leaf

        nodes[static_cast<std::size_t>(node_index)].feature =
            static_cast<std::int32_t>(best.feature);
        nodes[static_cast<std::size_t>(node_index)].threshold = best.threshold;
        const std::int32_t left = build(lo, mid);
        nodes[static_cast<std::size_t>(node_index)].left = left;
        const std::int32_t right = build(mid, hi);
        nodes[static_cast<std::size_t>(node_index)].right = right;
        return node_index;
    }
};

}  // namespace detail

// Bagged regression trees with per-node feature subsampling. Training rows
// are first brought into a canonical order (lexicographic by features, then
// target) so the model is invariant to input permutation; each tree draws its
// bootstrap sample and split features from its own counter stream.
inline ForestModel train_forest(std::span<const ForecastSample> samples,
                                const ForestOptions& opt = {}) {
    if (opt.n_trees < 1)
        throw Error(ErrorKind::invalid_input, "train_forest: need at least one tree");
    if (opt.min_samples < 2)
        throw Error(ErrorKind::invalid_input, "train_forest: min_samples must be >= 2");
    if (opt.max_features < 1 ||
        static_cast<std::size_t>(opt.max_features) > kFeatureCount)
        throw Error(ErrorKind::invalid_input, "train_forest: bad feature count");
    if (samples.empty())
        throw Error(ErrorKind::insufficient_data, "train_forest: no samples");

    const std::size_t n = samples.size();
    std::vector<std::size_t> canon(n);
    std::iota(canon.begin(), canon.end(), std::size_t{0});
    std::sort(canon.begin(), canon.end(), [&](std::size_t a, std::size_t b) {
        const auto& fa = samples[a].features.values;
        const auto& fb = samples[b].features.values;
        if (fa != fb) return fa < fb;
        return samples[a].target < samples[b].target;
    });
    std::vector<std::array<double, kFeatureCount>> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = samples[canon[i]].features.values;
        y[i] = samples[canon[i]].target;
    }

    auto trees = std::make_shared<std::vector<std::vector<TreeNode>>>();
    trees->resize(static_cast<std::size_t>(opt.n_trees));
    for (int t = 0; t < opt.n_trees; ++t) {
        Rng rng(opt.seed, static_cast<std::uint64_t>(t) + 1);
        detail::TreeBuilder builder{x, y, opt, rng, {}, {}};
        builder.scratch.resize(n);
        for (auto& row : builder.scratch)
            row = static_cast<std::size_t>(rng.uniform_int(n));
        builder.build(0, n);
        (*trees)[static_cast<std::size_t>(t)] = std::move(builder.nodes);
    }
    return ForestModel{std::move(trees), opt};
}

inline double predict(const ForestModel& model, const FeatureVector& f) {
    if (!model.trees || model.trees->empty())
        throw Error(ErrorKind::invalid_input, "forest predict: empty model");
    double acc = 0.0;
    for (const auto& tree : *model.trees) {
        std::size_t at = 0;
        while (tree[at].feature >= 0) {
            const auto feat = static_cast<std::size_t>(tree[at].feature);
            at = static_cast<std::size_t>(
                f.values[feat] <= tree[at].threshold ? tree[at].left
                                                     : tree[at].right);
        }
        acc += tree[at].value;
    }
    return acc / static_cast<double>(model.trees->size());
}

}  // namespace yawcal
