#pragma once

#include <algorithm>
#include <climits>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stresskit/error.hpp"
#include "stresskit/regression/matrix.hpp"
#include "stresskit/rng.hpp"

namespace stresskit {

struct TreeParams {
    static constexpr int unlimited_depth = INT_MAX;

    int max_depth = 12;
    std::size_t min_samples_leaf = 2;
    std::size_t max_features = 0;  // features examined per split; 0 means all

    bool operator==(const TreeParams&) const = default;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // mean target of the samples reaching this node
    std::size_t count = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

/// CART regression tree stored as a flat node array; node 0 is the root.
class RegressionTree {
public:
    TreeParams params;
    std::size_t n_features = 0;
    std::vector<TreeNode> nodes;

    /// Index of the leaf that `x` falls into.
    std::size_t leaf_index(std::span<const double> x) const {
        if (x.size() != n_features)
            throw DimensionMismatch(fmt::format("tree expects {} features, got {}", n_features, x.size()));
        std::size_t i = 0;
        while (!nodes[i].is_leaf())
            i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
        return i;
    }

    double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }

    int depth() const { return nodes.empty() ? 0 : depth_from(0); }

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
    }

    bool operator==(const RegressionTree&) const = default;

private:
    int depth_from(std::size_t i) const {
        if (nodes[i].is_leaf()) return 0;
        return 1 + std::max(depth_from(static_cast<std::size_t>(nodes[i].left)),
                            depth_from(static_cast<std::size_t>(nodes[i].right)));
    }
};

/// A candidate split must beat the incumbent by this fraction of the node SSE;
/// near-ties resolve to the lower feature index, then the lower threshold.
inline constexpr double kSplitTieTolerance = 1e-10;

/// Threshold between two adjacent distinct sorted values, guaranteed to satisfy lo <= t < hi.
inline double midpoint_threshold(double lo, double hi) {
    double t = lo + (hi - lo) / 2.0;
    return t < hi ? t : lo;
}

namespace detail {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double sse = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const double> y, const TreeParams& hp, std::uint64_t seed)
        : X_(X), y_(y), hp_(hp), rng_(seed) {}

    RegressionTree build(std::vector<std::size_t> rows) {
        tree_.params = hp_;
        tree_.n_features = X_.cols();
        rows_ = std::move(rows);
        grow(0, rows_.size(), 0);
        return std::move(tree_);
    }

private:
    std::int32_t grow(std::size_t begin, std::size_t end, int depth) {
        const std::size_t n = end - begin;
        double mean = 0.0;
        for (std::size_t i = begin; i < end; ++i) mean += y_[rows_[i]];
        mean /= static_cast<double>(n);
        double sse = 0.0;
        for (std::size_t i = begin; i < end; ++i) sse += (y_[rows_[i]] - mean) * (y_[rows_[i]] - mean);

        auto self = static_cast<std::int32_t>(tree_.nodes.size());
        tree_.nodes.push_back(TreeNode{-1, 0.0, -1, -1, mean, n});

        if (depth >= hp_.max_depth || n < 2 * std::max<std::size_t>(hp_.min_samples_leaf, 1) || sse <= 0.0) return self;
        auto split = best_split(begin, end, mean, sse);
        if (!split) return self;

        auto mid = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                         rows_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t r) {
                                             return X_(r, static_cast<std::size_t>(split->feature)) <= split->threshold;
                                         });
        auto cut = static_cast<std::size_t>(mid - rows_.begin());
        auto left = grow(begin, cut, depth + 1);
        auto right = grow(cut, end, depth + 1);
        auto& node = tree_.nodes[static_cast<std::size_t>(self)];
        node.feature = split->feature;
        node.threshold = split->threshold;
        node.left = left;
        node.right = right;
        return self;
    }

    std::optional<SplitChoice> best_split(std::size_t begin, std::size_t end, double mean, double node_sse) {
        const std::size_t f = X_.cols();
        const std::size_t budget = hp_.max_features == 0 ? f : std::min(hp_.max_features, f);
        std::vector<std::size_t> features(f);
        std::iota(features.begin(), features.end(), 0);
        if (budget < f) std::shuffle(features.begin(), features.end(), rng_);

        std::vector<std::size_t> first(features.begin(), features.begin() + static_cast<std::ptrdiff_t>(budget));
        std::sort(first.begin(), first.end());
        std::optional<SplitChoice> best;
        for (auto feat : first) scan_feature(feat, begin, end, mean, node_sse, best);
        // Keep drawing features when the sampled ones admit no valid split.
        for (std::size_t k = budget; !best && k < f; ++k) scan_feature(features[k], begin, end, mean, node_sse, best);
        return best;
    }

    void scan_feature(std::size_t feat, std::size_t begin, std::size_t end, double mean, double node_sse,
                      std::optional<SplitChoice>& best) {
        const std::size_t n = end - begin;
        const std::size_t min_leaf = std::max<std::size_t>(hp_.min_samples_leaf, 1);
        buf_.clear();
        for (std::size_t i = begin; i < end; ++i) buf_.emplace_back(X_(rows_[i], feat), y_[rows_[i]] - mean);
        std::stable_sort(buf_.begin(), buf_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

        double total_sum = 0.0, total_sq = 0.0;
        for (const auto& [x, yc] : buf_) {
            total_sum += yc;
            total_sq += yc * yc;
        }
        double left_sum = 0.0, left_sq = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += buf_[i].second;
            left_sq += buf_[i].second * buf_[i].second;
            if (!(buf_[i].first < buf_[i + 1].first)) continue;
            const std::size_t nl = i + 1, nr = n - nl;
            if (nl < min_leaf || nr < min_leaf) continue;
            double right_sum = total_sum - left_sum, right_sq = total_sq - left_sq;
            double sse = std::max(0.0, left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                         std::max(0.0, right_sq - right_sum * right_sum / static_cast<double>(nr));
            if (!best || sse < best->sse - kSplitTieTolerance * node_sse)
                best = SplitChoice{static_cast<int>(feat), midpoint_threshold(buf_[i].first, buf_[i + 1].first), sse};
        }
    }

    const Matrix& X_;
    std::span<const double> y_;
    TreeParams hp_;
    Rng rng_;
    RegressionTree tree_;
    std::vector<std::size_t> rows_;
    std::vector<std::pair<double, double>> buf_;
};

inline void check_training_data(const Matrix& X, std::span<const double> y) {
    if (X.rows() == 0) throw InvalidArgument("regression: empty training data");
    if (X.cols() == 0) throw InvalidArgument("regression: no features");
    if (y.size() != X.rows())
        throw DimensionMismatch(fmt::format("regression: {} targets for {} rows", y.size(), X.rows()));
    for (std::size_t r = 0; r < X.rows(); ++r) {
        for (double v : X.row(r))
            if (!std::isfinite(v)) throw InvalidArgument(fmt::format("regression: non-finite feature in row {}", r));
        if (!std::isfinite(y[r])) throw InvalidArgument(fmt::format("regression: non-finite target in row {}", r));
    }
}

}  // namespace detail

/// Greedy CART fit minimizing squared error. `seed` only matters when
/// `hp.max_features` restricts the features examined per split.
inline RegressionTree fit_tree(const Matrix& X, std::span<const double> y, const TreeParams& hp,
                               std::uint64_t seed = 0) {
    detail::check_training_data(X, y);
    if (hp.max_depth < 0) throw InvalidArgument("regression: max_depth must be >= 0");
    std::vector<std::size_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return detail::TreeBuilder(X, y, hp, seed).build(std::move(rows));
}

inline double predict_tree(const RegressionTree& t, std::span<const double> x) { return t.predict(x); }

inline nlohmann::json tree_params_to_json(const TreeParams& p) {
    nlohmann::json j;
    if (p.max_depth == TreeParams::unlimited_depth)
        j["max_depth"] = nullptr;
    else
        j["max_depth"] = p.max_depth;
    j["min_samples_leaf"] = p.min_samples_leaf;
    j["max_features"] = p.max_features;
    return j;
}

inline TreeParams tree_params_from_json(const nlohmann::json& j) {
    TreeParams p;
    p.max_depth = j.at("max_depth").is_null() ? TreeParams::unlimited_depth : j.at("max_depth").get<int>();
    p.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    p.max_features = j.at("max_features").get<std::size_t>();
    return p;
}

// Column-oriented node arrays keep large forests compact on disk.
inline nlohmann::json tree_to_json(const RegressionTree& t) {
    nlohmann::json j;
    j["params"] = tree_params_to_json(t.params);
    j["n_features"] = t.n_features;
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    std::vector<std::size_t> count;
    for (const auto& n : t.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
        count.push_back(n.count);
    }
    j["nodes"] = {{"feature", feature}, {"threshold", threshold}, {"left", left},
                  {"right", right},     {"value", value},         {"count", count}};
    return j;
}

inline RegressionTree tree_from_json(const nlohmann::json& j) {
    RegressionTree t;
    t.params = tree_params_from_json(j.at("params"));
    t.n_features = j.at("n_features").get<std::size_t>();
    const auto& nj = j.at("nodes");
    auto feature = nj.at("feature").get<std::vector<int>>();
    auto threshold = nj.at("threshold").get<std::vector<double>>();
    auto left = nj.at("left").get<std::vector<std::int32_t>>();
    auto right = nj.at("right").get<std::vector<std::int32_t>>();
    auto value = nj.at("value").get<std::vector<double>>();
    auto count = nj.at("count").get<std::vector<std::size_t>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || count.size() != n || n == 0)
        throw DataError("tree: inconsistent node arrays");
    for (std::size_t i = 0; i < n; ++i) {
        TreeNode node{feature[i], threshold[i], left[i], right[i], value[i], count[i]};
        if (!node.is_leaf()) {
            auto bad = [&](std::int32_t c) { return c <= static_cast<std::int32_t>(i) || c >= static_cast<std::int32_t>(n); };
            if (bad(node.left) || bad(node.right) || static_cast<std::size_t>(node.feature) >= t.n_features)
                throw DataError(fmt::format("tree: malformed node {}", i));
        }
        t.nodes.push_back(node);
    }
    return t;
}

}  // namespace stresskit
