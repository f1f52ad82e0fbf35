#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stresskit/error.hpp"
#include "stresskit/profile_store.hpp"
#include "stresskit/rng.hpp"

namespace stresskit {

struct ClusterModel {
    std::size_t k = 0;
    std::vector<std::vector<double>> centroids;
    std::vector<std::size_t> assignments;  // parallel to the dataset's profile order
    double silhouette = 0.0;               // 0 when k < 2
    std::uint64_t seed = 0;
    std::vector<double> sse_trace;         // within-cluster SSE after every Lloyd iteration

    std::map<std::string, std::size_t> assignment_map(const ProfileDataset& ds) const {
        std::map<std::string, std::size_t> out;
        for (std::size_t i = 0; i < ds.size(); ++i) out.emplace(ds.profiles[i].app_id, assignments[i]);
        return out;
    }
};

/// One representative app id per cluster index.
using Representatives = std::vector<std::string>;

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

inline std::vector<std::size_t> order_by_id(const ProfileDataset& ds) {
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ds.profiles[a].app_id < ds.profiles[b].app_id; });
    return order;
}

inline std::size_t distinct_points(const ProfileDataset& ds) {
    std::set<std::vector<double>> s;
    for (const auto& p : ds.profiles) s.insert(p.utilization);
    return s.size();
}

inline std::size_t nearest(std::span<const double> x, const std::vector<std::vector<double>>& centroids) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        double d = squared_distance(x, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace detail

/// Within-cluster sum of squared distances to the assigned centroids.
inline double within_cluster_sse(const ProfileDataset& ds, const ClusterModel& cm) {
    double s = 0.0;
    for (std::size_t i : detail::order_by_id(ds))
        s += detail::squared_distance(ds.profiles[i].utilization, cm.centroids[cm.assignments[i]]);
    return s;
}

/// Lloyd's k-means with k-means++ seeding. Every pass over the points walks them in
/// sorted app_id order, so the result does not depend on the dataset's row order.
inline ClusterModel kmeans(const ProfileDataset& ds, std::size_t k, std::uint64_t seed, std::size_t max_iter = 300,
                           double tol = 1e-6) {
    if (k < 1) throw InvalidArgument("kmeans: k must be >= 1");
    if (max_iter < 1) throw InvalidArgument("kmeans: max_iter must be >= 1");
    if (!(tol >= 0)) throw InvalidArgument("kmeans: tol must be >= 0");
    std::size_t distinct = detail::distinct_points(ds);
    if (k > distinct)
        throw InvalidArgument(fmt::format("kmeans: k = {} exceeds the {} distinct points", k, distinct));

    const auto order = detail::order_by_id(ds);
    const std::size_t dim = ds.space.size();
    auto point = [&](std::size_t i) -> std::span<const double> { return ds.profiles[i].utilization; };

    Rng rng(seed);
    ClusterModel cm;
    cm.k = k;
    cm.seed = seed;

    // k-means++ seeding
    {
        std::size_t first = order[std::uniform_int_distribution<std::size_t>(0, order.size() - 1)(rng)];
        cm.centroids.emplace_back(point(first).begin(), point(first).end());
    }
    std::vector<double> d2(order.size());
    while (cm.centroids.size() < k) {
        double total = 0.0;
        for (std::size_t j = 0; j < order.size(); ++j) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : cm.centroids) best = std::min(best, detail::squared_distance(point(order[j]), c));
            d2[j] = best;
            total += best;
        }
        double target = std::uniform_real_distribution<double>(0.0, total)(rng);
        std::size_t chosen = order.size();
        double acc = 0.0;
        for (std::size_t j = 0; j < order.size(); ++j) {
            if (d2[j] <= 0.0) continue;
            acc += d2[j];
            chosen = j;
            if (acc > target) break;
        }
        cm.centroids.emplace_back(point(order[chosen]).begin(), point(order[chosen]).end());
    }

    cm.assignments.assign(ds.size(), 0);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        for (std::size_t i : order) cm.assignments[i] = detail::nearest(point(i), cm.centroids);

        // Repair empty clusters by moving the point farthest from its centroid.
        while (true) {
            std::vector<std::size_t> counts(k, 0);
            for (std::size_t i : order) ++counts[cm.assignments[i]];
            auto empty = std::find(counts.begin(), counts.end(), 0u);
            if (empty == counts.end()) break;
            std::size_t far = order[0];
            double far_d = -1.0;
            for (std::size_t i : order) {
                if (counts[cm.assignments[i]] < 2) continue;
                double d = detail::squared_distance(point(i), cm.centroids[cm.assignments[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            std::size_t c = static_cast<std::size_t>(empty - counts.begin());
            cm.centroids[c].assign(point(far).begin(), point(far).end());
            cm.assignments[far] = c;
        }

        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i : order) {
            auto c = cm.assignments[i];
            ++counts[c];
            for (std::size_t r = 0; r < dim; ++r) next[c][r] += point(i)[r];
        }
        double movement = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
            movement = std::max(movement, detail::distance(next[c], cm.centroids[c]));
        }
        cm.centroids = std::move(next);
        cm.sse_trace.push_back(within_cluster_sse(ds, cm));
        if (movement < tol) break;
    }
    // Final assignment against the converged centroids keeps assignments and centroids consistent.
    std::vector<std::size_t> final_assign(ds.size());
    for (std::size_t i : order) final_assign[i] = detail::nearest(point(i), cm.centroids);
    std::vector<std::size_t> counts(k, 0);
    for (auto c : final_assign) ++counts[c];
    if (std::find(counts.begin(), counts.end(), 0u) == counts.end() && final_assign != cm.assignments) {
        cm.assignments = std::move(final_assign);
        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        for (std::size_t i : order)
            for (std::size_t r = 0; r < dim; ++r) next[cm.assignments[i]][r] += point(i)[r];
        for (std::size_t c = 0; c < k; ++c)
            for (auto& v : next[c]) v /= static_cast<double>(counts[c]);
        cm.centroids = std::move(next);
        cm.sse_trace.push_back(within_cluster_sse(ds, cm));
    }
    return cm;
}

/// Mean silhouette over all points with Euclidean distance; points in singleton clusters score 0.
inline double silhouette_score(const ProfileDataset& ds, const ClusterModel& cm) {
    if (cm.k < 2) throw InvalidArgument("silhouette: needs at least 2 clusters");
    if (cm.assignments.size() != ds.size()) throw InvalidArgument("silhouette: model does not cover the dataset");
    const auto order = detail::order_by_id(ds);
    std::vector<std::size_t> counts(cm.k, 0);
    for (auto c : cm.assignments) ++counts[c];

    double total = 0.0;
    for (std::size_t i : order) {
        const auto own = cm.assignments[i];
        if (counts[own] <= 1) continue;
        std::vector<double> sums(cm.k, 0.0);
        for (std::size_t j : order) {
            if (j == i) continue;
            sums[cm.assignments[j]] += detail::distance(ds.profiles[i].utilization, ds.profiles[j].utilization);
        }
        double a = sums[own] / static_cast<double>(counts[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cm.k; ++c)
            if (c != own && counts[c] > 0) b = std::min(b, sums[c] / static_cast<double>(counts[c]));
        double denom = std::max(a, b);
        if (denom > 0) total += (b - a) / denom;
    }
    return total / static_cast<double>(ds.size());
}

/// Scans k in [k_min, k_max] and keeps the highest mean silhouette; ties go to the smaller k.
inline std::pair<std::size_t, ClusterModel> select_k(const ProfileDataset& ds, std::size_t k_min, std::size_t k_max,
                                                     std::uint64_t seed, std::size_t max_iter = 300,
                                                     double tol = 1e-6) {
    if (k_min < 2 || k_min > k_max)
        throw InvalidArgument(fmt::format("select_k: invalid range [{}, {}]", k_min, k_max));
    if (k_max > detail::distinct_points(ds))
        throw InvalidArgument(fmt::format("select_k: k_max = {} exceeds the {} distinct points", k_max,
                                          detail::distinct_points(ds)));
    std::optional<ClusterModel> best;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        auto cm = kmeans(ds, k, seed, max_iter, tol);
        cm.silhouette = silhouette_score(ds, cm);
        if (!best || cm.silhouette > best->silhouette) best = std::move(cm);
    }
    return {best->k, std::move(*best)};
}

/// Member closest to each centroid; ties broken by the lexicographically smaller app_id.
inline Representatives representatives(const ProfileDataset& ds, const ClusterModel& cm) {
    Representatives reps(cm.k);
    std::vector<double> best(cm.k, std::numeric_limits<double>::infinity());
    for (std::size_t i : detail::order_by_id(ds)) {
        auto c = cm.assignments[i];
        double d = detail::squared_distance(ds.profiles[i].utilization, cm.centroids[c]);
        if (d < best[c]) {
            best[c] = d;
            reps[c] = ds.profiles[i].app_id;
        }
    }
    for (std::size_t c = 0; c < cm.k; ++c)
        if (reps[c].empty()) throw InvalidArgument(fmt::format("representatives: cluster {} is empty", c));
    return reps;
}

inline nlohmann::json cluster_to_json(const ProfileDataset& ds, const ClusterModel& cm, const Representatives& reps) {
    nlohmann::json j;
    j["k"] = cm.k;
    j["seed"] = cm.seed;
    j["centroids"] = cm.centroids;
    j["assignments"] = cm.assignment_map(ds);
    j["silhouette"] = cm.silhouette;
    nlohmann::json r = nlohmann::json::object();
    for (std::size_t c = 0; c < reps.size(); ++c) r[std::to_string(c)] = reps[c];
    j["representatives"] = r;
    return j;
}

/// Rebuilds the model against `ds`; every app in the dataset must appear in the assignments.
inline std::pair<ClusterModel, Representatives> cluster_from_json(const nlohmann::json& j, const ProfileDataset& ds) {
    ClusterModel cm;
    cm.k = j.at("k").get<std::size_t>();
    cm.seed = j.at("seed").get<std::uint64_t>();
    cm.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
    cm.silhouette = j.at("silhouette").get<double>();
    if (cm.centroids.size() != cm.k) throw DataError("cluster model: centroid count does not match k");
    auto amap = j.at("assignments").get<std::map<std::string, std::size_t>>();
    for (const auto& p : ds.profiles) {
        auto it = amap.find(p.app_id);
        if (it == amap.end()) throw DataError(fmt::format("cluster model: no assignment for '{}'", p.app_id));
        if (it->second >= cm.k) throw DataError(fmt::format("cluster model: bad cluster index for '{}'", p.app_id));
        cm.assignments.push_back(it->second);
    }
    Representatives reps(cm.k);
    for (std::size_t c = 0; c < cm.k; ++c) reps[c] = j.at("representatives").at(std::to_string(c)).get<std::string>();
    return {std::move(cm), std::move(reps)};
}

}  // namespace stresskit
