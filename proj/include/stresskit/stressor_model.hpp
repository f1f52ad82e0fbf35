#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stresskit/clustering.hpp"
#include "stresskit/contention_oracle.hpp"
#include "stresskit/csv.hpp"
#include "stresskit/error.hpp"
#include "stresskit/profile_store.hpp"
#include "stresskit/regression/forest.hpp"
#include "stresskit/regression/metrics.hpp"
#include "stresskit/rng.hpp"

namespace stresskit {

/// A set of clusters co-located together, identified by its K-bit indicator vector.
/// With one fixed representative per cluster the indicator determines the member apps.
struct Combination {
    std::vector<std::uint8_t> indicator;

    static Combination from_clusters(std::size_t k, std::span<const std::size_t> clusters) {
        Combination c{std::vector<std::uint8_t>(k, 0)};
        for (auto i : clusters) {
            if (i >= k) throw InvalidArgument(fmt::format("cluster index {} out of range for K = {}", i, k));
            c.indicator[i] = 1;
        }
        return c;
    }

    /// Parses a string of '0'/'1' characters, c_1 first.
    static Combination from_bits(std::string_view bits) {
        Combination c;
        for (char ch : bits) {
            if (ch != '0' && ch != '1') throw DataError(fmt::format("invalid combination bits '{}'", bits));
            c.indicator.push_back(ch == '1');
        }
        return c;
    }

    std::string bits() const {
        std::string s;
        for (auto b : indicator) s += b ? '1' : '0';
        return s;
    }

    std::size_t k() const noexcept { return indicator.size(); }
    std::size_t size() const noexcept { return static_cast<std::size_t>(std::count(indicator.begin(), indicator.end(), 1)); }

    std::vector<std::size_t> clusters() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < indicator.size(); ++i)
            if (indicator[i]) out.push_back(i);
        return out;
    }

    auto operator<=>(const Combination&) const = default;
};

inline std::vector<std::string> combination_members(const Combination& c, const Representatives& reps) {
    std::vector<std::string> ids;
    for (auto i : c.clusters()) {
        if (i >= reps.size() || reps[i].empty())
            throw InvalidArgument(fmt::format("no representative for cluster {}", i));
        ids.push_back(reps[i]);
    }
    return ids;
}

inline std::vector<const ApplicationProfile*> member_profiles(const Combination& c, const ProfileDataset& ds,
                                                              const Representatives& reps) {
    std::vector<const ApplicationProfile*> out;
    for (const auto& id : combination_members(c, reps)) out.push_back(&ds.at(id));
    return out;
}

/// Sum over d = 1..d_max of C(K, d).
inline std::uint64_t combination_count(std::size_t k, std::size_t d_max) {
    std::uint64_t total = 0, binom = 1;
    for (std::size_t d = 1; d <= std::min(d_max, k); ++d) {
        binom = binom * (k - d + 1) / d;
        total += binom;
    }
    return total;
}

/// All non-empty cluster subsets of size <= d_max, in lexicographic order of indicator vectors.
inline std::vector<Combination> enumerate_combinations(std::size_t k, std::size_t d_max) {
    if (k < 1 || d_max < 1 || d_max > k)
        throw InvalidArgument(fmt::format("enumerate_combinations: need 1 <= d_max <= K (K = {}, d_max = {})", k, d_max));
    std::vector<Combination> out;
    out.reserve(static_cast<std::size_t>(combination_count(k, d_max)));
    std::vector<std::uint8_t> bits(k, 0);
    // Depth-first, 0 before 1 at each position, yields lexicographic order.
    auto visit = [&](auto&& self, std::size_t pos, std::size_t ones) -> void {
        if (pos == k) {
            if (ones > 0) out.push_back(Combination{bits});
            return;
        }
        bits[pos] = 0;
        self(self, pos + 1, ones);
        if (ones < d_max) {
            bits[pos] = 1;
            self(self, pos + 1, ones + 1);
            bits[pos] = 0;
        }
    };
    visit(visit, 0, 0);
    return out;
}

/// Feature vector [C, U+]: the K cluster indicators followed by summed isolated utilizations.
inline std::vector<double> build_features(const Combination& c, const ProfileDataset& ds, const Representatives& reps) {
    auto members = member_profiles(c, ds, reps);
    std::vector<double> x(c.indicator.begin(), c.indicator.end());
    auto sum = summed_utilization(std::span<const ApplicationProfile* const>(members), ds.space.size());
    x.insert(x.end(), sum.begin(), sum.end());
    return x;
}

struct StressorTrainingSet {
    std::size_t k = 0;
    std::vector<std::string> resources;
    std::vector<Combination> combos;
    Matrix features;  // rows of [C, U+], length K + R
    Matrix targets;   // observed utilization, length R
    std::string source;  // "oracle:<seed>" or "import:<path>"

    std::size_t size() const noexcept { return combos.size(); }
};

/// Observes a seeded uniform subset of ceil(fraction * |combos|) combinations through the oracle.
inline StressorTrainingSet collect_training(const std::vector<Combination>& combos, const ProfileDataset& ds,
                                            const Representatives& reps, const ContentionParams& oracle,
                                            double sample_fraction, std::uint64_t seed) {
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
        throw InvalidArgument("collect_training: sample fraction must be in (0, 1]");
    if (combos.empty()) throw InvalidArgument("collect_training: no combinations");
    const std::size_t take = std::min(
        combos.size(), static_cast<std::size_t>(std::ceil(sample_fraction * static_cast<double>(combos.size()) - 1e-9)));
    std::vector<std::size_t> idx(combos.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(take);
    std::sort(idx.begin(), idx.end());

    StressorTrainingSet ts;
    ts.k = combos.front().k();
    ts.resources = ds.space.names;
    ts.source = fmt::format("oracle:{}", oracle.seed);
    for (auto i : idx) {
        const auto& c = combos[i];
        auto members = member_profiles(c, ds, reps);
        ts.combos.push_back(c);
        ts.features.append_row(build_features(c, ds, reps));
        ts.targets.append_row(simulate_colocation(std::span<const ApplicationProfile* const>(members), oracle));
    }
    return ts;
}

inline std::string format_training_csv(const StressorTrainingSet& ts) {
    std::vector<std::string> header;
    for (std::size_t i = 1; i <= ts.k; ++i) header.push_back(fmt::format("c_{}", i));
    for (std::size_t r = 1; r <= ts.resources.size(); ++r) header.push_back(fmt::format("u_plus_{}", r));
    for (std::size_t r = 1; r <= ts.resources.size(); ++r) header.push_back(fmt::format("target_{}", r));
    std::string out = csv::join(header) + "\n";
    for (std::size_t i = 0; i < ts.size(); ++i) {
        std::vector<std::string> cells;
        for (std::size_t c = 0; c < ts.k; ++c) cells.push_back(ts.combos[i].indicator[c] ? "1" : "0");
        for (std::size_t r = 0; r < ts.resources.size(); ++r) cells.push_back(csv::num(ts.features(i, ts.k + r)));
        for (std::size_t r = 0; r < ts.resources.size(); ++r) cells.push_back(csv::num(ts.targets(i, r)));
        out += csv::join(cells) + "\n";
    }
    return out;
}

/// Reads `c_1..c_K,u_plus_1..u_plus_R,target_1..target_R`; resource names come from the caller.
inline StressorTrainingSet parse_training_csv(const csv::Table& t, const std::vector<std::string>& resources) {
    const std::size_t R = resources.size();
    if (t.header.size() < 2 * R + 1 || (t.header.size() - 2 * R) < 1)
        throw DataError(fmt::format("{}: expected K indicator columns plus {} utilization and {} target columns",
                                    t.source, R, R));
    StressorTrainingSet ts;
    ts.k = t.header.size() - 2 * R;
    ts.resources = resources;
    ts.source = "import:" + t.source;
    for (std::size_t i = 0; i < ts.k; ++i) csv::require_column(t, fmt::format("c_{}", i + 1));
    for (std::size_t r = 0; r < R; ++r) {
        csv::require_column(t, fmt::format("u_plus_{}", r + 1));
        csv::require_column(t, fmt::format("target_{}", r + 1));
    }
    for (std::size_t row = 0; row < t.rows.size(); ++row) {
        Combination c;
        std::vector<double> x, y;
        for (std::size_t i = 0; i < ts.k; ++i) {
            double v = csv::cell_double(t, row, *t.column(fmt::format("c_{}", i + 1)));
            if (v != 0.0 && v != 1.0)
                throw DataError(fmt::format("{}:{}: indicator must be 0 or 1", t.source, t.line_numbers[row]));
            c.indicator.push_back(v == 1.0);
            x.push_back(v);
        }
        for (std::size_t r = 0; r < R; ++r) x.push_back(csv::cell_double(t, row, *t.column(fmt::format("u_plus_{}", r + 1))));
        for (std::size_t r = 0; r < R; ++r) {
            double v = csv::cell_double(t, row, *t.column(fmt::format("target_{}", r + 1)));
            if (!(v >= 0.0 && v <= 1.0))
                throw DataError(fmt::format("{}:{}: target_{} outside [0,1]", t.source, t.line_numbers[row], r + 1));
            y.push_back(v);
        }
        ts.combos.push_back(std::move(c));
        ts.features.append_row(x);
        ts.targets.append_row(y);
    }
    return ts;
}

struct SplitFractions {
    double train = 0.8;
    double test = 0.1;
    double validation = 0.1;

    void check() const {
        if (train <= 0 || test < 0 || validation < 0 || std::abs(train + test + validation - 1.0) > 1e-9)
            throw InvalidArgument("split fractions must be non-negative, train > 0, and sum to 1");
    }

    bool operator==(const SplitFractions&) const = default;
};

/// Seeded shuffle of [0, n) cut into train / test / validation index lists.
struct DataSplit {
    std::vector<std::size_t> train, test, validation;
};

inline DataSplit split_rows(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
    f.check();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n)));
    auto n_test = static_cast<std::size_t>(std::floor(f.test * static_cast<double>(n)));
    DataSplit s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                  idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_test));
    s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_test), idx.end());
    return s;
}

/// R^2 * 100 per split for one resource; empty when undefined (constant targets).
struct ResourceAccuracy {
    std::string resource;
    std::optional<double> test, train, validation;
};

struct StressorModel {
    std::size_t k = 0;
    std::vector<std::string> resources;
    std::vector<std::string> stress_dims;
    std::vector<RandomForest> forests;  // one per resource
    std::vector<ResourceAccuracy> accuracy;
    SplitFractions split;
    std::uint64_t seed = 0;
    std::string training_source;
    std::size_t n_train = 0, n_test = 0, n_validation = 0;

    std::size_t feature_count() const noexcept { return k + resources.size(); }
};

inline std::vector<double> predict_raw(const StressorModel& m, std::span<const double> features) {
    std::vector<double> out;
    out.reserve(m.forests.size());
    for (const auto& f : m.forests) out.push_back(f.predict(features));
    return out;
}

inline StressorModel train_stressor(const StressorTrainingSet& ts, const ResourceSpace& space,
                                    const SplitFractions& split, const ForestParams& hp, std::uint64_t seed) {
    if (ts.size() < 10) throw InvalidArgument(fmt::format("train_stressor: need at least 10 rows, got {}", ts.size()));
    if (ts.resources != space.names) throw DimensionMismatch("train_stressor: training set resources differ from the space");
    auto parts = split_rows(ts.size(), split, derive_seed(seed, "split"));
    Matrix X = ts.features.select_rows(parts.train);
    Matrix Y = ts.targets.select_rows(parts.train);

    StressorModel m;
    m.k = ts.k;
    m.resources = space.names;
    m.stress_dims = space.stress_dims;
    m.split = split;
    m.seed = seed;
    m.training_source = ts.source;
    m.n_train = parts.train.size();
    m.n_test = parts.test.size();
    m.n_validation = parts.validation.size();
    m.forests = fit_forest(X, Y, hp, derive_seed(seed, "forest"));

    auto score = [&](const std::vector<std::size_t>& rows, std::size_t r) -> std::optional<double> {
        std::vector<double> truth, pred;
        for (auto i : rows) {
            truth.push_back(ts.targets(i, r));
            pred.push_back(std::clamp(m.forests[r].predict(ts.features.row(i)), 0.0, 1.0));
        }
        auto r2 = try_r_squared(truth, pred);
        if (r2) return *r2 * 100.0;
        return std::nullopt;
    };
    for (std::size_t r = 0; r < space.size(); ++r)
        m.accuracy.push_back({space.names[r], score(parts.test, r), score(parts.train, r), score(parts.validation, r)});
    return m;
}

inline void check_compatible(const StressorModel& m, std::size_t k, const ResourceSpace& space) {
    if (k != m.k) throw DimensionMismatch(fmt::format("stressor model trained for K = {}, got K = {}", m.k, k));
    if (space.names != m.resources) throw DimensionMismatch("stressor model trained on a different resource space");
}

/// Predicted co-location utilization over all resources, clamped to [0,1].
inline std::vector<double> predict_utilization(const StressorModel& m, const Combination& c, const ProfileDataset& ds,
                                               const Representatives& reps) {
    check_compatible(m, c.k(), ds.space);
    auto raw = predict_raw(m, build_features(c, ds, reps));
    for (auto& v : raw) v = std::clamp(v, 0.0, 1.0);
    return raw;
}

inline std::vector<std::vector<double>> predict_utilization(const StressorModel& m, std::span<const Combination> combos,
                                                            const ProfileDataset& ds, const Representatives& reps) {
    std::vector<std::vector<double>> out;
    out.reserve(combos.size());
    for (const auto& c : combos) out.push_back(predict_utilization(m, c, ds, reps));
    return out;
}

inline std::string format_accuracy(const std::optional<double>& v) {
    return v ? fmt::format("{:.3f}", *v) : std::string("degenerate");
}

/// Per-resource accuracy table (R^2 * 100) in test / train / validation order.
inline std::string format_accuracy_csv(const StressorModel& m) {
    std::string out = "feature,test_accuracy,train_accuracy,validation_accuracy\n";
    for (const auto& a : m.accuracy)
        out += fmt::format("{},{},{},{}\n", a.resource, format_accuracy(a.test), format_accuracy(a.train),
                           format_accuracy(a.validation));
    return out;
}

inline nlohmann::json stressor_to_json(const StressorModel& m) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["k"] = m.k;
    j["resources"] = m.resources;
    j["stress_dims"] = m.stress_dims;
    j["seed"] = m.seed;
    j["split"] = {{"train", m.split.train}, {"test", m.split.test}, {"validation", m.split.validation}};
    j["rows"] = {{"train", m.n_train}, {"test", m.n_test}, {"validation", m.n_validation}};
    j["training_source"] = m.training_source;
    j["accuracy"] = nlohmann::json::array();
    for (const auto& a : m.accuracy)
        j["accuracy"].push_back(
            {{"resource", a.resource}, {"test", opt(a.test)}, {"train", opt(a.train)}, {"validation", opt(a.validation)}});
    j["forests"] = nlohmann::json::array();
    for (const auto& f : m.forests) j["forests"].push_back(forest_to_json(f));
    return j;
}

inline StressorModel stressor_from_json(const nlohmann::json& j) {
    auto opt = [](const nlohmann::json& v) { return v.is_null() ? std::optional<double>{} : v.get<double>(); };
    StressorModel m;
    m.k = j.at("k").get<std::size_t>();
    m.resources = j.at("resources").get<std::vector<std::string>>();
    m.stress_dims = j.at("stress_dims").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split = {j.at("split").at("train").get<double>(), j.at("split").at("test").get<double>(),
               j.at("split").at("validation").get<double>()};
    m.n_train = j.at("rows").at("train").get<std::size_t>();
    m.n_test = j.at("rows").at("test").get<std::size_t>();
    m.n_validation = j.at("rows").at("validation").get<std::size_t>();
    m.training_source = j.at("training_source").get<std::string>();
    for (const auto& a : j.at("accuracy"))
        m.accuracy.push_back({a.at("resource").get<std::string>(), opt(a.at("test")), opt(a.at("train")),
                              opt(a.at("validation"))});
    for (const auto& f : j.at("forests")) m.forests.push_back(forest_from_json(f));
    if (m.forests.size() != m.resources.size()) throw DataError("stressor model: forest count != resource count");
    for (const auto& f : m.forests)
        if (f.n_features != m.feature_count()) throw DataError("stressor model: forest feature count mismatch");
    return m;
}

}  // namespace stresskit
