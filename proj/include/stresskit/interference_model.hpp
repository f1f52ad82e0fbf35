#pragma once

#include <algorithm>
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
#include "stresskit/design_space.hpp"
#include "stresskit/error.hpp"
#include "stresskit/profile_store.hpp"
#include "stresskit/regression/metrics.hpp"
#include "stresskit/regression/tree.hpp"
#include "stresskit/rng.hpp"
#include "stresskit/stressor_model.hpp"

namespace stresskit {

struct TargetApplication {
    ApplicationProfile profile;
    QoSParams qos;

    const std::string& app_id() const noexcept { return profile.app_id; }
    double baseline_ms() const noexcept { return qos.base_latency_ms; }
};

struct InterferenceTrainingRun {
    std::size_t cell = 0;
    std::optional<Combination> stressor;  // absent for imported measurements
    std::vector<double> background;       // over the stress dimensions
    double q_ms = 0.0;
};

struct TrainingManifest {
    std::vector<std::size_t> cells_used;
    std::vector<std::size_t> cells_skipped;  // empty knowledge-base cells
};

struct InterferenceTrainingSet {
    std::vector<std::string> dims;
    std::vector<InterferenceTrainingRun> runs;
    TrainingManifest manifest;
};

/// Runs the target against the selected stressor of every non-empty cell, in cell order.
/// The feature vector is the stressors' utilization before the target is deployed.
inline InterferenceTrainingSet gen_training(const TargetApplication& target, const KnowledgeBase& kb,
                                            const ProfileDataset& ds, const Representatives& reps,
                                            const ContentionParams& oracle) {
    if (target.baseline_ms() <= 0) throw InvalidArgument("target baseline latency must be > 0");
    std::vector<std::size_t> dim_idx;
    for (const auto& d : kb.design.dims) dim_idx.push_back(ds.space.index_of(d));

    InterferenceTrainingSet out;
    out.dims = kb.design.dims;
    for (std::size_t i = 0; i < kb.design.m; ++i) {
        if (kb.cells[i].empty()) {
            out.manifest.cells_skipped.push_back(i);
            continue;
        }
        const auto& entry = select_stressor(kb, i);
        auto members = member_profiles(entry.combo, ds, reps);
        auto background = simulate_colocation(std::span<const ApplicationProfile* const>(members), oracle);
        double q = simulate_qos(target.profile, background, target.qos);
        std::vector<double> u;
        for (auto r : dim_idx) u.push_back(background[r]);
        out.runs.push_back({i, entry.combo, std::move(u), q});
        out.manifest.cells_used.push_back(i);
    }
    if (out.runs.empty()) throw InvalidArgument("gen_training: knowledge base has no non-empty cells");
    return out;
}

struct InterferenceModel {
    std::string target;
    std::vector<std::string> dims;
    RegressionTree tree;
    TrainingManifest manifest;
    std::uint64_t seed = 0;
};

inline Matrix training_matrix(const std::vector<InterferenceTrainingRun>& runs, std::vector<double>& q) {
    Matrix X;
    q.clear();
    for (const auto& r : runs) {
        X.append_row(r.background);
        q.push_back(r.q_ms);
    }
    return X;
}

inline InterferenceModel fit_interference(const InterferenceTrainingSet& ts, const std::string& target_id,
                                          const TreeParams& hp, std::uint64_t seed) {
    if (ts.runs.size() < 5)
        throw InvalidArgument(fmt::format("fit_interference: need at least 5 runs, got {}", ts.runs.size()));
    for (const auto& r : ts.runs) {
        if (r.background.size() != ts.dims.size()) throw DimensionMismatch("fit_interference: background dimension mismatch");
        if (!(r.q_ms > 0)) throw InvalidArgument(fmt::format("fit_interference: non-positive latency in cell {}", r.cell));
    }
    std::vector<double> q;
    Matrix X = training_matrix(ts.runs, q);
    InterferenceModel m;
    m.target = target_id;
    m.dims = ts.dims;
    m.tree = fit_tree(X, q, hp, seed);
    m.manifest = ts.manifest;
    m.seed = seed;
    return m;
}

/// Predicted latency (ms) under background utilization over the model's stress dimensions.
inline double predict_qos(const InterferenceModel& m, std::span<const double> u) {
    if (u.size() != m.dims.size())
        throw DimensionMismatch(fmt::format("model expects {} utilization values ({}), got {}", m.dims.size(),
                                            csv::join(m.dims), u.size()));
    return m.tree.predict(u);
}

/// Held-out backgrounds drawn from the same population the stressors span: a cluster
/// combination uniform over all combinations of size 1..d_max, each chosen cluster played by a
/// random member (the target excluded), observed through the oracle. Returned over all resources.
inline std::vector<std::vector<double>> heldout_backgrounds(const ProfileDataset& ds, const ClusterModel& cm,
                                                            const std::string& exclude,
                                                            const ContentionParams& oracle, std::size_t n,
                                                            std::size_t d_max, std::uint64_t seed) {
    if (cm.assignments.size() != ds.size()) throw DimensionMismatch("heldout_backgrounds: cluster model/dataset mismatch");
    std::vector<std::vector<const ApplicationProfile*>> members(cm.k);
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (ds.profiles[i].app_id != exclude) members[cm.assignments[i]].push_back(&ds.profiles[i]);
    std::erase_if(members, [](const auto& m) { return m.empty(); });
    if (members.empty()) throw InvalidArgument("heldout_backgrounds: no applications to co-locate");
    const std::size_t k = members.size();
    d_max = std::clamp<std::size_t>(d_max, 1, k);

    std::vector<double> size_weights;
    for (std::size_t d = 1; d <= d_max; ++d) size_weights.push_back(static_cast<double>(combination_count(k, d) - combination_count(k, d - 1)));
    std::discrete_distribution<std::size_t> pick_size(size_weights.begin(), size_weights.end());

    Rng rng(seed);
    std::vector<std::size_t> clusters(k);
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t size = pick_size(rng) + 1;
        std::iota(clusters.begin(), clusters.end(), std::size_t{0});
        std::shuffle(clusters.begin(), clusters.end(), rng);
        std::vector<const ApplicationProfile*> mix;
        for (std::size_t j = 0; j < size; ++j) {
            const auto& pool = members[clusters[j]];
            mix.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]);
        }
        out.push_back(simulate_colocation(std::span<const ApplicationProfile* const>(mix), oracle));
    }
    return out;
}

/// Oracle truth vs model prediction on full-resource backgrounds.
inline MetricReport evaluate(const InterferenceModel& m, const TargetApplication& target,
                             const std::vector<std::vector<double>>& backgrounds, const ResourceSpace& space) {
    if (backgrounds.empty()) throw InvalidArgument("evaluate: empty held-out set");
    std::vector<std::size_t> dim_idx;
    for (const auto& d : m.dims) dim_idx.push_back(space.index_of(d));
    std::vector<double> truth, pred;
    for (const auto& bg : backgrounds) {
        if (bg.size() != space.size()) throw DimensionMismatch("evaluate: background must cover every resource");
        truth.push_back(simulate_qos(target.profile, bg, target.qos));
        std::vector<double> u;
        for (auto r : dim_idx) u.push_back(bg[r]);
        pred.push_back(predict_qos(m, u));
    }
    return error_metrics(truth, pred);
}

/// Evaluation against measured rows (stress-dimension utilization and observed latency).
inline MetricReport evaluate_measured(const InterferenceModel& m, const std::vector<InterferenceTrainingRun>& rows) {
    if (rows.empty()) throw InvalidArgument("evaluate: empty held-out set");
    std::vector<double> truth, pred;
    for (const auto& r : rows) {
        truth.push_back(r.q_ms);
        pred.push_back(predict_qos(m, r.background));
    }
    return error_metrics(truth, pred);
}

inline std::string format_runs_csv(const InterferenceTrainingSet& ts) {
    std::vector<std::string> header{"cell", "combo_bits"};
    for (std::size_t d = 1; d <= ts.dims.size(); ++d) header.push_back(fmt::format("u_{}", d));
    header.push_back("q_ms");
    std::string out = csv::join(header) + "\n";
    for (const auto& r : ts.runs) {
        out += fmt::format("{},{}", r.cell, r.stressor ? r.stressor->bits() : std::string());
        for (double v : r.background) out += "," + csv::num(v);
        out += "," + csv::num(r.q_ms) + "\n";
    }
    return out;
}

/// Reads `[cell,][combo_bits,]u_1..u_D,q_ms`. `cell` and `combo_bits` are optional so plain
/// measurement tables can be imported; the first `warmup_discard` rows are dropped.
inline InterferenceTrainingSet parse_runs_csv(const csv::Table& t, const std::vector<std::string>& dims,
                                              std::size_t warmup_discard = 0) {
    InterferenceTrainingSet ts;
    ts.dims = dims;
    std::vector<std::size_t> ucols;
    for (std::size_t d = 1; d <= dims.size(); ++d) ucols.push_back(csv::require_column(t, fmt::format("u_{}", d)));
    auto qcol = csv::require_column(t, "q_ms");
    auto cell_col = t.column("cell");
    auto bits_col = t.column("combo_bits");
    for (std::size_t row = warmup_discard; row < t.rows.size(); ++row) {
        InterferenceTrainingRun run;
        run.cell = cell_col ? static_cast<std::size_t>(csv::cell_double(t, row, *cell_col)) : row - warmup_discard;
        if (bits_col && !t.rows[row][*bits_col].empty()) run.stressor = Combination::from_bits(t.rows[row][*bits_col]);
        for (auto c : ucols) {
            double v = csv::cell_double(t, row, c);
            if (!(v >= 0.0 && v <= 1.0))
                throw DataError(fmt::format("{}:{}: column '{}': utilization outside [0,1]", t.source,
                                            t.line_numbers[row], t.header[c]));
            run.background.push_back(v);
        }
        run.q_ms = csv::cell_double(t, row, qcol);
        if (!(run.q_ms > 0))
            throw DataError(fmt::format("{}:{}: column 'q_ms': latency must be > 0", t.source, t.line_numbers[row]));
        ts.runs.push_back(std::move(run));
        ts.manifest.cells_used.push_back(ts.runs.back().cell);
    }
    return ts;
}

inline nlohmann::json interference_to_json(const InterferenceModel& m) {
    nlohmann::json j;
    j["target"] = m.target;
    j["dims"] = m.dims;
    j["seed"] = m.seed;
    j["manifest"] = {{"cells_used", m.manifest.cells_used}, {"cells_skipped", m.manifest.cells_skipped}};
    j["tree"] = tree_to_json(m.tree);
    return j;
}

inline InterferenceModel interference_from_json(const nlohmann::json& j) {
    InterferenceModel m;
    m.target = j.at("target").get<std::string>();
    m.dims = j.at("dims").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.manifest.cells_used = j.at("manifest").at("cells_used").get<std::vector<std::size_t>>();
    m.manifest.cells_skipped = j.at("manifest").at("cells_skipped").get<std::vector<std::size_t>>();
    m.tree = tree_from_json(j.at("tree"));
    if (m.tree.n_features != m.dims.size()) throw DataError("interference model: tree/dimension mismatch");
    return m;
}

}  // namespace stresskit
