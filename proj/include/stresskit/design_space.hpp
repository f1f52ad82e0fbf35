#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stresskit/clustering.hpp"
#include "stresskit/csv.hpp"
#include "stresskit/error.hpp"
#include "stresskit/rng.hpp"
#include "stresskit/stressor_model.hpp"

namespace stresskit {

/// M cells on an M^D grid; for every dimension the cells' indices form a permutation of 0..M-1.
struct LhsDesign {
    std::size_t m = 0;
    std::vector<std::string> dims;
    std::vector<std::vector<std::size_t>> cells;  // cells[i][d]
    std::uint64_t seed = 0;

    std::size_t dimension() const noexcept { return dims.size(); }
    bool operator==(const LhsDesign&) const = default;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
    bool operator==(const Interval&) const = default;
};

inline LhsDesign lhs_sample(std::vector<std::string> dims, std::size_t m, std::uint64_t seed) {
    if (dims.empty()) throw InvalidArgument("lhs_sample: need at least one dimension");
    if (m < 1) throw InvalidArgument("lhs_sample: M must be >= 1");
    LhsDesign design{m, std::move(dims), std::vector<std::vector<std::size_t>>(m), seed};
    Rng rng(seed);
    std::vector<std::size_t> perm(m);
    for (std::size_t d = 0; d < design.dimension(); ++d) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < m; ++i) design.cells[i].push_back(perm[i]);
    }
    return design;
}

/// Anonymous dimensions "d1".."dD"; convenient when only the grid matters.
inline LhsDesign lhs_sample(std::size_t d, std::size_t m, std::uint64_t seed) {
    std::vector<std::string> dims;
    for (std::size_t i = 1; i <= d; ++i) dims.push_back(fmt::format("d{}", i));
    return lhs_sample(std::move(dims), m, seed);
}

/// True when every dimension's indices are a permutation of 0..M-1.
inline bool has_latin_property(const LhsDesign& design) {
    if (design.cells.size() != design.m) return false;
    for (std::size_t d = 0; d < design.dimension(); ++d) {
        std::vector<bool> seen(design.m, false);
        for (const auto& cell : design.cells) {
            if (cell.size() != design.dimension() || cell[d] >= design.m || seen[cell[d]]) return false;
            seen[cell[d]] = true;
        }
    }
    return true;
}

/// Per-dimension [(x - delta)/M, (x + 1 + delta)/M], clipped to [0,1].
inline std::vector<Interval> cell_bounds(const LhsDesign& design, std::size_t i, double delta) {
    if (i >= design.m) throw InvalidArgument(fmt::format("cell index {} out of range (M = {})", i, design.m));
    if (!(delta >= 0)) throw InvalidArgument("tolerance delta must be >= 0");
    const double m = static_cast<double>(design.m);
    std::vector<Interval> out;
    for (auto x : design.cells[i]) {
        double xv = static_cast<double>(x);
        out.push_back({std::max(0.0, (xv - delta) / m), std::min(1.0, (xv + 1.0 + delta) / m)});
    }
    return out;
}

inline std::vector<double> cell_center(const LhsDesign& design, std::size_t i) {
    std::vector<double> c;
    for (auto x : design.cells.at(i)) c.push_back((static_cast<double>(x) + 0.5) / static_cast<double>(design.m));
    return c;
}

inline bool in_cell(std::span<const Interval> bounds, std::span<const double> u) {
    for (std::size_t d = 0; d < bounds.size(); ++d)
        if (!bounds[d].contains(u[d])) return false;
    return true;
}

struct KbEntry {
    Combination combo;
    std::vector<double> predicted;  // over the design's dimensions
};

struct KnowledgeBase {
    LhsDesign design;
    double delta = 0.0;
    std::vector<std::vector<KbEntry>> cells;  // parallel to design.cells

    std::size_t filled() const {
        return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.empty(); }));
    }
    double coverage() const { return design.m ? static_cast<double>(filled()) / static_cast<double>(design.m) : 0.0; }
};

/// Places every combination into every cell whose tolerance-widened bounds contain its prediction.
inline KnowledgeBase build_kb_from_predictions(const LhsDesign& design, double delta,
                                               std::span<const Combination> combos,
                                               const std::vector<std::vector<double>>& predictions) {
    if (combos.size() != predictions.size())
        throw DimensionMismatch(fmt::format("build_kb: {} combinations vs {} predictions", combos.size(), predictions.size()));
    KnowledgeBase kb{design, delta, std::vector<std::vector<KbEntry>>(design.m)};
    std::vector<std::vector<Interval>> bounds;
    for (std::size_t i = 0; i < design.m; ++i) bounds.push_back(cell_bounds(design, i, delta));
    for (std::size_t c = 0; c < combos.size(); ++c) {
        if (predictions[c].size() != design.dimension())
            throw DimensionMismatch(fmt::format("build_kb: prediction has {} components, design has {} dimensions",
                                                predictions[c].size(), design.dimension()));
        for (std::size_t i = 0; i < design.m; ++i)
            if (in_cell(bounds[i], predictions[c])) kb.cells[i].push_back({combos[c], predictions[c]});
    }
    return kb;
}

/// Predicts each combination with the stressor model (design dimensions only) and fills the cells.
inline KnowledgeBase build_kb(const LhsDesign& design, double delta, std::span<const Combination> combos,
                              const StressorModel& model, const ProfileDataset& ds, const Representatives& reps) {
    std::vector<std::size_t> dim_idx;
    for (const auto& d : design.dims) {
        auto it = std::find(model.resources.begin(), model.resources.end(), d);
        if (it == model.resources.end())
            throw DimensionMismatch(fmt::format("build_kb: design dimension '{}' is not a model resource", d));
        dim_idx.push_back(static_cast<std::size_t>(it - model.resources.begin()));
    }
    std::vector<std::vector<double>> preds;
    preds.reserve(combos.size());
    for (const auto& c : combos) {
        check_compatible(model, c.k(), ds.space);
        auto x = build_features(c, ds, reps);
        std::vector<double> u;
        for (auto r : dim_idx) u.push_back(std::clamp(model.forests[r].predict(x), 0.0, 1.0));
        preds.push_back(std::move(u));
    }
    return build_kb_from_predictions(design, delta, combos, preds);
}

/// Occupant whose prediction is nearest the cell center; ties go to the smaller indicator vector.
inline const KbEntry& select_stressor(const KnowledgeBase& kb, std::size_t i) {
    if (i >= kb.cells.size()) throw InvalidArgument(fmt::format("cell index {} out of range", i));
    const auto& occupants = kb.cells[i];
    if (occupants.empty()) throw EmptyCellError(i);
    auto center = cell_center(kb.design, i);
    const KbEntry* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& e : occupants) {
        double d = detail::squared_distance(e.predicted, center);
        if (d < best_d || (d == best_d && e.combo < best->combo)) {
            best_d = d;
            best = &e;
        }
    }
    return *best;
}

struct ProjectionPoint {
    std::size_t dim_a, dim_b;
    std::size_t x_a, x_b;
    std::size_t members;
};

struct CoverageReport {
    std::size_t m = 0;
    std::size_t filled = 0;
    double coverage = 0.0;
    std::vector<std::size_t> occupancy;  // members per cell
    std::vector<ProjectionPoint> projections;
};

inline CoverageReport coverage_report(const KnowledgeBase& kb) {
    CoverageReport rep;
    rep.m = kb.design.m;
    for (const auto& c : kb.cells) rep.occupancy.push_back(c.size());
    rep.filled = kb.filled();
    rep.coverage = kb.coverage();
    const auto D = kb.design.dimension();
    for (std::size_t a = 0; a < D; ++a)
        for (std::size_t b = a + 1; b < D; ++b)
            for (std::size_t i = 0; i < kb.design.m; ++i)
                rep.projections.push_back({a, b, kb.design.cells[i][a], kb.design.cells[i][b], kb.cells[i].size()});
    return rep;
}

inline std::string format_coverage_csv(const KnowledgeBase& kb, const CoverageReport& rep) {
    std::string out = "metric,value\n";
    out += fmt::format("M,{}\n", rep.m);
    out += "delta," + csv::num(kb.delta) + "\n";
    out += fmt::format("filled_cells,{}\n", rep.filled);
    out += fmt::format("empty_cells,{}\n", rep.m - rep.filled);
    out += "coverage," + csv::num(rep.coverage) + "\n";
    return out;
}

inline std::string format_occupancy_csv(const KnowledgeBase& kb, const CoverageReport& rep) {
    std::vector<std::string> header{"cell"};
    for (const auto& d : kb.design.dims) header.push_back("x_" + d);
    header.push_back("members");
    std::string out = csv::join(header) + "\n";
    for (std::size_t i = 0; i < rep.m; ++i)
        out += fmt::format("{},{},{}\n", i, csv::join(kb.design.cells[i]), rep.occupancy[i]);
    return out;
}

inline std::string format_projection_csv(const KnowledgeBase& kb, const CoverageReport& rep) {
    std::string out = "dim_a,dim_b,x_a,x_b,members\n";
    for (const auto& p : rep.projections)
        out += fmt::format("{},{},{},{},{}\n", kb.design.dims[p.dim_a], kb.design.dims[p.dim_b], p.x_a, p.x_b, p.members);
    return out;
}

inline nlohmann::json design_to_json(const LhsDesign& d) {
    return {{"M", d.m}, {"dims", d.dims}, {"seed", d.seed}, {"cells", d.cells}};
}

inline LhsDesign design_from_json(const nlohmann::json& j) {
    LhsDesign d{j.at("M").get<std::size_t>(), j.at("dims").get<std::vector<std::string>>(),
                j.at("cells").get<std::vector<std::vector<std::size_t>>>(), j.at("seed").get<std::uint64_t>()};
    if (!has_latin_property(d)) throw DataError("LHS design violates the Latin property");
    return d;
}

inline nlohmann::json kb_to_json(const KnowledgeBase& kb) {
    nlohmann::json j;
    j["M"] = kb.design.m;
    j["delta"] = kb.delta;
    j["dims"] = kb.design.dims;
    j["seed"] = kb.design.seed;
    j["cells"] = nlohmann::json::array();
    for (std::size_t i = 0; i < kb.design.m; ++i) {
        nlohmann::json members = nlohmann::json::array();
        for (const auto& e : kb.cells[i])
            members.push_back({{"combo_bits", e.combo.bits()}, {"predicted_util", e.predicted}});
        j["cells"].push_back({{"index", i}, {"x", kb.design.cells[i]}, {"members", members}});
    }
    return j;
}

inline KnowledgeBase kb_from_json(const nlohmann::json& j) {
    KnowledgeBase kb;
    kb.design.m = j.at("M").get<std::size_t>();
    kb.design.dims = j.at("dims").get<std::vector<std::string>>();
    kb.design.seed = j.at("seed").get<std::uint64_t>();
    kb.delta = j.at("delta").get<double>();
    for (const auto& c : j.at("cells")) {
        if (c.at("index").get<std::size_t>() != kb.cells.size()) throw DataError("knowledge base: cells out of order");
        kb.design.cells.push_back(c.at("x").get<std::vector<std::size_t>>());
        std::vector<KbEntry> members;
        for (const auto& e : c.at("members"))
            members.push_back({Combination::from_bits(e.at("combo_bits").get<std::string>()),
                               e.at("predicted_util").get<std::vector<double>>()});
        kb.cells.push_back(std::move(members));
    }
    if (!has_latin_property(kb.design)) throw DataError("knowledge base: design violates the Latin property");
    return kb;
}

}  // namespace stresskit
