#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "support.hpp"

using namespace stresskit;
using namespace testkit;

namespace {

struct Fixture {
    ProfileDataset ds;
    ClusterModel cm;
    Representatives reps;
    std::vector<Combination> combos;
};

Fixture make_fixture(std::size_t n_apps, std::size_t k, std::size_t d_max, std::uint64_t seed, double hi = 0.5) {
    Fixture f;
    f.ds = uniform_dataset(unit_space(4, {"r1", "r2", "r3"}), n_apps, seed, 0.0, hi);
    f.cm = kmeans(f.ds, k, seed);
    f.reps = representatives(f.ds, f.cm);
    f.combos = enumerate_combinations(k, d_max);
    return f;
}

ForestParams small_forest() {
    ForestParams hp;
    hp.n_trees = 20;
    return hp;
}

}  // namespace

// ---- combinations --------------------------------------------------------------------------

TEST(Combinations, CountMatchesClosedForm) {
    EXPECT_EQ(enumerate_combinations(13, 8).size(), 7098u);
    for (std::size_t k = 1; k <= 12; ++k)
        for (std::size_t d = 1; d <= k; ++d) {
            EXPECT_EQ(enumerate_combinations(k, d).size(), closed_form_combinations(k, d));
            EXPECT_EQ(combination_count(k, d), closed_form_combinations(k, d));
        }
}

TEST(Combinations, SmallCasesAndOrdering) {
    auto c = enumerate_combinations(3, 1);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c[0].bits(), "001");
    EXPECT_EQ(c[2].bits(), "100");
    EXPECT_EQ(enumerate_combinations(1, 1).size(), 1u);
    auto all = enumerate_combinations(8, 8);
    EXPECT_EQ(all.size(), 255u);
    EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
    std::set<std::string> distinct;
    for (const auto& x : all) {
        EXPECT_GE(x.size(), 1u);
        distinct.insert(x.bits());
    }
    EXPECT_EQ(distinct.size(), all.size());
    EXPECT_THROW(enumerate_combinations(3, 4), InvalidArgument);
    EXPECT_THROW(enumerate_combinations(3, 0), InvalidArgument);
}

TEST(Combinations, BitsRoundTrip) {
    auto c = Combination::from_bits("0110");
    EXPECT_EQ(c.clusters(), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(c.bits(), "0110");
    EXPECT_THROW(Combination::from_bits("01x"), DataError);
}

TEST(Features, IndicatorThenSummedUtilization) {
    auto f = make_fixture(20, 3, 3, 1);
    auto c = Combination::from_bits("101");
    auto x = build_features(c, f.ds, f.reps);
    ASSERT_EQ(x.size(), 3u + 4u);
    EXPECT_EQ(x[0], 1.0);
    EXPECT_EQ(x[1], 0.0);
    for (std::size_t r = 0; r < 4; ++r)
        EXPECT_DOUBLE_EQ(x[3 + r], f.ds.at(f.reps[0]).utilization[r] + f.ds.at(f.reps[2]).utilization[r]);
}

// ---- training data and model ---------------------------------------------------------------

TEST(StressorTraining, SampleSizeAndDeterminism) {
    auto f = make_fixture(40, 6, 4, 2);
    auto oracle = ContentionParams::defaults(4, 3);
    auto a = collect_training(f.combos, f.ds, f.reps, oracle, 0.28, 7);
    EXPECT_EQ(a.size(), static_cast<std::size_t>(std::ceil(0.28 * f.combos.size())));
    auto b = collect_training(f.combos, f.ds, f.reps, oracle, 0.28, 7);
    EXPECT_EQ(a.combos, b.combos);
    EXPECT_EQ(a.targets, b.targets);
    EXPECT_EQ(collect_training(f.combos, f.ds, f.reps, oracle, 1.0, 7).size(), f.combos.size());
}

TEST(StressorTraining, CsvRoundTrip) {
    auto f = make_fixture(30, 4, 4, 3);
    auto ts = collect_training(f.combos, f.ds, f.reps, ContentionParams::defaults(4, 1), 1.0, 1);
    auto back = parse_training_csv(csv::parse_string(format_training_csv(ts)), ts.resources);
    EXPECT_EQ(back.k, ts.k);
    EXPECT_EQ(back.combos, ts.combos);
    EXPECT_EQ(back.features, ts.features);
    EXPECT_EQ(back.targets, ts.targets);
}

TEST(StressorTraining, SplitIsAPartition) {
    for (std::size_t n : {10u, 11u, 97u, 1000u}) {
        auto s = split_rows(n, SplitFractions{}, 5);
        std::vector<std::size_t> all = s.train;
        all.insert(all.end(), s.test.begin(), s.test.end());
        all.insert(all.end(), s.validation.begin(), s.validation.end());
        std::sort(all.begin(), all.end());
        ASSERT_EQ(all.size(), n);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], i);
        EXPECT_EQ(s.train.size(), static_cast<std::size_t>(std::floor(0.8 * n)));
    }
}

TEST(StressorModel, NoiselessLinearOracleIsLearned) {
    auto f = make_fixture(100, 13, 8, 4, 0.12);  // any 8-way sum stays below 1
    auto oracle = ContentionParams::noiseless(4, CombineMode::CappedLinear, 0.0);
    auto ts = collect_training(f.combos, f.ds, f.reps, oracle, 0.28, 1);
    auto model = train_stressor(ts, f.ds.space, SplitFractions{}, ForestParams{}, 9);
    for (const auto& acc : model.accuracy) {
        ASSERT_TRUE(acc.test.has_value()) << acc.resource;
        EXPECT_GE(*acc.test, 99.0) << acc.resource;
    }
}

TEST(StressorModel, TooFewRowsAndMismatchedSpaces) {
    auto f = make_fixture(20, 3, 3, 5);
    auto ts = collect_training(f.combos, f.ds, f.reps, ContentionParams::defaults(4, 1), 1.0, 1);
    EXPECT_THROW(train_stressor(ts, f.ds.space, SplitFractions{}, small_forest(), 1), InvalidArgument);  // 7 rows
    auto big = make_fixture(30, 5, 5, 6);
    auto ts2 = collect_training(big.combos, big.ds, big.reps, ContentionParams::defaults(4, 1), 1.0, 1);
    auto model = train_stressor(ts2, big.ds.space, SplitFractions{}, small_forest(), 1);
    EXPECT_THROW(predict_utilization(model, Combination::from_bits("101"), big.ds, big.reps), DimensionMismatch);
}

TEST(StressorModel, BatchMatchesSingleAndJsonRoundTrips) {
    auto f = make_fixture(40, 5, 5, 7);
    auto ts = collect_training(f.combos, f.ds, f.reps, ContentionParams::defaults(4, 1), 1.0, 1);
    auto model = train_stressor(ts, f.ds.space, SplitFractions{}, small_forest(), 3);
    auto batch = predict_utilization(model, std::span<const Combination>(f.combos), f.ds, f.reps);
    auto back = stressor_from_json(stressor_to_json(model));
    for (std::size_t i = 0; i < f.combos.size(); ++i) {
        auto single = predict_utilization(model, f.combos[i], f.ds, f.reps);
        EXPECT_EQ(batch[i], single);
        EXPECT_EQ(predict_utilization(back, f.combos[i], f.ds, f.reps), single);
        for (double v : single) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
    auto csv_text = format_accuracy_csv(model);
    EXPECT_EQ(csv_text.rfind("feature,test_accuracy,train_accuracy,validation_accuracy\n", 0), 0u);
}

// ---- latin hypercube -----------------------------------------------------------------------

TEST(Lhs, LatinPropertyHolds) {
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        for (std::size_t m : {1u, 7u, 300u}) {
            auto d = lhs_sample(3, m, seed);
            ASSERT_TRUE(has_latin_property(d));
            for (std::size_t dim = 0; dim < 3; ++dim) {
                std::vector<std::size_t> col;
                for (const auto& c : d.cells) col.push_back(c[dim]);
                std::sort(col.begin(), col.end());
                for (std::size_t i = 0; i < m; ++i) EXPECT_EQ(col[i], i);
            }
        }
    auto one = lhs_sample(3, 1, 9);
    EXPECT_EQ(one.cells[0], (std::vector<std::size_t>{0, 0, 0}));
    EXPECT_EQ(lhs_sample(3, 50, 4), lhs_sample(3, 50, 4));
    EXPECT_NE(lhs_sample(3, 50, 4), lhs_sample(3, 50, 5));
    EXPECT_THROW(lhs_sample(3, 0, 1), InvalidArgument);
}

TEST(Lhs, DetectsBrokenDesigns) {
    auto d = lhs_sample(2, 5, 1);
    d.cells[0][1] = d.cells[1][1];
    EXPECT_FALSE(has_latin_property(d));
}

TEST(CellBounds, ClosedForms) {
    LhsDesign d{300, {"a"}, std::vector<std::vector<std::size_t>>(300, std::vector<std::size_t>{0}), 0};
    d.cells[150][0] = 150;
    auto b0 = cell_bounds(d, 150, 0.0);
    EXPECT_DOUBLE_EQ(b0[0].lo, 0.5);
    EXPECT_DOUBLE_EQ(b0[0].hi, 151.0 / 300.0);
    auto b1 = cell_bounds(d, 150, 0.1);
    EXPECT_DOUBLE_EQ(b1[0].lo, 149.9 / 300.0);
    EXPECT_DOUBLE_EQ(b1[0].hi, 151.1 / 300.0);
    auto edge = cell_bounds(d, 0, 0.1);
    EXPECT_EQ(edge[0].lo, 0.0);
    EXPECT_THROW(cell_bounds(d, 0, -0.1), InvalidArgument);
}

// ---- knowledge base ------------------------------------------------------------------------

TEST(KnowledgeBase, MembershipMatchesIntervalOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    auto design = lhs_sample(3, 10, 2);
    auto combos = enumerate_combinations(8, 3);
    combos.resize(20);
    std::vector<std::vector<double>> preds;
    for (std::size_t i = 0; i < combos.size(); ++i) preds.push_back({u(rng), u(rng), u(rng)});
    // Pin one prediction to a cell center so at least one cell is certainly filled.
    preds[0] = cell_center(design, 4);
    for (double delta : {0.0, 0.1, 0.5}) {
        auto kb = build_kb_from_predictions(design, delta, combos, preds);
        for (std::size_t i = 0; i < design.m; ++i) {
            std::set<std::string> got, want;
            for (const auto& e : kb.cells[i]) got.insert(e.combo.bits());
            for (std::size_t c = 0; c < combos.size(); ++c)
                if (membership_oracle(design, i, delta, preds[c])) want.insert(combos[c].bits());
            EXPECT_EQ(got, want) << "cell " << i << " delta " << delta;
        }
        EXPECT_FALSE(kb.cells[4].empty());
    }
}

TEST(KnowledgeBase, WiderToleranceIsASuperset) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    auto design = lhs_sample(3, 12, 6);
    auto combos = enumerate_combinations(10, 2);
    std::vector<std::vector<double>> preds;
    for (std::size_t i = 0; i < combos.size(); ++i) preds.push_back({u(rng), u(rng), u(rng)});
    std::vector<double> deltas{0.0, 0.05, 0.1, 0.5, 1.0, 3.0};
    for (std::size_t k = 1; k < deltas.size(); ++k) {
        auto narrow = build_kb_from_predictions(design, deltas[k - 1], combos, preds);
        auto wide = build_kb_from_predictions(design, deltas[k], combos, preds);
        for (std::size_t i = 0; i < design.m; ++i) {
            std::set<Combination> w;
            for (const auto& e : wide.cells[i]) w.insert(e.combo);
            for (const auto& e : narrow.cells[i]) EXPECT_TRUE(w.count(e.combo));
        }
    }
}

TEST(KnowledgeBase, StoredEntriesPassMembership) {
    auto f = make_fixture(40, 6, 4, 9);
    auto ts = collect_training(f.combos, f.ds, f.reps, ContentionParams::defaults(4, 1), 1.0, 1);
    auto model = train_stressor(ts, f.ds.space, SplitFractions{}, small_forest(), 3);
    auto design = lhs_sample(std::vector<std::string>{"r1", "r2", "r3"}, 8, 2);
    auto kb = build_kb(design, 0.5, f.combos, model, f.ds, f.reps);
    for (std::size_t i = 0; i < design.m; ++i)
        for (const auto& e : kb.cells[i]) EXPECT_TRUE(membership_oracle(design, i, 0.5, e.predicted));
    auto back = kb_from_json(kb_to_json(kb));
    EXPECT_EQ(back.design, kb.design);
    for (std::size_t i = 0; i < design.m; ++i) {
        ASSERT_EQ(back.cells[i].size(), kb.cells[i].size());
        for (std::size_t e = 0; e < kb.cells[i].size(); ++e) {
            EXPECT_EQ(back.cells[i][e].combo, kb.cells[i][e].combo);
            EXPECT_EQ(back.cells[i][e].predicted, kb.cells[i][e].predicted);
        }
    }
}

TEST(SelectStressor, NearestToCenterMatchesScan) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 1);
    auto design = lhs_sample(3, 4, 3);
    auto combos = enumerate_combinations(9, 3);
    std::vector<std::vector<double>> preds;
    for (std::size_t i = 0; i < combos.size(); ++i) preds.push_back({u(rng), u(rng), u(rng)});
    auto kb = build_kb_from_predictions(design, 0.5, combos, preds);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < design.m; ++i) {
        if (kb.cells[i].empty()) {
            EXPECT_THROW(select_stressor(kb, i), EmptyCellError);
            continue;
        }
        EXPECT_EQ(select_stressor(kb, i).combo, kb.cells[i][nearest_entry_scan(kb, i)].combo);
        if (kb.cells[i].size() >= 5) ++checked;
    }
    EXPECT_GT(checked, 0u);
}

TEST(SelectStressor, TiesGoToSmallerIndicator) {
    auto design = lhs_sample(1, 1, 0);
    std::vector<Combination> combos{Combination::from_bits("10"), Combination::from_bits("01")};
    std::vector<std::vector<double>> preds{{0.4}, {0.6}};  // equidistant from 0.5
    auto kb = build_kb_from_predictions(design, 0.0, combos, preds);
    EXPECT_EQ(select_stressor(kb, 0).combo.bits(), "01");
    try {
        auto empty = build_kb_from_predictions(lhs_sample(1, 2, 0), 0.0, {}, {});
        select_stressor(empty, 1);
        FAIL();
    } catch (const EmptyCellError& e) {
        EXPECT_EQ(std::string(e.what()).rfind("EMPTY_CELL", 0), 0u);
    }
}

TEST(Coverage, RecountAndEdgeCases) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    auto design = lhs_sample(2, 10, 1);
    auto combos = enumerate_combinations(6, 2);
    std::vector<std::vector<double>> preds;
    for (std::size_t i = 0; i < combos.size(); ++i) preds.push_back({u(rng), u(rng)});
    auto kb = build_kb_from_predictions(design, 0.3, combos, preds);
    auto rep = coverage_report(kb);
    std::size_t filled = 0;
    for (std::size_t i = 0; i < design.m; ++i) {
        bool any = false;
        for (const auto& p : preds) any = any || membership_oracle(design, i, 0.3, p);
        filled += any;
        EXPECT_EQ(rep.occupancy[i], kb.cells[i].size());
    }
    EXPECT_EQ(rep.filled, filled);
    EXPECT_EQ(rep.coverage, static_cast<double>(filled) / 10.0);

    auto none = coverage_report(build_kb_from_predictions(design, 0.1, {}, {}));
    EXPECT_EQ(none.coverage, 0.0);
    std::vector<Combination> one{Combination::from_bits("1")};
    std::vector<std::vector<double>> mid{{0.5, 0.5}};
    auto all = coverage_report(build_kb_from_predictions(design, 10.0, one, mid));
    EXPECT_EQ(all.coverage, 1.0);
}
