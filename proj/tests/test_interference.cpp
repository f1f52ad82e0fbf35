#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace stresskit;
using namespace testkit;

namespace {

const std::vector<std::string> kDims{"r1", "r2", "r3"};

TargetApplication make_target(const ProfileDataset& ds, double sigma = 0.0) {
    QoSParams q;
    q.weights = {1.0 / 3, 1.0 / 3, 1.0 / 3, 0.0};
    q.sigma = sigma;
    return {ds.profiles.front(), q};
}

struct World {
    ProfileDataset ds;
    ClusterModel cm;
    Representatives reps;
    std::vector<Combination> combos;
    KnowledgeBase kb;
};

World make_world(std::size_t m, double delta, std::uint64_t seed = 1) {
    World w;
    w.ds = uniform_dataset(unit_space(4, kDims), 40, seed, 0.0, 0.5);
    w.cm = kmeans(w.ds, 6, seed);
    w.reps = representatives(w.ds, w.cm);
    w.combos = enumerate_combinations(6, 6);
    std::vector<std::vector<double>> preds;
    auto oracle = ContentionParams::noiseless(4, CombineMode::Saturating);
    for (const auto& c : w.combos) {
        auto members = member_profiles(c, w.ds, w.reps);
        auto u = simulate_colocation(std::span<const ApplicationProfile* const>(members), oracle);
        preds.push_back({u[0], u[1], u[2]});
    }
    w.kb = build_kb_from_predictions(lhs_sample(kDims, m, seed), delta, w.combos, preds);
    return w;
}

}  // namespace

TEST(GenTraining, OneRunPerFilledCellAndManifestPartitions) {
    auto w = make_world(20, 5.0);
    auto oracle = ContentionParams::noiseless(4, CombineMode::Saturating);
    auto ts = gen_training(make_target(w.ds), w.kb, w.ds, w.reps, oracle);
    EXPECT_EQ(ts.runs.size(), w.kb.filled());
    std::set<std::size_t> all;
    for (auto c : ts.manifest.cells_used) all.insert(c);
    for (auto c : ts.manifest.cells_skipped) {
        EXPECT_TRUE(w.kb.cells[c].empty());
        EXPECT_TRUE(all.insert(c).second);
    }
    EXPECT_EQ(all.size(), w.kb.design.m);
    for (const auto& run : ts.runs) {
        ASSERT_TRUE(run.stressor.has_value());
        EXPECT_EQ(*run.stressor, select_stressor(w.kb, run.cell).combo);
        EXPECT_EQ(run.background.size(), 3u);
        EXPECT_GE(run.q_ms, 100.0);
    }
}

TEST(GenTraining, SingleFilledCellGivesSingleRun) {
    auto design = lhs_sample(kDims, 4, 2);
    auto ds = uniform_dataset(unit_space(4, kDims), 10, 2);
    auto cm = kmeans(ds, 2, 2);
    auto reps = representatives(ds, cm);
    std::vector<Combination> combos{Combination::from_bits("01")};
    auto kb = build_kb_from_predictions(design, 0.0, combos, {cell_center(design, 2)});
    auto ts = gen_training(make_target(ds), kb, ds, reps, ContentionParams::defaults(4, 1));
    ASSERT_EQ(ts.runs.size(), 1u);
    EXPECT_EQ(ts.runs[0].cell, 2u);
    EXPECT_EQ(ts.manifest.cells_skipped, (std::vector<std::size_t>{0, 1, 3}));

    auto empty = build_kb_from_predictions(design, 0.0, {}, {});
    EXPECT_THROW(gen_training(make_target(ds), empty, ds, reps, ContentionParams::defaults(4, 1)), InvalidArgument);
}

TEST(FitInterference, IsATreeOverTheRuns) {
    auto w = make_world(30, 8.0);
    auto ts = gen_training(make_target(w.ds), w.kb, w.ds, w.reps, ContentionParams::noiseless(4, CombineMode::Saturating));
    ASSERT_GE(ts.runs.size(), 5u);
    TreeParams hp{TreeParams::unlimited_depth, 1, 0};
    auto m = fit_interference(ts, "a00", hp, 4);
    std::vector<double> q;
    auto X = training_matrix(ts.runs, q);
    auto direct = fit_tree(X, q, hp, 4);
    EXPECT_EQ(m.tree, direct);
    // Unlimited depth with single-sample leaves reproduces distinct noiseless training rows.
    for (const auto& run : ts.runs) {
        std::size_t same = 0;
        for (const auto& other : ts.runs) same += other.background == run.background;
        if (same == 1) EXPECT_EQ(predict_qos(m, run.background), run.q_ms);
    }
    auto back = interference_from_json(interference_to_json(m));
    EXPECT_EQ(back.tree, m.tree);
    EXPECT_EQ(back.manifest.cells_used, m.manifest.cells_used);
    EXPECT_EQ(back.manifest.cells_skipped, m.manifest.cells_skipped);
}

TEST(FitInterference, IdenticalBackgroundsGiveOneLeaf) {
    InterferenceTrainingSet ts;
    ts.dims = kDims;
    for (std::size_t i = 0; i < 6; ++i) ts.runs.push_back({i, std::nullopt, {0.3, 0.3, 0.3}, 100.0 + static_cast<double>(i)});
    auto m = fit_interference(ts, "t", TreeParams{}, 1);
    EXPECT_EQ(m.tree.nodes.size(), 1u);
    std::vector<double> u{0.9, 0.9, 0.9};
    EXPECT_DOUBLE_EQ(predict_qos(m, u), 102.5);
}

TEST(FitInterference, InputChecks) {
    InterferenceTrainingSet ts;
    ts.dims = kDims;
    for (std::size_t i = 0; i < 4; ++i) ts.runs.push_back({i, std::nullopt, {0.1 * i, 0.2, 0.3}, 100.0});
    EXPECT_THROW(fit_interference(ts, "t", TreeParams{}, 1), InvalidArgument);
    ts.runs.push_back({4, std::nullopt, {0.5, 0.2}, 100.0});
    EXPECT_THROW(fit_interference(ts, "t", TreeParams{}, 1), DimensionMismatch);
    ts.runs.back().background.push_back(0.1);
    auto m = fit_interference(ts, "t", TreeParams{}, 1);
    std::vector<double> short_u{0.1, 0.2};
    EXPECT_THROW(predict_qos(m, short_u), DimensionMismatch);
}

TEST(RunsCsv, RoundTripAndPlainImport) {
    auto w = make_world(20, 5.0);
    auto ts = gen_training(make_target(w.ds), w.kb, w.ds, w.reps, ContentionParams::defaults(4, 3));
    auto back = parse_runs_csv(csv::parse_string(format_runs_csv(ts)), kDims);
    ASSERT_EQ(back.runs.size(), ts.runs.size());
    for (std::size_t i = 0; i < ts.runs.size(); ++i) {
        EXPECT_EQ(back.runs[i].cell, ts.runs[i].cell);
        EXPECT_EQ(back.runs[i].stressor, ts.runs[i].stressor);
        EXPECT_EQ(back.runs[i].background, ts.runs[i].background);
        EXPECT_EQ(back.runs[i].q_ms, ts.runs[i].q_ms);
    }

    auto plain = parse_runs_csv(csv::parse_string("u_1,u_2,u_3,q_ms\n0.1,0.1,0.1,200\n0.2,0.2,0.2,110\n0.3,0.3,0.3,120\n"),
                                kDims, 1);
    ASSERT_EQ(plain.runs.size(), 2u);
    EXPECT_EQ(plain.runs[0].cell, 0u);
    EXPECT_FALSE(plain.runs[0].stressor.has_value());
    EXPECT_EQ(plain.runs[0].q_ms, 110.0);
    EXPECT_THROW(parse_runs_csv(csv::parse_string("u_1,u_2,q_ms\n0.1,0.1,100\n"), kDims), DataError);
    EXPECT_THROW(parse_runs_csv(csv::parse_string("u_1,u_2,u_3,q_ms\n0.1,1.1,0.1,100\n"), kDims), DataError);
    EXPECT_THROW(parse_runs_csv(csv::parse_string("u_1,u_2,u_3,q_ms\n0.1,0.1,0.1,0\n"), kDims), DataError);
}

TEST(Heldout, ExcludesTargetAndIsDeterministic) {
    auto ds = dataset_from_rows(unit_space(2), {{0.9, 0.9}, {0.1, 0.0}, {0.0, 0.1}, {0.1, 0.1}});
    ClusterModel cm;
    cm.k = 2;
    cm.assignments = {0, 0, 1, 1};
    cm.centroids = {{0.5, 0.45}, {0.05, 0.1}};
    auto oracle = ContentionParams::noiseless(2, CombineMode::Saturating);
    auto a = heldout_backgrounds(ds, cm, "a00", oracle, 300, 2, 5);
    EXPECT_EQ(a, heldout_backgrounds(ds, cm, "a00", oracle, 300, 2, 5));
    ASSERT_EQ(a.size(), 300u);
    for (const auto& bg : a) {
        ASSERT_EQ(bg.size(), 2u);
        EXPECT_LT(bg[0], 0.5);  // the heavy target never plays a cluster
    }
}

TEST(Evaluate, ReportsAgainstTheOracle) {
    auto w = make_world(40, 10.0);
    auto target = make_target(w.ds);
    auto oracle = ContentionParams::noiseless(4, CombineMode::Saturating);
    auto ts = gen_training(target, w.kb, w.ds, w.reps, oracle);
    auto m = fit_interference(ts, target.app_id(), TreeParams{}, 1);
    auto bgs = heldout_backgrounds(w.ds, w.cm, target.app_id(), oracle, 100, 6, 9);
    auto rep = evaluate(m, target, bgs, w.ds.space);
    EXPECT_EQ(rep.ape_cdf.size(), 100u);
    EXPECT_GE(rep.mape, 0.0);
    auto measured = evaluate_measured(m, ts.runs);
    EXPECT_EQ(measured.ape_cdf.size(), ts.runs.size());
    std::vector<std::vector<double>> bad{{0.1, 0.2, 0.3}};
    EXPECT_THROW(evaluate(m, target, bad, w.ds.space), DimensionMismatch);
}
