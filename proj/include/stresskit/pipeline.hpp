#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stresskit/clustering.hpp"
#include "stresskit/config.hpp"
#include "stresskit/contention_oracle.hpp"
#include "stresskit/csv.hpp"
#include "stresskit/design_space.hpp"
#include "stresskit/error.hpp"
#include "stresskit/interference_model.hpp"
#include "stresskit/profile_store.hpp"
#include "stresskit/stressor_model.hpp"

namespace stresskit::pipeline {

namespace fs = std::filesystem;

namespace artifact {
inline constexpr const char* config = "config.cfg";
inline constexpr const char* manifest = "manifest.json";
inline constexpr const char* profiles = "profiles_normalized.csv";
inline constexpr const char* validation = "validation.json";
inline constexpr const char* clusters = "clusters.json";
inline constexpr const char* combos = "combos.csv";
inline constexpr const char* stressor_training = "stressor_training.csv";
inline constexpr const char* stressor_model = "stressor_model.json";
inline constexpr const char* stressor_accuracy = "stressor_accuracy.csv";
inline constexpr const char* lhs_design = "lhs_design.json";
inline constexpr const char* kb = "kb.json";
inline constexpr const char* coverage = "coverage.csv";
inline constexpr const char* occupancy = "cell_occupancy.csv";
inline constexpr const char* projections = "coverage_projections.csv";
inline constexpr const char* interference_training = "interference_training.csv";
inline constexpr const char* interference_model = "interference_model.json";
inline constexpr const char* eval_metrics = "eval_metrics.csv";
inline constexpr const char* eval_cdf = "eval_cdf.csv";
}  // namespace artifact

/// Process exit codes shared by the CLI.
enum ExitCode : int { kSuccess = 0, kUsage = 2, kDataError = 3, kStageFailure = 4 };

/// A pipeline stage failed; carries the stage name and the exit code to report.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& message, int exit_code)
        : Error(fmt::format("stage '{}' failed: {}", stage, message)), stage_(std::move(stage)), exit_code_(exit_code) {}

    const std::string& stage() const noexcept { return stage_; }
    int exit_code() const noexcept { return exit_code_; }

private:
    std::string stage_;
    int exit_code_;
};

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names{"ingest", "cluster",           "combos",    "train-stressor",
                                                "doe",    "build-kb", "train-interference", "evaluate"};
    return names;
}

/// Optional imported measurements that replace oracle data in individual stages.
struct ImportOptions {
    std::optional<std::string> stressor_training_csv;
    std::optional<std::string> interference_runs_csv;
    std::size_t warmup_discard = 0;
    std::optional<std::string> heldout_csv;
};

namespace detail {

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError(fmt::format("{}: cannot open (has the producing stage run?)", p.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline nlohmann::json read_json(const fs::path& p) {
    try {
        return nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{}: {}", p.string(), e.what()));
    }
}

inline void write_json(const fs::path& p, const nlohmann::json& j, int indent = 2) {
    csv::write_file(p.string(), j.dump(indent) + "\n");
}

inline nlohmann::json load_manifest(const fs::path& dir) {
    if (fs::exists(dir / artifact::manifest)) return read_json(dir / artifact::manifest);
    nlohmann::json m;
    m["stages"] = nlohmann::json::array();
    for (const auto& s : stage_names()) m["stages"].push_back({{"name", s}, {"status", "pending"}, {"artifacts", nlohmann::json::array()}});
    return m;
}

inline void mark(const fs::path& dir, const std::string& stage, const std::string& status,
                 const std::vector<std::string>& artifacts, const std::string& error = {}) {
    auto m = load_manifest(dir);
    for (auto& s : m["stages"]) {
        if (s["name"] != stage) continue;
        s["status"] = status;
        s["artifacts"] = artifacts;
        if (error.empty())
            s.erase("error");
        else
            s["error"] = error;
    }
    bool complete = true;
    for (const auto& s : m["stages"]) complete = complete && s["status"] == "complete";
    m["complete"] = complete;
    write_json(dir / artifact::manifest, m);
}

/// Runs one stage, recording its completion state and translating failures into StageError.
inline void run_stage(const fs::path& dir, const std::string& stage, const std::vector<std::string>& artifacts,
                      const std::function<void()>& body) {
    fs::create_directories(dir);
    try {
        body();
    } catch (const StageError&) {
        throw;
    } catch (const DataError& e) {
        mark(dir, stage, "failed", {}, e.what());
        throw StageError(stage, e.what(), kDataError);
    } catch (const std::exception& e) {
        mark(dir, stage, "failed", {}, e.what());
        throw StageError(stage, e.what(), kStageFailure);
    }
    mark(dir, stage, "complete", artifacts);
}

inline ProfileDataset load_normalized(const PipelineConfig& cfg, const fs::path& dir) {
    return load_profiles((dir / artifact::profiles).string(), cfg.resource_space().unit());
}

struct ClusterState {
    ClusterModel model;
    Representatives reps;
};

inline ClusterState load_clusters(const ProfileDataset& ds, const fs::path& dir) {
    auto [cm, reps] = cluster_from_json(read_json(dir / artifact::clusters), ds);
    return {std::move(cm), std::move(reps)};
}

inline std::vector<Combination> load_combos(const fs::path& dir) {
    auto t = csv::read_file((dir / artifact::combos).string());
    auto col = csv::require_column(t, "combo_bits");
    std::vector<Combination> out;
    for (const auto& row : t.rows) out.push_back(Combination::from_bits(row[col]));
    return out;
}

inline std::size_t effective_d_max(const PipelineConfig& cfg, std::size_t k) {
    return std::min(cfg.size("combos.d_max"), k);
}

inline TargetApplication make_target(const PipelineConfig& cfg, const ProfileDataset& ds) {
    std::string id = cfg.raw("target.app_id");
    if (id.empty()) id = ds.profiles.front().app_id;
    const ApplicationProfile* profile = nullptr;
    for (const auto& p : ds.profiles)
        if (p.app_id == id) profile = &p;
    if (!profile) throw DataError(fmt::format("target application '{}' is not in the profile dataset", id));
    return {*profile, cfg.qos(ds.space)};
}

}  // namespace detail

inline nlohmann::json validation_to_json(const ValidationReport& rep) {
    nlohmann::json j;
    j["out_of_range"] = nlohmann::json::array();
    for (const auto& e : rep.out_of_range)
        j["out_of_range"].push_back({{"app_id", e.app_id}, {"resource", e.resource}, {"fraction", e.fraction}});
    j["constant_columns"] = rep.constant_columns;
    j["duplicate_vectors"] = nlohmann::json::array();
    for (const auto& [a, b] : rep.duplicate_vectors) j["duplicate_vectors"].push_back({a, b});
    j["clean"] = rep.empty();
    return j;
}

inline void stage_ingest(const PipelineConfig& cfg, const fs::path& dir, const std::string& profiles_path) {
    detail::run_stage(dir, "ingest", {artifact::validation, artifact::profiles}, [&] {
        auto ds = load_profiles(profiles_path, cfg.resource_space());
        detail::write_json(dir / artifact::validation, validation_to_json(validate(ds)));
        csv::write_file((dir / artifact::profiles).string(), format_profiles(ds));
    });
}

inline void stage_cluster(const PipelineConfig& cfg, const fs::path& dir) {
    detail::run_stage(dir, "cluster", {artifact::clusters}, [&] {
        auto ds = detail::load_normalized(cfg, dir);
        auto k_max = std::min(cfg.size("cluster.k_max"), ::stresskit::detail::distinct_points(ds));
        auto k_min = cfg.size("cluster.k_min");
        if (k_min > k_max)
            throw InvalidArgument(fmt::format("only {} distinct profiles; cannot search k in [{}, {}]", k_max, k_min,
                                              cfg.size("cluster.k_max")));
        auto [k, cm] = select_k(ds, k_min, k_max, cfg.stage_seed("cluster"), cfg.size("cluster.max_iter"),
                                cfg.number("cluster.tol"));
        detail::write_json(dir / artifact::clusters, cluster_to_json(ds, cm, representatives(ds, cm)));
    });
}

inline void stage_combos(const PipelineConfig& cfg, const fs::path& dir) {
    detail::run_stage(dir, "combos", {artifact::combos}, [&] {
        auto ds = detail::load_normalized(cfg, dir);
        auto cs = detail::load_clusters(ds, dir);
        auto combos = enumerate_combinations(cs.model.k, detail::effective_d_max(cfg, cs.model.k));
        std::string out = "index,combo_bits,size,members\n";
        for (std::size_t i = 0; i < combos.size(); ++i)
            out += fmt::format("{},{},{},{}\n", i, combos[i].bits(), combos[i].size(),
                               csv::join(combination_members(combos[i], cs.reps), ";"));
        csv::write_file((dir / artifact::combos).string(), out);
    });
}

inline void stage_train_stressor(const PipelineConfig& cfg, const fs::path& dir, const ImportOptions& imports = {}) {
    detail::run_stage(dir, "train-stressor",
                      {artifact::stressor_training, artifact::stressor_model, artifact::stressor_accuracy}, [&] {
        auto ds = detail::load_normalized(cfg, dir);
        auto cs = detail::load_clusters(ds, dir);
        StressorTrainingSet ts;
        if (imports.stressor_training_csv) {
            ts = parse_training_csv(csv::read_file(*imports.stressor_training_csv), ds.space.names);
            if (ts.k != cs.model.k)
                throw DataError(fmt::format("{}: {} indicator columns but K = {}", *imports.stressor_training_csv,
                                            ts.k, cs.model.k));
        } else {
            ts = collect_training(detail::load_combos(dir), ds, cs.reps, cfg.oracle(ds.space.size()),
                                  cfg.number("combos.sample_fraction"), cfg.stage_seed("combos"));
        }
        csv::write_file((dir / artifact::stressor_training).string(), format_training_csv(ts));
        auto model = train_stressor(ts, ds.space, cfg.split(), cfg.forest(), cfg.stage_seed("stressor"));
        detail::write_json(dir / artifact::stressor_model, stressor_to_json(model), -1);
        csv::write_file((dir / artifact::stressor_accuracy).string(), format_accuracy_csv(model));
    });
}

inline void stage_doe(const PipelineConfig& cfg, const fs::path& dir) {
    detail::run_stage(dir, "doe", {artifact::lhs_design}, [&] {
        auto space = cfg.resource_space();
        auto design = lhs_sample(space.stress_dims, cfg.size("lhs.M"), cfg.stage_seed("lhs"));
        detail::write_json(dir / artifact::lhs_design, design_to_json(design), -1);
    });
}

inline void stage_build_kb(const PipelineConfig& cfg, const fs::path& dir) {
    detail::run_stage(dir, "build-kb", {artifact::kb, artifact::coverage, artifact::occupancy, artifact::projections},
                      [&] {
        auto ds = detail::load_normalized(cfg, dir);
        auto cs = detail::load_clusters(ds, dir);
        auto combos = detail::load_combos(dir);
        auto model = stressor_from_json(detail::read_json(dir / artifact::stressor_model));
        auto design = design_from_json(detail::read_json(dir / artifact::lhs_design));
        auto kb = build_kb(design, cfg.number("kb.delta"), combos, model, ds, cs.reps);
        auto rep = coverage_report(kb);
        detail::write_json(dir / artifact::kb, kb_to_json(kb), -1);
        csv::write_file((dir / artifact::coverage).string(), format_coverage_csv(kb, rep));
        csv::write_file((dir / artifact::occupancy).string(), format_occupancy_csv(kb, rep));
        csv::write_file((dir / artifact::projections).string(), format_projection_csv(kb, rep));
    });
}

inline void stage_train_interference(const PipelineConfig& cfg, const fs::path& dir,
                                     const ImportOptions& imports = {}) {
    detail::run_stage(dir, "train-interference", {artifact::interference_training, artifact::interference_model}, [&] {
        auto ds = detail::load_normalized(cfg, dir);
        auto target = detail::make_target(cfg, ds);
        InterferenceTrainingSet ts;
        if (imports.interference_runs_csv) {
            ts = parse_runs_csv(csv::read_file(*imports.interference_runs_csv), ds.space.stress_dims,
                                imports.warmup_discard);
        } else {
            auto cs = detail::load_clusters(ds, dir);
            auto kb = kb_from_json(detail::read_json(dir / artifact::kb));
            ts = gen_training(target, kb, ds, cs.reps, cfg.oracle(ds.space.size()));
        }
        csv::write_file((dir / artifact::interference_training).string(), format_runs_csv(ts));
        auto model = fit_interference(ts, target.app_id(), cfg.interference_tree(), cfg.stage_seed("interference"));
        detail::write_json(dir / artifact::interference_model, interference_to_json(model), -1);
    });
}

inline void stage_evaluate(const PipelineConfig& cfg, const fs::path& dir, const ImportOptions& imports = {}) {
    detail::run_stage(dir, "evaluate", {artifact::eval_metrics, artifact::eval_cdf}, [&] {
        auto model = interference_from_json(detail::read_json(dir / artifact::interference_model));
        MetricReport rep;
        if (imports.heldout_csv) {
            auto rows = parse_runs_csv(csv::read_file(*imports.heldout_csv), model.dims, imports.warmup_discard);
            rep = evaluate_measured(model, rows.runs);
        } else {
            auto ds = detail::load_normalized(cfg, dir);
            auto target = detail::make_target(cfg, ds);
            auto cs = detail::load_clusters(ds, dir);
            auto backgrounds = heldout_backgrounds(ds, cs.model, target.app_id(), cfg.oracle(ds.space.size()),
                                                   cfg.size("eval.n_heldout"), detail::effective_d_max(cfg, cs.model.k),
                                                   cfg.stage_seed("eval"));
            rep = evaluate(model, target, backgrounds, ds.space);
        }
        csv::write_file((dir / artifact::eval_metrics).string(), format_metrics_csv(rep));
        csv::write_file((dir / artifact::eval_cdf).string(), format_cdf_csv(rep));
    });
}

/// Writes the resolved configuration next to the artifacts. `out_dir` is left out so that the
/// same run written to two places produces identical directories.
inline void write_config(const PipelineConfig& cfg, const fs::path& dir) {
    fs::create_directories(dir);
    std::istringstream in(cfg.serialize());
    std::string text, line;
    while (std::getline(in, line))
        if (!line.starts_with("out_dir=")) text += line + "\n";
    csv::write_file((dir / artifact::config).string(), text);
}

/// Every stage in order; stops at the first failure (the manifest records how far it got).
inline void run_all(const PipelineConfig& cfg, const fs::path& dir, const std::string& profiles_path,
                    const ImportOptions& imports = {}) {
    cfg.validate();
    fs::create_directories(dir);
    fs::remove(dir / artifact::manifest);
    write_config(cfg, dir);
    stage_ingest(cfg, dir, profiles_path);
    stage_cluster(cfg, dir);
    stage_combos(cfg, dir);
    stage_train_stressor(cfg, dir, imports);
    stage_doe(cfg, dir);
    stage_build_kb(cfg, dir);
    stage_train_interference(cfg, dir, imports);
    stage_evaluate(cfg, dir, imports);
}

}  // namespace stresskit::pipeline
