// stresskit: command-line driver for the interference-modeling pipeline.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "stresskit/stresskit.hpp"

namespace fs = std::filesystem;
using namespace stresskit;
using pipeline::ExitCode;

namespace {

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::vector<std::string> overrides;

    PipelineConfig resolve() const {
        PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::load(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        if (seed) cfg.set("seed", std::to_string(*seed));
        if (out_dir) cfg.set("out_dir", *out_dir);
        return cfg;
    }
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "Pipeline configuration file (key=value lines)");
    cmd->add_option("--seed", opts.seed, "Master seed (overrides the config)");
    cmd->add_option("--out-dir", opts.out_dir, "Artifact directory (overrides the config)");
    cmd->add_option("--set", opts.overrides, "Override a configuration key: --set section.key=value");
}

int predict(const std::string& model_path, const std::vector<double>& u, const std::string& batch_path) {
    InterferenceModel model;
    try {
        model = interference_from_json(pipeline::detail::read_json(model_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("{}: {}", model_path, e.what()));
    }
    if (!batch_path.empty()) {
        auto table = csv::read_file(batch_path);
        std::vector<std::size_t> cols;
        for (std::size_t d = 1; d <= model.dims.size(); ++d) cols.push_back(csv::require_column(table, fmt::format("u_{}", d)));
        std::cout << "row,predicted_ms\n";
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            std::vector<double> x;
            for (auto c : cols) x.push_back(csv::cell_double(table, r, c));
            std::cout << r << "," << csv::num(predict_qos(model, x)) << "\n";
        }
        return ExitCode::kSuccess;
    }
    for (double v : u)
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument(fmt::format("utilization {} outside [0,1]", v));
    double q = predict_qos(model, u);
    std::cout << "dims: " << csv::join(model.dims) << "\n";
    std::cout << "predicted_latency_ms: " << csv::num(q) << "\n";
    return ExitCode::kSuccess;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interference-aware performance modeling pipeline"};
    app.require_subcommand(1);

    CommonOptions common;
    std::size_t n_apps = 0;
    std::string synth_out;
    std::string profiles_path;
    std::string model_path, batch_path;
    std::vector<double> u_values;
    pipeline::ImportOptions imports;
    std::string stressor_csv, runs_csv, heldout_csv;

    auto* synth = app.add_subcommand("synthesize-apps", "Write a seeded synthetic profile CSV");
    add_common(synth, common);
    synth->add_option("--n", n_apps, "Number of applications (default: synth.n_apps)");
    synth->add_option("--out", synth_out, "Output CSV path (default: <out-dir>/profiles.csv)");

    auto* ingest = app.add_subcommand("ingest", "Load, normalize and validate application profiles");
    add_common(ingest, common);
    ingest->add_option("--profiles", profiles_path, "Profile CSV (app_id,<resources...>)")->required();

    auto* cluster = app.add_subcommand("cluster", "k-means clustering with silhouette-based K selection");
    add_common(cluster, common);
    auto* combos = app.add_subcommand("combos", "Enumerate cluster combinations");
    add_common(combos, common);
    auto* train_stressor = app.add_subcommand("train-stressor", "Collect co-location data and train the stressor model");
    add_common(train_stressor, common);
    train_stressor->add_option("--training-csv", stressor_csv, "Use measured training rows instead of the oracle");
    auto* doe = app.add_subcommand("doe", "Latin hypercube design over the stress dimensions");
    add_common(doe, common);
    auto* build_kb = app.add_subcommand("build-kb", "Fill the design cells with predicted combinations");
    add_common(build_kb, common);
    auto* train_interf = app.add_subcommand("train-interference", "Run the target against stressors and fit its model");
    add_common(train_interf, common);
    train_interf->add_option("--runs-csv", runs_csv, "Use measured (u_1..u_D,q_ms) rows instead of the oracle");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Score the interference model on held-out backgrounds");
    add_common(evaluate_cmd, common);
    evaluate_cmd->add_option("--heldout-csv", heldout_csv, "Measured held-out (u_1..u_D,q_ms) rows");
    for (auto* cmd : {train_interf, evaluate_cmd})
        cmd->add_option("--warmup-discard", imports.warmup_discard, "Rows to drop from the start of an imported table");

    auto* predict_cmd = app.add_subcommand("predict", "Predict latency from a trained interference model");
    predict_cmd->add_option("--model", model_path, "interference_model.json")->required();
    auto* u_opt = predict_cmd->add_option("--u", u_values, "Background utilization, one value per stress dimension");
    auto* batch_opt = predict_cmd->add_option("--batch", batch_path, "CSV with u_1..u_D columns");
    u_opt->excludes(batch_opt);

    auto* run_all = app.add_subcommand("run-all", "Run every stage in order");
    add_common(run_all, common);
    run_all->add_option("--profiles", profiles_path, "Profile CSV (app_id,<resources...>)")->required();
    std::string target_id;
    run_all->add_option("--target", target_id, "Target application id (default: target.app_id)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? ExitCode::kSuccess : ExitCode::kUsage;
    }

    if (!stressor_csv.empty()) imports.stressor_training_csv = stressor_csv;
    if (!runs_csv.empty()) imports.interference_runs_csv = runs_csv;
    if (!heldout_csv.empty()) imports.heldout_csv = heldout_csv;

    try {
        if (predict_cmd->parsed()) {
            if (batch_path.empty() && u_values.empty()) throw InvalidArgument("predict needs --u values or --batch");
            return predict(model_path, u_values, batch_path);
        }

        auto cfg = common.resolve();
        if (run_all->parsed() && !target_id.empty()) cfg.set("target.app_id", target_id);
        const fs::path dir = cfg.raw("out_dir");

        if (synth->parsed()) {
            auto space = cfg.resource_space();
            std::size_t n = n_apps ? n_apps : cfg.size("synth.n_apps");
            SynthParams sp{cfg.number("synth.alpha"), cfg.number("synth.beta"), cfg.size("synth.archetypes"),
                           cfg.number("synth.concentration")};
            auto text = synthesize_profiles_csv(space, n, cfg.stage_seed("synth"), sp);
            fs::path out = synth_out.empty() ? dir / "profiles.csv" : fs::path(synth_out);
            if (out.has_parent_path()) fs::create_directories(out.parent_path());
            csv::write_file(out.string(), text);
            std::cout << fmt::format("wrote {} applications to {}\n", n, out.string());
            return ExitCode::kSuccess;
        }

        cfg.validate();
        if (run_all->parsed()) {
            pipeline::run_all(cfg, dir, profiles_path, imports);
            std::cout << fmt::format("pipeline complete; artifacts in {}\n", dir.string());
            return ExitCode::kSuccess;
        }
        pipeline::write_config(cfg, dir);
        if (ingest->parsed()) pipeline::stage_ingest(cfg, dir, profiles_path);
        if (cluster->parsed()) pipeline::stage_cluster(cfg, dir);
        if (combos->parsed()) pipeline::stage_combos(cfg, dir);
        if (train_stressor->parsed()) pipeline::stage_train_stressor(cfg, dir, imports);
        if (doe->parsed()) pipeline::stage_doe(cfg, dir);
        if (build_kb->parsed()) pipeline::stage_build_kb(cfg, dir);
        if (train_interf->parsed()) pipeline::stage_train_interference(cfg, dir, imports);
        if (evaluate_cmd->parsed()) pipeline::stage_evaluate(cfg, dir, imports);
        return ExitCode::kSuccess;
    } catch (const pipeline::StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return ExitCode::kUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return ExitCode::kDataError;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return ExitCode::kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ExitCode::kStageFailure;
    }
}
