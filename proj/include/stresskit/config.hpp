#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "stresskit/contention_oracle.hpp"
#include "stresskit/csv.hpp"
#include "stresskit/error.hpp"
#include "stresskit/profile_store.hpp"
#include "stresskit/regression/forest.hpp"
#include "stresskit/rng.hpp"
#include "stresskit/stressor_model.hpp"

namespace stresskit {

/// Bad configuration file, unknown key, or unparsable value.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// Flat `section.key=value` configuration. Every key has a default; an empty value means
// "unset" (seeds then derive from the master seed, resources.bounds must be provided).
class PipelineConfig {
public:
    static const std::map<std::string, std::string>& defaults() {
        static const std::map<std::string, std::string> d{
            {"seed", "42"},
            {"out_dir", "artifacts"},
            {"resources.names", "CPU,MEM_BW,L2_BW,L3_BW,L3_SYSTEM_BW,DISK_IO_TIME,NETWORK,MEMORY"},
            {"resources.bounds", ""},
            {"resources.stress_dims", "CPU,MEM_BW,DISK_IO_TIME"},
            {"cluster.k_min", "2"},
            {"cluster.k_max", "25"},
            {"cluster.max_iter", "300"},
            {"cluster.tol", "1e-06"},
            {"cluster.seed", ""},
            {"oracle.mode", "SATURATING"},
            {"oracle.gamma", "0.3"},
            {"oracle.sigma", "0.02"},
            {"oracle.seed", ""},
            {"combos.d_max", "8"},
            {"combos.sample_fraction", "0.28"},
            {"combos.seed", ""},
            {"forest.n_trees", "100"},
            {"forest.max_depth", "12"},
            {"forest.min_samples_leaf", "2"},
            {"forest.max_features", "0"},
            {"forest.bootstrap", "true"},
            {"stressor.seed", ""},
            {"split.train", "0.8"},
            {"split.test", "0.1"},
            {"split.validation", "0.1"},
            {"lhs.M", "300"},
            {"lhs.seed", ""},
            {"kb.delta", "0.1"},
            {"tree.max_depth", "12"},
            {"tree.min_samples_leaf", "2"},
            {"interference.seed", ""},
            {"target.app_id", ""},
            {"target.base_latency_ms", "100"},
            {"qos.weights", ""},
            {"qos.knee", "2"},
            {"qos.sigma", "0"},
            {"qos.seed", ""},
            {"eval.n_heldout", "200"},
            {"eval.seed", ""},
            {"synth.n_apps", "106"},
            {"synth.archetypes", "13"},
            {"synth.concentration", "60"},
            {"synth.alpha", "0.8"},
            {"synth.beta", "2.5"},
            {"synth.seed", ""},
        };
        return d;
    }

    PipelineConfig() : values_(defaults()) {}

    static PipelineConfig parse(std::istream& in, const std::string& source = "<config>") {
        PipelineConfig cfg;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto text = csv::trim(line);
            if (text.empty() || text.front() == '#') continue;
            auto eq = text.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(fmt::format("{}:{}: expected key=value", source, line_no));
            try {
                cfg.set(std::string(csv::trim(text.substr(0, eq))), std::string(csv::trim(text.substr(eq + 1))));
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("{}:{}: {}", source, line_no, e.what()));
            }
        }
        return cfg;
    }

    static PipelineConfig parse_string(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    static PipelineConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError(fmt::format("{}: cannot open config file", path));
        return parse(in, path);
    }

    /// All keys in sorted order, one `key=value` per line.
    std::string serialize() const {
        std::string out;
        for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
        return out;
    }

    void set(const std::string& key, const std::string& value) {
        if (!defaults().count(key)) throw ConfigError(fmt::format("unknown configuration key '{}'", key));
        values_[key] = value;
    }

    /// Applies a `key=value` override.
    void apply_override(const std::string& assignment) {
        auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
        set(std::string(csv::trim(std::string_view(assignment).substr(0, eq))),
            std::string(csv::trim(std::string_view(assignment).substr(eq + 1))));
    }

    const std::string& raw(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError(fmt::format("unknown configuration key '{}'", key));
        return it->second;
    }

    bool is_set(const std::string& key) const { return !raw(key).empty(); }

    double number(const std::string& key) const {
        auto v = csv::to_double(raw(key));
        if (!v) throw ConfigError(fmt::format("'{}' must be a number, got '{}'", key, raw(key)));
        return *v;
    }

    std::uint64_t unsigned_integer(const std::string& key) const {
        const auto& s = raw(key);
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size())
            throw ConfigError(fmt::format("'{}' must be a non-negative integer, got '{}'", key, s));
        return v;
    }

    std::size_t size(const std::string& key) const { return static_cast<std::size_t>(unsigned_integer(key)); }

    bool boolean(const std::string& key) const {
        const auto& s = raw(key);
        if (s == "true" || s == "1") return true;
        if (s == "false" || s == "0") return false;
        throw ConfigError(fmt::format("'{}' must be true or false, got '{}'", key, s));
    }

    std::vector<std::string> list(const std::string& key) const {
        if (raw(key).empty()) return {};
        return csv::split(raw(key));
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        for (const auto& item : list(key)) {
            auto v = csv::to_double(item);
            if (!v) throw ConfigError(fmt::format("'{}': '{}' is not a number", key, item));
            out.push_back(*v);
        }
        return out;
    }

    std::uint64_t master_seed() const { return unsigned_integer("seed"); }

    /// `<stage>.seed` when set, otherwise derived from the master seed and the stage name.
    std::uint64_t stage_seed(const std::string& stage) const {
        const auto key = stage + ".seed";
        if (is_set(key)) return unsigned_integer(key);
        return derive_seed(master_seed(), stage);
    }

    ResourceSpace resource_space() const {
        if (!is_set("resources.bounds"))
            throw ConfigError("resources.bounds must be configured (one capacity per resource)");
        try {
            return ResourceSpace::make(list("resources.names"), numbers("resources.bounds"),
                                       list("resources.stress_dims"));
        } catch (const InvalidArgument& e) {
            throw ConfigError(fmt::format("resources: {}", e.what()));
        }
    }

    ContentionParams oracle(std::size_t resources) const {
        ContentionParams p;
        auto modes = list("oracle.mode");
        auto gammas = numbers("oracle.gamma");
        if (modes.size() == 1) modes.assign(resources, modes.front());
        if (gammas.size() == 1) gammas.assign(resources, gammas.front());
        try {
            for (const auto& m : modes) p.modes.push_back(combine_mode_from_string(m));
            p.gamma = gammas;
            p.sigma = number("oracle.sigma");
            p.seed = stage_seed("oracle");
            p.check(resources);
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidArgument& e) {
            throw ConfigError(fmt::format("oracle: {}", e.what()));
        }
        return p;
    }

    QoSParams qos(const ResourceSpace& space) const {
        QoSParams q;
        q.base_latency_ms = number("target.base_latency_ms");
        q.weights = numbers("qos.weights");
        if (q.weights.empty()) {
            auto stress = space.stress_indices();
            q.weights.assign(space.size(), 0.0);
            for (auto r : stress) q.weights[r] = 1.0 / static_cast<double>(stress.size());
        }
        q.knee = number("qos.knee");
        q.sigma = number("qos.sigma");
        q.seed = stage_seed("qos");
        try {
            q.check(space.size());
        } catch (const InvalidArgument& e) {
            throw ConfigError(fmt::format("qos: {}", e.what()));
        }
        return q;
    }

    ForestParams forest() const {
        ForestParams f;
        f.n_trees = size("forest.n_trees");
        f.tree.max_depth = static_cast<int>(size("forest.max_depth"));
        f.tree.min_samples_leaf = size("forest.min_samples_leaf");
        f.max_features = size("forest.max_features");
        f.bootstrap = boolean("forest.bootstrap");
        if (f.n_trees < 1) throw ConfigError("forest.n_trees must be >= 1");
        return f;
    }

    TreeParams interference_tree() const {
        TreeParams t;
        t.max_depth = static_cast<int>(size("tree.max_depth"));
        t.min_samples_leaf = size("tree.min_samples_leaf");
        return t;
    }

    SplitFractions split() const {
        SplitFractions s{number("split.train"), number("split.test"), number("split.validation")};
        try {
            s.check();
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
        return s;
    }

    /// Checks every typed view; throws ConfigError on the first problem.
    void validate() const {
        auto space = resource_space();
        oracle(space.size());
        qos(space);
        forest();
        interference_tree();
        split();
        master_seed();
        if (size("cluster.k_min") < 2 || size("cluster.k_min") > size("cluster.k_max"))
            throw ConfigError("cluster.k_min must be >= 2 and <= cluster.k_max");
        size("cluster.max_iter");
        if (!(number("cluster.tol") >= 0)) throw ConfigError("cluster.tol must be >= 0");
        if (size("combos.d_max") < 1) throw ConfigError("combos.d_max must be >= 1");
        double frac = number("combos.sample_fraction");
        if (!(frac > 0 && frac <= 1)) throw ConfigError("combos.sample_fraction must be in (0, 1]");
        if (size("lhs.M") < 1) throw ConfigError("lhs.M must be >= 1");
        if (!(number("kb.delta") >= 0)) throw ConfigError("kb.delta must be >= 0");
        if (size("eval.n_heldout") < 1) throw ConfigError("eval.n_heldout must be >= 1");
        if (!(number("synth.alpha") > 0 && number("synth.beta") > 0 && number("synth.concentration") > 0))
            throw ConfigError("synth.alpha, synth.beta and synth.concentration must be > 0");
        size("synth.n_apps");
        size("synth.archetypes");
    }

    bool operator==(const PipelineConfig&) const = default;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace stresskit
