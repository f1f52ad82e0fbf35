#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "stresskit/error.hpp"
#include "stresskit/profile_store.hpp"
#include "stresskit/rng.hpp"

// Synthetic stand-in for a physical testbed: produces the "observed" utilization of a
// co-located mix and the "measured" response time of a target under background load.
// All functions are pure; noise streams are derived from (seed, inputs).

namespace stresskit {

enum class CombineMode { Saturating, CappedLinear };

inline std::string_view to_string(CombineMode m) {
    return m == CombineMode::Saturating ? "SATURATING" : "CAPPED_LINEAR";
}

inline CombineMode combine_mode_from_string(std::string_view s) {
    if (s == "SATURATING") return CombineMode::Saturating;
    if (s == "CAPPED_LINEAR") return CombineMode::CappedLinear;
    throw InvalidArgument(fmt::format("unknown combination mode '{}'", s));
}

struct ContentionParams {
    std::vector<CombineMode> modes;  // per resource
    std::vector<double> gamma;       // per-resource cross-resource interaction coefficient
    double sigma = 0.02;             // relative Gaussian observation noise
    std::uint64_t seed = 0;

    static ContentionParams defaults(std::size_t resources, std::uint64_t seed = 0) {
        return {std::vector<CombineMode>(resources, CombineMode::Saturating), std::vector<double>(resources, 0.3), 0.02,
                seed};
    }

    static ContentionParams noiseless(std::size_t resources, CombineMode mode, double gamma = 0.0) {
        return {std::vector<CombineMode>(resources, mode), std::vector<double>(resources, gamma), 0.0, 0};
    }

    void check(std::size_t resources) const {
        if (modes.size() != resources || gamma.size() != resources)
            throw InvalidArgument(fmt::format("contention params cover {} modes / {} gammas for {} resources",
                                              modes.size(), gamma.size(), resources));
        for (double g : gamma)
            if (!(g >= 0)) throw InvalidArgument("interaction coefficients must be >= 0");
        if (!(sigma >= 0 && sigma < 0.5)) throw InvalidArgument("observation noise sigma must be in [0, 0.5)");
    }

    bool operator==(const ContentionParams&) const = default;
};

struct QoSParams {
    double base_latency_ms = 100.0;  // isolated response time of the target
    std::vector<double> weights;     // per-resource sensitivity
    double knee = 2.0;               // exponent p >= 1
    double sigma = 0.0;              // relative Gaussian latency noise
    std::uint64_t seed = 0;

    void check(std::size_t resources) const {
        if (!(base_latency_ms > 0)) throw InvalidArgument("base latency must be > 0");
        if (weights.size() != resources)
            throw InvalidArgument(fmt::format("{} QoS weights for {} resources", weights.size(), resources));
        if (std::any_of(weights.begin(), weights.end(), [](double w) { return !(w >= 0); }))
            throw InvalidArgument("QoS weights must be >= 0");
        if (std::none_of(weights.begin(), weights.end(), [](double w) { return w > 0; }))
            throw InvalidArgument("at least one QoS weight must be > 0");
        if (!(knee >= 1)) throw InvalidArgument("QoS knee exponent must be >= 1");
        if (!(sigma >= 0)) throw InvalidArgument("QoS noise sigma must be >= 0");
    }

    bool operator==(const QoSParams&) const = default;
};

namespace detail {

inline std::uint64_t hash_doubles(std::uint64_t h, std::span<const double> values) {
    for (double v : values) {
        std::uint64_t bits = 0;
        static_assert(sizeof bits == sizeof v);
        std::memcpy(&bits, &v, sizeof bits);
        h = hash_combine(h, bits);
    }
    return h;
}

}  // namespace detail

/// Observed utilization of a co-located mix: per-resource combination, cross-resource
/// inflation, then relative noise. Result is in [0,1]^R and independent of input order.
inline std::vector<double> simulate_colocation(std::span<const ApplicationProfile* const> profiles,
                                               const ContentionParams& params) {
    if (profiles.empty()) throw InvalidArgument("simulate_colocation: empty application set");
    const std::size_t R = profiles.front()->utilization.size();
    params.check(R);

    std::vector<const ApplicationProfile*> sorted(profiles.begin(), profiles.end());
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->app_id < b->app_id; });

    std::vector<double> combined(R);
    for (std::size_t r = 0; r < R; ++r) {
        if (params.modes[r] == CombineMode::Saturating) {
            // 1 - prod(1 - u_i), accumulated as a running union so a singleton is returned exactly
            double acc = 0.0;
            for (const auto* p : sorted) {
                double u = p->utilization.at(r);
                acc = acc + u - acc * u;
            }
            combined[r] = acc;
        } else {
            double sum = 0.0;
            for (const auto* p : sorted) sum += p->utilization.at(r);
            combined[r] = std::min(1.0, sum);
        }
    }

    double total = 0.0;
    for (double v : combined) total += v;
    std::vector<double> out(R);
    for (std::size_t r = 0; r < R; ++r) {
        double others = R > 1 ? (total - combined[r]) / static_cast<double>(R - 1) : 0.0;
        out[r] = std::min(1.0, combined[r] * (1.0 + params.gamma[r] * others));
    }

    if (params.sigma > 0) {
        std::uint64_t h = derive_seed(params.seed, "colocation");
        for (const auto* p : sorted) h = hash_combine(h, stable_hash(p->app_id));
        Rng rng(h);
        std::normal_distribution<double> noise(0.0, params.sigma);
        for (auto& v : out) v = std::clamp(v * (1.0 + noise(rng)), 0.0, 1.0);
    }
    return out;
}

inline std::vector<double> simulate_colocation(std::span<const ApplicationProfile> profiles,
                                               const ContentionParams& params) {
    std::vector<const ApplicationProfile*> ptrs;
    for (const auto& p : profiles) ptrs.push_back(&p);
    return simulate_colocation(std::span<const ApplicationProfile* const>(ptrs), params);
}

struct ErrorReport {
    std::vector<std::string> dims;
    std::vector<std::vector<double>> ape;  // [combo][dim], percent
    std::vector<double> per_combo;         // mean APE over dims, percent
    std::vector<double> per_dim_mean;
    double mean_ape = 0.0;
};

/// Absolute percentage error of `predicted` against `observed`; 0/0 counts as exact.
inline double ape_percent(double predicted, double observed) {
    if (observed == 0.0) return predicted == 0.0 ? 0.0 : 100.0;
    return std::abs(predicted - observed) / std::abs(observed) * 100.0;
}

/// Error of predicting a mix's utilization by clamped summation of isolated profiles,
/// measured on the dataset's stress dimensions.
inline ErrorReport naive_sum_error(const ProfileDataset& ds, const std::vector<std::vector<std::string>>& combos,
                                   const ContentionParams& params) {
    if (combos.empty()) throw InvalidArgument("naive_sum_error: no combinations");
    const auto dims = ds.space.stress_indices();
    ErrorReport rep;
    rep.dims = ds.space.stress_dims;
    rep.per_dim_mean.assign(dims.size(), 0.0);
    for (const auto& combo : combos) {
        if (combo.size() < 2) throw InvalidArgument("naive_sum_error: combinations need at least 2 applications");
        std::vector<const ApplicationProfile*> members;
        for (const auto& id : combo) members.push_back(&ds.at(id));
        auto summed = summed_utilization(std::span<const ApplicationProfile* const>(members), ds.space.size());
        auto observed = simulate_colocation(std::span<const ApplicationProfile* const>(members), params);
        std::vector<double> row;
        double mean = 0.0;
        for (std::size_t d = 0; d < dims.size(); ++d) {
            double e = ape_percent(std::min(1.0, summed[dims[d]]), observed[dims[d]]);
            row.push_back(e);
            mean += e;
            rep.per_dim_mean[d] += e;
        }
        rep.per_combo.push_back(mean / static_cast<double>(dims.size()));
        rep.ape.push_back(std::move(row));
    }
    for (auto& v : rep.per_dim_mean) v /= static_cast<double>(combos.size());
    double total = 0.0;
    for (double v : rep.per_combo) total += v;
    rep.mean_ape = total / static_cast<double>(combos.size());
    return rep;
}

/// Response time of `target` under `background` utilization (full resource vector):
/// base * (1 + sum_r w_r * background_r^p) * (1 + eps), floored at half the base.
inline double simulate_qos(const ApplicationProfile& target, std::span<const double> background, const QoSParams& qp) {
    qp.check(background.size());
    double load = 0.0;
    for (std::size_t r = 0; r < background.size(); ++r) {
        if (!(background[r] >= 0.0 && background[r] <= 1.0))
            throw InvalidArgument(fmt::format("simulate_qos: background component {} = {} outside [0,1]", r,
                                              background[r]));
        load += qp.weights[r] * std::pow(background[r], qp.knee);
    }
    double latency = qp.base_latency_ms * (1.0 + load);
    if (qp.sigma > 0) {
        auto h = detail::hash_doubles(hash_combine(derive_seed(qp.seed, "qos"), stable_hash(target.app_id)), background);
        Rng rng(h);
        latency *= 1.0 + std::normal_distribution<double>(0.0, qp.sigma)(rng);
    }
    return std::max(latency, 0.5 * qp.base_latency_ms);
}

struct SynthParams {
    double alpha = 0.8;          // Beta shape of archetype centers (or of every value when archetypes == 0)
    double beta = 2.5;
    std::size_t archetypes = 13;  // 0 draws every application independently
    double concentration = 60.0;  // Beta concentration of applications around their archetype
};

namespace detail {

inline double draw_beta(Rng& rng, double a, double b) {
    double x = std::gamma_distribution<double>(a, 1.0)(rng);
    double y = std::gamma_distribution<double>(b, 1.0)(rng);
    return x + y > 0 ? x / (x + y) : 0.0;
}

}  // namespace detail

/// Seeded synthetic application warehouse in profile CSV format. Utilization fractions are
/// Beta-distributed: archetype centers ~ Beta(alpha, beta), and each application ~
/// Beta(kappa * c, kappa * (1 - c)) around its archetype's center c. Values are written in raw
/// units (fraction * bound) so that ingestion exercises normalization.
inline std::string synthesize_profiles_csv(const ResourceSpace& space, std::size_t n_apps, std::uint64_t seed,
                                           const SynthParams& sp = {}) {
    space.check();
    if (n_apps < 1) throw InvalidArgument("synthesize: need at least one application");
    if (!(sp.alpha > 0 && sp.beta > 0 && sp.concentration > 0))
        throw InvalidArgument("synthesize: Beta parameters must be > 0");
    Rng rng(derive_seed(seed, "synthesize"));
    std::vector<std::vector<double>> centers(sp.archetypes);
    for (auto& c : centers)
        for (std::size_t r = 0; r < space.size(); ++r)
            c.push_back(std::clamp(detail::draw_beta(rng, sp.alpha, sp.beta), 0.02, 0.98));

    std::string out = "app_id," + csv::join(space.names) + "\n";
    int width = static_cast<int>(std::to_string(n_apps).size());
    for (std::size_t i = 0; i < n_apps; ++i) {
        out += fmt::format("app{:0{}}", i + 1, width);
        const std::vector<double>* center = nullptr;
        if (!centers.empty()) center = &centers[std::uniform_int_distribution<std::size_t>(0, centers.size() - 1)(rng)];
        for (std::size_t r = 0; r < space.size(); ++r) {
            double frac = center ? detail::draw_beta(rng, sp.concentration * (*center)[r],
                                                     sp.concentration * (1.0 - (*center)[r]))
                                 : detail::draw_beta(rng, sp.alpha, sp.beta);
            out += "," + csv::num(frac * space.bounds[r]);
        }
        out += "\n";
    }
    return out;
}

}  // namespace stresskit
