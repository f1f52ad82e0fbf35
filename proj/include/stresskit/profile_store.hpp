#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "stresskit/csv.hpp"
#include "stresskit/error.hpp"

namespace stresskit {

/// Named resources, their raw-unit capacities, and the subset used as stress dimensions.
struct ResourceSpace {
    std::vector<std::string> names;
    std::vector<double> bounds;
    std::vector<std::string> stress_dims;

    static ResourceSpace make(std::vector<std::string> names, std::vector<double> bounds,
                              std::vector<std::string> stress_dims) {
        ResourceSpace s{std::move(names), std::move(bounds), std::move(stress_dims)};
        s.check();
        return s;
    }

    /// Same names and stress dimensions with every bound set to 1 (for already-normalized data).
    ResourceSpace unit() const {
        ResourceSpace s = *this;
        std::fill(s.bounds.begin(), s.bounds.end(), 1.0);
        return s;
    }

    std::size_t size() const noexcept { return names.size(); }

    std::size_t index_of(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw InvalidArgument(fmt::format("unknown resource '{}'", name));
    }

    std::vector<std::size_t> stress_indices() const {
        std::vector<std::size_t> idx;
        idx.reserve(stress_dims.size());
        for (const auto& d : stress_dims) idx.push_back(index_of(d));
        return idx;
    }

    void check() const {
        if (names.empty()) throw InvalidArgument("resource space has no resources");
        std::set<std::string> seen;
        for (const auto& n : names) {
            if (n.empty()) throw InvalidArgument("resource names must be non-empty");
            if (n.find(',') != std::string::npos)
                throw InvalidArgument(fmt::format("resource name '{}' contains a comma", n));
            if (!seen.insert(n).second) throw InvalidArgument(fmt::format("duplicate resource name '{}'", n));
        }
        if (bounds.size() != names.size())
            throw InvalidArgument(fmt::format("{} bounds given for {} resources", bounds.size(), names.size()));
        for (std::size_t i = 0; i < bounds.size(); ++i)
            if (!(bounds[i] > 0))
                throw InvalidArgument(fmt::format("bound for '{}' must be > 0", names[i]));
        if (stress_dims.empty() || stress_dims.size() > names.size())
            throw InvalidArgument("stress dimensions must be a non-empty subset of the resources");
        std::set<std::string> dims;
        for (const auto& d : stress_dims) {
            if (!seen.count(d)) throw InvalidArgument(fmt::format("stress dimension '{}' is not a resource", d));
            if (!dims.insert(d).second) throw InvalidArgument(fmt::format("duplicate stress dimension '{}'", d));
        }
    }

    bool operator==(const ResourceSpace&) const = default;
};

struct ApplicationProfile {
    std::string app_id;
    std::vector<double> utilization;  // fraction of capacity per resource, in [0,1]

    bool operator==(const ApplicationProfile&) const = default;
};

/// A raw value that exceeded its bound (or was negative) and was clamped during normalization.
struct ClampEvent {
    std::string app_id;
    std::string resource;
    double fraction;  // pre-clamp value / bound

    bool operator==(const ClampEvent&) const = default;
};

struct ProfileDataset {
    ResourceSpace space;
    std::vector<ApplicationProfile> profiles;
    std::vector<ClampEvent> clamped;

    const ApplicationProfile& at(std::string_view app_id) const {
        for (const auto& p : profiles)
            if (p.app_id == app_id) return p;
        throw InvalidArgument(fmt::format("unknown application '{}'", app_id));
    }

    std::size_t size() const noexcept { return profiles.size(); }

    bool operator==(const ProfileDataset&) const = default;
};

struct ValidationReport {
    std::vector<ClampEvent> out_of_range;
    std::vector<std::string> constant_columns;
    std::vector<std::pair<std::string, std::string>> duplicate_vectors;

    bool empty() const noexcept {
        return out_of_range.empty() && constant_columns.empty() && duplicate_vectors.empty();
    }
};

/// Divides each raw value by its bound and clamps to [0,1]; returns whether clamping happened.
inline bool normalize_value(double raw, double bound, double& out) {
    double f = raw / bound;
    out = std::clamp(f, 0.0, 1.0);
    return f != out;
}

inline ProfileDataset parse_profiles(const csv::Table& table, const ResourceSpace& space) {
    space.check();
    const auto id_col = csv::require_column(table, "app_id");
    std::vector<std::size_t> cols;
    for (const auto& name : space.names) cols.push_back(csv::require_column(table, name));
    if (table.rows.empty()) throw DataError(fmt::format("{}: empty file (no data rows)", table.source));

    ProfileDataset ds;
    ds.space = space;
    std::map<std::string, std::size_t> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& id = table.rows[r][id_col];
        if (id.empty())
            throw DataError(fmt::format("{}:{}: column 'app_id': empty id", table.source, table.line_numbers[r]));
        if (auto [it, fresh] = seen.emplace(id, table.line_numbers[r]); !fresh)
            throw DataError(fmt::format("{}:{}: column 'app_id': duplicate id '{}' (first seen on line {})",
                                        table.source, table.line_numbers[r], id, it->second));
        ApplicationProfile p{id, std::vector<double>(space.size())};
        for (std::size_t k = 0; k < cols.size(); ++k) {
            double raw = csv::cell_double(table, r, cols[k]);
            if (!std::isfinite(raw))
                throw DataError(fmt::format("{}:{}: column '{}': non-finite value", table.source,
                                            table.line_numbers[r], space.names[k]));
            if (normalize_value(raw, space.bounds[k], p.utilization[k]))
                ds.clamped.push_back({id, space.names[k], raw / space.bounds[k]});
        }
        ds.profiles.push_back(std::move(p));
    }
    return ds;
}

/// Reads a profile CSV (`app_id,<resource1>,...`) and normalizes by the space's bounds.
inline ProfileDataset load_profiles(const std::string& path, const ResourceSpace& space) {
    return parse_profiles(csv::read_file(path), space);
}

/// Serializes utilizations as fractions; reload with `space.unit()`.
inline std::string format_profiles(const ProfileDataset& ds) {
    std::string out = "app_id," + csv::join(ds.space.names) + "\n";
    for (const auto& p : ds.profiles) {
        out += p.app_id;
        for (double u : p.utilization) out += "," + csv::num(u);
        out += "\n";
    }
    return out;
}

inline ValidationReport validate(const ProfileDataset& ds) {
    ValidationReport rep;
    rep.out_of_range = ds.clamped;
    if (ds.profiles.size() >= 2) {
        for (std::size_t r = 0; r < ds.space.size(); ++r) {
            double first = ds.profiles.front().utilization[r];
            bool constant = std::all_of(ds.profiles.begin(), ds.profiles.end(),
                                        [&](const auto& p) { return p.utilization[r] == first; });
            if (constant) rep.constant_columns.push_back(ds.space.names[r]);
        }
    }
    std::map<std::vector<double>, std::string> first_owner;
    for (const auto& p : ds.profiles) {
        auto [it, fresh] = first_owner.emplace(p.utilization, p.app_id);
        if (!fresh) rep.duplicate_vectors.emplace_back(it->second, p.app_id);
    }
    return rep;
}

/// Component-wise sum of utilizations; intentionally unclamped.
inline std::vector<double> summed_utilization(std::span<const ApplicationProfile* const> profiles,
                                              std::size_t resources) {
    std::vector<double> sum(resources, 0.0);
    for (const auto* p : profiles) {
        if (p->utilization.size() != resources)
            throw DimensionMismatch(fmt::format("profile '{}' has {} components, expected {}", p->app_id,
                                                p->utilization.size(), resources));
        for (std::size_t r = 0; r < resources; ++r) sum[r] += p->utilization[r];
    }
    return sum;
}

inline std::vector<double> summed_utilization(std::span<const ApplicationProfile> profiles, std::size_t resources) {
    std::vector<const ApplicationProfile*> ptrs;
    for (const auto& p : profiles) ptrs.push_back(&p);
    return summed_utilization(std::span<const ApplicationProfile* const>(ptrs), resources);
}

}  // namespace stresskit
