#pragma once
// Fixtures and independent brute-force oracles shared by the test binaries. The oracles are
// written directly from the definitions and deliberately avoid the library's helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/format.h>

#include "stresskit/stresskit.hpp"

namespace testkit {

using namespace stresskit;

inline ResourceSpace unit_space(std::size_t r, std::vector<std::string> stress = {}) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < r; ++i) names.push_back(fmt::format("r{}", i + 1));
    if (stress.empty()) stress = names;
    return ResourceSpace::make(names, std::vector<double>(r, 1.0), stress);
}

inline ResourceSpace paper_space() {
    return ResourceSpace::make({"CPU", "MEM_BW", "L2_BW", "L3_BW", "L3_SYSTEM_BW", "DISK_IO_TIME", "NETWORK", "MEMORY"},
                               std::vector<double>(8, 100.0), {"CPU", "MEM_BW", "DISK_IO_TIME"});
}

/// Dataset from explicit rows; ids are "a00", "a01", ...
inline ProfileDataset dataset_from_rows(const ResourceSpace& space, const std::vector<std::vector<double>>& rows) {
    ProfileDataset ds;
    ds.space = space;
    for (std::size_t i = 0; i < rows.size(); ++i) ds.profiles.push_back({fmt::format("a{:02}", i), rows[i]});
    return ds;
}

inline ProfileDataset uniform_dataset(const ResourceSpace& space, std::size_t n, std::uint64_t seed,
                                      double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<std::vector<double>> rows(n, std::vector<double>(space.size()));
    for (auto& row : rows)
        for (auto& v : row) v = u(rng);
    return dataset_from_rows(space, rows);
}

/// Synthetic warehouse through the same path the CLI uses (generate CSV, parse, normalize).
inline ProfileDataset synthetic_dataset(const ResourceSpace& space, std::size_t n, std::uint64_t seed,
                                        const SynthParams& sp = {}) {
    return parse_profiles(csv::parse_string(synthesize_profiles_csv(space, n, seed, sp)), space);
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path = std::filesystem::temp_directory_path() /
               fmt::format("stresskit_{}_{}_{}", tag, static_cast<unsigned long>(::getpid()), counter++);
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- oracles -------------------------------------------------------------------------------

/// Sum of C(K, d) for d = 1..d_max via Pascal's triangle.
inline std::uint64_t closed_form_combinations(std::size_t k, std::size_t d_max) {
    std::vector<std::vector<std::uint64_t>> c(k + 1, std::vector<std::uint64_t>(k + 1, 0));
    for (std::size_t n = 0; n <= k; ++n) {
        c[n][0] = 1;
        for (std::size_t r = 1; r <= n; ++r) c[n][r] = c[n - 1][r - 1] + (r <= n - 1 ? c[n - 1][r] : 0);
    }
    std::uint64_t total = 0;
    for (std::size_t d = 1; d <= std::min(d_max, k); ++d) total += c[k][d];
    return total;
}

/// Exhaustive best single split: every feature, every midpoint between adjacent distinct
/// values, both sides holding at least `min_leaf` samples. SSE computed from scratch.
struct BruteSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double sse = std::numeric_limits<double>::infinity();
    double runner_up = std::numeric_limits<double>::infinity();  // best SSE with a different (feature, threshold)
};

inline double sse_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s;
}

inline BruteSplit brute_force_split(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                                    std::size_t min_leaf) {
    BruteSplit best;
    const std::size_t f = X.front().size();
    for (std::size_t j = 0; j < f; ++j) {
        std::vector<double> values;
        for (const auto& row : X) values.push_back(row[j]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        for (std::size_t v = 0; v + 1 < values.size(); ++v) {
            double t = midpoint_threshold(values[v], values[v + 1]);
            std::vector<double> left, right;
            for (std::size_t i = 0; i < X.size(); ++i) (X[i][j] <= t ? left : right).push_back(y[i]);
            if (left.size() < min_leaf || right.size() < min_leaf) continue;
            double s = sse_of(left) + sse_of(right);
            if (s < best.sse) {
                best.runner_up = best.sse;
                best = {true, static_cast<int>(j), t, s, best.runner_up};
            } else if (s < best.runner_up) {
                best.runner_up = s;
            }
        }
    }
    return best;
}

/// Membership in hypercube i, straight from [(x - delta)/M, (x + 1 + delta)/M] clipped to [0,1].
inline bool membership_oracle(const LhsDesign& d, std::size_t i, double delta, const std::vector<double>& u) {
    const double M = static_cast<double>(d.m);
    for (std::size_t r = 0; r < d.cells[i].size(); ++r) {
        double x = static_cast<double>(d.cells[i][r]);
        double lo = (x - delta) / M, hi = (x + 1 + delta) / M;
        if (lo < 0) lo = 0;
        if (hi > 1) hi = 1;
        if (u[r] < lo || u[r] > hi) return false;
    }
    return true;
}

/// Entry of cell i nearest (x + 0.5)/M, scanning every occupant; ties to the smaller bit string.
inline std::size_t nearest_entry_scan(const KnowledgeBase& kb, std::size_t i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < kb.cells[i].size(); ++e) {
        double d = 0.0;
        for (std::size_t r = 0; r < kb.design.cells[i].size(); ++r) {
            double c = (static_cast<double>(kb.design.cells[i][r]) + 0.5) / static_cast<double>(kb.design.m);
            d += (kb.cells[i][e].predicted[r] - c) * (kb.cells[i][e].predicted[r] - c);
        }
        if (d < best_d || (d == best_d && kb.cells[i][e].combo.bits() < kb.cells[i][best].combo.bits())) {
            best_d = d;
            best = e;
        }
    }
    return best;
}

/// Mean silhouette straight from the definition with O(n^2) distances.
inline double silhouette_oracle(const std::vector<std::vector<double>>& pts, const std::vector<std::size_t>& label,
                                std::size_t k) {
    const std::size_t n = pts.size();
    auto dist = [&](std::size_t a, std::size_t b) {
        double s = 0.0;
        for (std::size_t r = 0; r < pts[a].size(); ++r) s += (pts[a][r] - pts[b][r]) * (pts[a][r] - pts[b][r]);
        return std::sqrt(s);
    };
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> sum(k, 0.0);
        std::vector<std::size_t> cnt(k, 0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            sum[label[j]] += dist(i, j);
            ++cnt[label[j]];
        }
        if (cnt[label[i]] == 0) continue;  // singleton cluster scores 0
        double a = sum[label[i]] / static_cast<double>(cnt[label[i]]);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c)
            if (c != label[i] && cnt[c] > 0) b = std::min(b, sum[c] / static_cast<double>(cnt[c]));
        double m = std::max(a, b);
        total += m > 0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(n);
}

}  // namespace testkit
