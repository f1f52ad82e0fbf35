#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "stresskit/csv.hpp"
#include "stresskit/error.hpp"

namespace stresskit {

struct MetricReport {
    std::optional<double> r2;  // absent when the truth has zero variance
    double mape = 0.0;        // percent
    double median_ape = 0.0;  // percent
    std::vector<std::pair<double, double>> ape_cdf;  // (error %, cumulative fraction)
};

namespace detail {

inline void check_pair(std::span<const double> y_true, std::span<const double> y_pred, std::size_t min_len) {
    if (y_true.size() != y_pred.size())
        throw DimensionMismatch(fmt::format("metrics: {} truths vs {} predictions", y_true.size(), y_pred.size()));
    if (y_true.size() < min_len) throw InvalidArgument(fmt::format("metrics: need at least {} samples", min_len));
}

}  // namespace detail

/// 1 - SS_res / SS_tot. Throws when the truth has zero variance.
inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
    detail::check_pair(y_true, y_pred, 2);
    double mean = 0.0;
    for (double v : y_true) mean += v;
    mean /= static_cast<double>(y_true.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_tot += (y_true[i] - mean) * (y_true[i] - mean);
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    }
    if (ss_tot <= 0.0) throw InvalidArgument("r_squared: ground truth has zero variance");
    return 1.0 - ss_res / ss_tot;
}

/// R^2, or nullopt when it is undefined (fewer than 2 samples or constant truth).
inline std::optional<double> try_r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() < 2 || y_true.size() != y_pred.size()) return std::nullopt;
    try {
        return r_squared(y_true, y_pred);
    } catch (const InvalidArgument&) {
        return std::nullopt;
    }
}

/// Per-sample |y - yhat| / |y| * 100. Throws on a zero ground-truth value.
inline std::vector<double> absolute_percentage_errors(std::span<const double> y_true, std::span<const double> y_pred) {
    detail::check_pair(y_true, y_pred, 1);
    std::vector<double> out;
    out.reserve(y_true.size());
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 0.0) throw InvalidArgument(fmt::format("MAPE: zero ground-truth value at index {}", i));
        out.push_back(std::abs(y_true[i] - y_pred[i]) / std::abs(y_true[i]) * 100.0);
    }
    return out;
}

inline double median(std::vector<double> v) {
    if (v.empty()) throw InvalidArgument("median of an empty sequence");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

/// Empirical CDF: the i-th smallest error is paired with (i+1)/n.
inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> errors) {
    std::sort(errors.begin(), errors.end());
    std::vector<std::pair<double, double>> cdf;
    cdf.reserve(errors.size());
    for (std::size_t i = 0; i < errors.size(); ++i)
        cdf.emplace_back(errors[i], static_cast<double>(i + 1) / static_cast<double>(errors.size()));
    return cdf;
}

/// Percentage-error metrics; R^2 is filled in only when defined.
inline MetricReport error_metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    detail::check_pair(y_true, y_pred, 1);
    MetricReport rep;
    rep.r2 = try_r_squared(y_true, y_pred);
    auto apes = absolute_percentage_errors(y_true, y_pred);
    double sum = 0.0;
    for (double e : apes) sum += e;
    rep.mape = sum / static_cast<double>(apes.size());
    rep.median_ape = median(apes);
    rep.ape_cdf = empirical_cdf(std::move(apes));
    return rep;
}

/// Full report; throws when R^2 or MAPE is undefined for the inputs.
inline MetricReport metrics(std::span<const double> y_true, std::span<const double> y_pred) {
    detail::check_pair(y_true, y_pred, 2);
    r_squared(y_true, y_pred);
    return error_metrics(y_true, y_pred);
}

/// `metric,value` rows; R^2 is omitted when undefined.
inline std::string format_metrics_csv(const MetricReport& m) {
    std::string out = "metric,value\n";
    out += "n," + std::to_string(m.ape_cdf.size()) + "\n";
    if (m.r2) out += "r2," + csv::num(*m.r2) + "\n";
    out += "mape_pct," + csv::num(m.mape) + "\n";
    out += "median_ape_pct," + csv::num(m.median_ape) + "\n";
    out += "max_ape_pct," + csv::num(m.ape_cdf.empty() ? 0.0 : m.ape_cdf.back().first) + "\n";
    return out;
}

inline std::string format_cdf_csv(const MetricReport& m) {
    std::string out = "error_pct,cum_fraction\n";
    for (const auto& [e, f] : m.ape_cdf) out += csv::num(e) + "," + csv::num(f) + "\n";
    return out;
}

}  // namespace stresskit
