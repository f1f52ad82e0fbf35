#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "stresskit/error.hpp"

namespace stresskit::csv {

// Minimal reader for the comma-separated tables this toolkit exchanges: no quoting,
// mandatory header, '#' lines are not special.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
    std::string source;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline Table parse(std::istream& in, std::string source) {
    Table t;
    t.source = std::move(source);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);  // UTF-8 BOM
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError(fmt::format("{}:{}: expected {} fields, found {}", t.source, line_no,
                                        t.header.size(), fields.size()));
        t.rows.push_back(std::move(fields));
        t.line_numbers.push_back(line_no);
    }
    if (!have_header) throw DataError(fmt::format("{}: empty file (no header row)", t.source));
    return t;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("{}: cannot open file", path));
    return parse(in, path);
}

inline Table parse_string(const std::string& text, std::string source = "<string>") {
    std::istringstream in(text);
    return parse(in, std::move(source));
}

inline std::optional<double> to_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline double cell_double(const Table& t, std::size_t row, std::size_t col) {
    auto v = to_double(t.rows[row][col]);
    if (!v)
        throw DataError(fmt::format("{}:{}: column '{}': non-numeric value '{}'", t.source,
                                    t.line_numbers[row], t.header[col], t.rows[row][col]));
    return *v;
}

inline std::size_t require_column(const Table& t, std::string_view name) {
    auto c = t.column(name);
    if (!c) throw DataError(fmt::format("{}:1: missing column '{}'", t.source, name));
    return *c;
}

/// Shortest representation that parses back to the same double.
inline std::string num(double v) { return fmt::format("{}", v); }

template <typename Range>
std::string join(const Range& items, std::string_view sep = ",") {
    return fmt::format("{}", fmt::join(items, sep));
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("{}: cannot open for writing", path));
    out << content;
    if (!out) throw DataError(fmt::format("{}: write failed", path));
}

}  // namespace stresskit::csv
