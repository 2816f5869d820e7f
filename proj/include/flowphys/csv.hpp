#ifndef FLOWPHYS_CSV_HPP_
#define FLOWPHYS_CSV_HPP_

#include "flowphys/common.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace flowphys::csv {

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',')
{
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(sep, pos);
        if (next == std::string_view::npos) {
            out.push_back(trim(line.substr(pos)));
            break;
        }
        out.push_back(trim(line.substr(pos, next - pos)));
        pos = next + 1;
    }
    return out;
}

inline double parse_double(std::string_view field, std::size_t line)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
        throw ParseError("cannot parse number '" + std::string(field) + "'", line);
    }
    return v;
}

inline std::int64_t parse_int(std::string_view field, std::size_t line)
{
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec == std::errc{} && ptr == field.data() + field.size() && !field.empty()) return v;
    // sub-ms clocks are truncated
    const double d = parse_double(field, line);
    return static_cast<std::int64_t>(std::trunc(d));
}

inline MaybeDouble parse_optional(std::string_view field, std::size_t line)
{
    if (field.empty()) return std::nullopt;
    return parse_double(field, line);
}

/// Reads a CSV file with a fixed header and calls `on_row(fields, line_no)`
/// for each non-blank data row. Line numbers are 1-based; the header is line 1.
inline void read_file(const std::string& path, std::string_view expected_header,
                      const std::function<void(const std::vector<std::string_view>&, std::size_t)>& on_row)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing header in '" + path + "'", 1);
    if (trim(line) != expected_header) {
        throw ParseError("unexpected header '" + std::string(trim(line)) + "' in '" + path + "', expected '" +
                             std::string(expected_header) + "'",
                         1);
    }
    const std::size_t n_cols = split(expected_header).size();
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split(line);
        if (fields.size() != n_cols) {
            throw ParseError("expected " + std::to_string(n_cols) + " fields, got " + std::to_string(fields.size()),
                             line_no);
        }
        on_row(fields, line_no);
    }
}

inline void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + path + "'", "io");
    out << content;
}

} // namespace flowphys::csv

#endif // FLOWPHYS_CSV_HPP_
