#ifndef FLOWPHYS_COMMON_HPP_
#define FLOWPHYS_COMMON_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace flowphys {

/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;

/// Feature values may be absent (empty slice, zero denominator).
using MaybeDouble = std::optional<double>;

//-----------------------------------------------------------------------------
// errors

/// Base error. `stage()` names the pipeline stage that raised it so the CLI
/// can report where a run failed.
class Error : public std::runtime_error {
public:
    Error(std::string stage, const std::string& what)
        : std::runtime_error(what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error("ingest", what + " (line " + std::to_string(line) + ")"), line_number(line) {}
    std::size_t line_number;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what, std::string stage = "ingest")
        : Error(std::move(stage), what) {}
};

struct CropError : Error {
    CropError(const std::string& stream_name, const std::string& what)
        : Error("ingest", what), stream(stream_name) {}
    std::string stream;
};

struct ResampleError : Error {
    explicit ResampleError(const std::string& what) : Error("clean", what) {}
};

struct FilterError : Error {
    explicit FilterError(const std::string& what) : Error("clean", what) {}
};

struct FeatureError : Error {
    explicit FeatureError(const std::string& what) : Error("features", what) {}
};

struct DatasetError : Error {
    explicit DatasetError(const std::string& what) : Error("model", what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

//-----------------------------------------------------------------------------
// labels

enum class Label { not_flow, automatic_flow, balanced_flow, rest };

inline constexpr std::string_view to_string(Label l) noexcept
{
    switch (l) {
    case Label::not_flow: return "not_flow";
    case Label::automatic_flow: return "automatic_flow";
    case Label::balanced_flow: return "balanced_flow";
    case Label::rest: return "rest";
    }
    return "?";
}

inline Label parse_label(std::string_view s)
{
    if (s == "not_flow") return Label::not_flow;
    if (s == "automatic_flow") return Label::automatic_flow;
    if (s == "balanced_flow") return Label::balanced_flow;
    if (s == "rest") return Label::rest;
    throw ValidationError("unknown label '" + std::string(s) + "'");
}

inline constexpr bool is_work(Label l) noexcept { return l != Label::rest; }

//-----------------------------------------------------------------------------
// small numeric helpers

inline double mean(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// Sample variance (n-1 denominator); 0 for fewer than two values.
inline double sample_variance(const std::vector<double>& v)
{
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

inline double sample_sd(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

/// Shortest round-trip decimal representation; locale independent.
inline std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline std::string format_optional(const MaybeDouble& x) { return x ? format_double(*x) : std::string{}; }

/// FNV-1a, used for stable content hashes in reports.
inline std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace flowphys

#endif // FLOWPHYS_COMMON_HPP_
