#ifndef FLOWPHYS_CONFIG_HPP_
#define FLOWPHYS_CONFIG_HPP_

#include "flowphys/clean.hpp"
#include "flowphys/common.hpp"
#include "flowphys/csv.hpp"
#include "flowphys/features.hpp"
#include "flowphys/model.hpp"
#include "flowphys/stats.hpp"
#include "flowphys/window.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace flowphys {

struct StatsConfig {
    std::vector<std::string> measures = {"mHR", "rmssd", "sdNN", "EDA_mean", "peaks_per_second",
                                         "pupil_diameter_mean"};
    stats::TestPath path = stats::TestPath::nonparametric;
    double alpha = 0.05;
    bool apply_hf = true;
};

struct PipelineConfig {
    CleanConfig clean;
    WindowConfig window;
    FeatureConfig features;
    /// Per-participant z-scoring of window features before model training.
    bool zscore_features = true;
    /// Per-participant z-scoring of the cleaned pupil and EDA streams before
    /// windowing. Off by default: it moves the SCR threshold into z units.
    bool zscore_streams = false;
    StatsConfig stats;
    ModelConfig model;

    void validate() const
    {
        clean.validate();
        window.validate();
        features.spectral.validate();
        if (!(features.scr_amp_threshold > 0.0)) throw ConfigError("features.scr_amp_threshold must be positive");
        if (!(stats.alpha > 0.0 && stats.alpha < 1.0)) throw ConfigError("stats.alpha must lie in (0, 1)");
        for (const auto& m : stats.measures) {
            if (m != stats::kPeaksPerSecond && !feature_index(m)) throw ConfigError("stats.measures: unknown measure '" + m + "'");
        }
        model.validate();
    }
};

namespace detail {

inline std::string join(const std::vector<std::string>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

inline bool parse_bool(std::string_view v, const std::string& key)
{
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + std::string(v) + "'");
}

inline double parse_number(std::string_view v, const std::string& key)
{
    try {
        return csv::parse_double(v, 0);
    } catch (const ParseError&) {
        throw ConfigError(key + ": expected a number, got '" + std::string(v) + "'");
    }
}

inline std::size_t parse_count(std::string_view v, const std::string& key)
{
    const double d = parse_number(v, key);
    if (d < 0 || d != std::floor(d)) throw ConfigError(key + ": expected a non-negative integer");
    return static_cast<std::size_t>(d);
}

inline std::string unquote(std::string_view v)
{
    if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
        v = v.substr(1, v.size() - 2);
    }
    return std::string(v);
}

} // namespace detail

/// Applies one `section.key = value` assignment. Unknown keys are errors.
inline void set_config_value(PipelineConfig& c, const std::string& section, const std::string& key, std::string_view raw)
{
    using namespace detail;
    const std::string full = section + "." + key;
    const std::string v = unquote(raw);
    if (section == "clean") {
        if (key == "ectopic_rel_threshold") c.clean.ectopic_rel_threshold = parse_number(v, full);
        else if (key == "pupil_rel_threshold") c.clean.pupil_rel_threshold = parse_number(v, full);
        else if (key == "eda_upsample_hz") c.clean.eda_upsample_hz = parse_number(v, full);
        else if (key == "butter_order") c.clean.butter_order = static_cast<int>(parse_count(v, full));
        else if (key == "butter_wn") c.clean.butter_wn = parse_number(v, full);
        else throw ConfigError("unknown config key '" + full + "'");
    } else if (section == "window") {
        if (key == "size_rr") c.window.size_rr = parse_count(v, full);
        else if (key == "overlap_rr") c.window.overlap_rr = parse_count(v, full);
        else if (key == "min_rr_for_freq") {
            c.window.min_rr_for_freq = parse_count(v, full);
            c.features.min_rr_for_freq = c.window.min_rr_for_freq;
        } else throw ConfigError("unknown config key '" + full + "'");
    } else if (section == "features") {
        if (key == "resample_hz") c.features.spectral.resample_hz = parse_number(v, full);
        else if (key == "welch_segment") c.features.spectral.welch_segment = parse_count(v, full);
        else if (key == "welch_overlap") c.features.spectral.welch_overlap = parse_number(v, full);
        else if (key == "scr_amp_threshold") c.features.scr_amp_threshold = parse_number(v, full);
        else if (key == "zscore_features") c.zscore_features = parse_bool(v, full);
        else if (key == "zscore_streams") c.zscore_streams = parse_bool(v, full);
        else throw ConfigError("unknown config key '" + full + "'");
    } else if (section == "stats") {
        if (key == "measures") {
            c.stats.measures.clear();
            for (auto m : csv::split(v)) {
                if (!m.empty()) c.stats.measures.emplace_back(m);
            }
        } else if (key == "path") c.stats.path = stats::parse_path(v);
        else if (key == "alpha") c.stats.alpha = parse_number(v, full);
        else if (key == "apply_hf") c.stats.apply_hf = parse_bool(v, full);
        else throw ConfigError("unknown config key '" + full + "'");
    } else if (section == "model") {
        if (key == "classifier") c.model.classifier = parse_classifier(v);
        else if (key == "C") c.model.svm.C = parse_number(v, full);
        else if (key == "tol") c.model.svm.tol = parse_number(v, full);
        else if (key == "max_iter") c.model.svm.max_iter = parse_count(v, full);
        else if (key == "reps") c.model.reps = parse_count(v, full);
        else if (key == "seed") c.model.seed = parse_count(v, full);
        else if (key == "select_fraction") c.model.select_fraction = parse_number(v, full);
        else if (key == "n_trees") c.model.n_trees = parse_count(v, full);
        else throw ConfigError("unknown config key '" + full + "'");
    } else {
        throw ConfigError("unknown config section '[" + section + "]'");
    }
}

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
inline PipelineConfig parse_config(std::string_view text)
{
    PipelineConfig c;
    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = csv::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = std::string(csv::trim(t.substr(1, t.size() - 2)));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": key outside of a section");
        set_config_value(c, section, std::string(csv::trim(t.substr(0, eq))), csv::trim(t.substr(eq + 1)));
    }
    c.validate();
    return c;
}

inline PipelineConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

/// Canonical text form; parse_config(to_text(c)) reproduces `c`.
inline std::string to_text(const PipelineConfig& c)
{
    std::ostringstream os;
    os << "[clean]\n"
       << "ectopic_rel_threshold = " << format_double(c.clean.ectopic_rel_threshold) << '\n'
       << "pupil_rel_threshold = " << format_double(c.clean.pupil_rel_threshold) << '\n'
       << "eda_upsample_hz = " << format_double(c.clean.eda_upsample_hz) << '\n'
       << "butter_order = " << c.clean.butter_order << '\n'
       << "butter_wn = " << format_double(c.clean.butter_wn) << '\n'
       << "\n[window]\n"
       << "size_rr = " << c.window.size_rr << '\n'
       << "overlap_rr = " << c.window.overlap_rr << '\n'
       << "min_rr_for_freq = " << c.window.min_rr_for_freq << '\n'
       << "\n[features]\n"
       << "resample_hz = " << format_double(c.features.spectral.resample_hz) << '\n'
       << "welch_segment = " << c.features.spectral.welch_segment << '\n'
       << "welch_overlap = " << format_double(c.features.spectral.welch_overlap) << '\n'
       << "scr_amp_threshold = " << format_double(c.features.scr_amp_threshold) << '\n'
       << "zscore_features = " << (c.zscore_features ? "true" : "false") << '\n'
       << "zscore_streams = " << (c.zscore_streams ? "true" : "false") << '\n'
       << "\n[stats]\n"
       << "measures = " << detail::join(c.stats.measures) << '\n'
       << "path = " << stats::to_string(c.stats.path) << '\n'
       << "alpha = " << format_double(c.stats.alpha) << '\n'
       << "apply_hf = " << (c.stats.apply_hf ? "true" : "false") << '\n'
       << "\n[model]\n"
       << "classifier = " << to_string(c.model.classifier) << '\n'
       << "C = " << format_double(c.model.svm.C) << '\n'
       << "tol = " << format_double(c.model.svm.tol) << '\n'
       << "max_iter = " << c.model.svm.max_iter << '\n'
       << "reps = " << c.model.reps << '\n'
       << "seed = " << c.model.seed << '\n'
       << "select_fraction = " << format_double(c.model.select_fraction) << '\n'
       << "n_trees = " << c.model.n_trees << '\n';
    return os.str();
}

inline std::string config_hash(const PipelineConfig& c)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_text(c))));
    return buf;
}

} // namespace flowphys

#endif // FLOWPHYS_CONFIG_HPP_
