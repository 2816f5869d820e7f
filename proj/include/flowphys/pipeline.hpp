#ifndef FLOWPHYS_PIPELINE_HPP_
#define FLOWPHYS_PIPELINE_HPP_

#include "flowphys/clean.hpp"
#include "flowphys/config.hpp"
#include "flowphys/features.hpp"
#include "flowphys/ingest.hpp"
#include "flowphys/model.hpp"
#include "flowphys/stats.hpp"
#include "flowphys/synth.hpp"
#include "flowphys/window.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace flowphys::pipeline {

namespace fs = std::filesystem;

/// Streams of one segment after cropping and cleaning.
struct CleanSegment {
    TaskSegment segment;
    RRSeries rr;                   // ectopic beats removed
    EDASeries eda;                 // uS, resampled and low-passed
    std::vector<PupilMean> pupil;  // mean diameter of valid samples
};

inline CleanSegment clean_segment(const Session& s, const TaskSegment& seg, const CleanConfig& cfg)
{
    const auto cropped = crop_to_segment(s, seg);
    CleanSegment out;
    out.segment = seg;
    out.rr = remove_ectopic(cropped.rr, cfg.ectopic_rel_threshold);
    out.eda = condition_eda(cropped.eda, cfg);
    out.pupil = clean_pupil(cropped.pupil, cfg.pupil_rel_threshold);
    return out;
}

inline std::vector<CleanSegment> clean_session(const Session& s, const PipelineConfig& cfg)
{
    std::vector<CleanSegment> out;
    for (const auto& seg : s.segments) out.push_back(clean_segment(s, seg, cfg.clean));
    if (cfg.zscore_streams) {
        std::vector<double> pupil, eda;
        for (const auto& c : out) {
            for (const auto& p : c.pupil) pupil.push_back(p.diameter_mm);
            for (const auto& e : c.eda.samples) eda.push_back(e.value);
        }
        const double pm = mean(pupil), ps = sample_sd(pupil);
        const double em = mean(eda), es = sample_sd(eda);
        for (auto& c : out) {
            for (auto& p : c.pupil) p.diameter_mm = ps > 0 ? (p.diameter_mm - pm) / ps : 0.0;
            for (auto& e : c.eda.samples) e.value = es > 0 ? (e.value - em) / es : 0.0;
        }
    }
    return out;
}

/// Windows every cleaned segment and extracts one feature row per window.
inline std::vector<FeatureRow> session_features(const Session& s, const PipelineConfig& cfg)
{
    std::vector<FeatureRow> rows;
    for (const auto& c : clean_session(s, cfg)) {
        for (const auto& range : segment_windows(c.rr, cfg.window)) {
            auto w = attach_streams(range, c.rr, c.eda, c.pupil);
            w.participant_id = s.participant_id;
            w.label = c.segment.label;
            w.initial_rest = c.segment.initial_rest;
            rows.push_back(extract_features(w, cfg.features));
        }
    }
    return rows;
}

/// Session directories below `cohort_dir` (those holding a manifest), sorted.
inline std::vector<fs::path> find_sessions(const fs::path& cohort_dir)
{
    if (!fs::is_directory(cohort_dir)) throw ValidationError("'" + cohort_dir.string() + "' is not a directory");
    std::vector<fs::path> dirs;
    if (fs::exists(cohort_dir / "manifest.json")) dirs.push_back(cohort_dir);
    for (const auto& e : fs::directory_iterator(cohort_dir)) {
        if (e.is_directory() && fs::exists(e.path() / "manifest.json")) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw ValidationError("no session directories with manifest.json under '" + cohort_dir.string() + "'");
    return dirs;
}

inline void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    csv::write_file(path.string(), text);
}

//-----------------------------------------------------------------------------
// commands

/// Writes cleaned streams per segment as <out>/<NN>_<label>/{rr,eda,pupil}.csv.
inline std::vector<fs::path> cmd_clean(const fs::path& session_dir, const PipelineConfig& cfg, const fs::path& out_dir)
{
    const auto session = load_session(session_dir);
    std::vector<fs::path> written;
    std::size_t i = 0;
    for (const auto& c : clean_session(session, cfg)) {
        char name[64];
        std::snprintf(name, sizeof name, "%02zu_%s%s", i++, std::string(to_string(c.segment.label)).c_str(),
                      c.segment.initial_rest ? "_initial" : "");
        const auto dir = out_dir / name;
        fs::create_directories(dir);
        write_text(dir / "rr.csv", to_csv(c.rr));
        write_text(dir / "eda.csv", to_csv(c.eda));
        std::ostringstream os;
        os << "timestamp_ms,diameter_mm\n";
        for (const auto& p : c.pupil) os << p.t << ',' << format_double(p.diameter_mm) << '\n';
        write_text(dir / "pupil.csv", os.str());
        written.push_back(dir);
    }
    return written;
}

/// Features for all sessions, in session order. Windows of the initial rest
/// are not written: no analysis uses them.
inline std::vector<FeatureRow> cmd_features(const std::vector<fs::path>& session_dirs, const PipelineConfig& cfg,
                                            std::size_t jobs = 1)
{
    std::vector<std::vector<FeatureRow>> per(session_dirs.size());
    parallel_for(session_dirs.size(), jobs, [&](std::size_t i) {
        per[i] = session_features(load_session(session_dirs[i]), cfg);
    });
    std::vector<FeatureRow> rows;
    for (auto& p : per) {
        for (auto& r : p) {
            if (!r.initial_rest) rows.push_back(std::move(r));
        }
    }
    return rows;
}

inline const std::vector<Label>& three_conditions()
{
    static const std::vector<Label> c = {Label::not_flow, Label::automatic_flow, Label::balanced_flow};
    return c;
}

inline const std::vector<Label>& four_conditions()
{
    static const std::vector<Label> c = {Label::not_flow, Label::automatic_flow, Label::balanced_flow, Label::rest};
    return c;
}

inline nlohmann::json cmd_stats(const std::vector<FeatureRow>& rows, const std::vector<std::string>& measures,
                                const std::vector<std::vector<Label>>& condition_sets, const PipelineConfig& cfg)
{
    nlohmann::json report = nlohmann::json::array();
    const auto hash = config_hash(cfg);
    for (const auto& conditions : condition_sets) {
        for (const auto& m : measures) {
            auto j = stats::to_json(stats::analyze(rows, m, conditions, cfg.stats.path, cfg.stats.alpha,
                                                   cfg.stats.apply_hf, cfg.clean.eda_upsample_hz));
            j["config_hash"] = hash;
            report.push_back(std::move(j));
        }
    }
    return report;
}

inline nlohmann::json cmd_eval(const std::vector<FeatureRow>& rows, Task task, const PipelineConfig& cfg,
                               std::size_t jobs = 1)
{
    const auto prepared = cfg.zscore_features ? zscore_per_participant(rows) : rows;
    const auto ds = relabel(prepared, task);
    auto j = to_json(lopo_evaluate(ds, cfg.model, jobs));
    j["config_hash"] = config_hash(cfg);
    return j;
}

/// Writes a session directory (rr.csv, eda.csv, pupil.csv, manifest.json,
/// ground_truth.json) from a session spec.
inline void cmd_synth(const synth::SessionSpec& spec, const fs::path& out_dir)
{
    const auto s = synth::synth_session(spec);
    write_session(out_dir, s.session);
    nlohmann::json segs = nlohmann::json::array();
    for (std::size_t i = 0; i < spec.segments.size(); ++i) {
        const auto& rt = s.truth.rr_per_segment[i];
        segs.push_back({{"label", to_string(spec.segments[i].label)},
                        {"initial_rest", spec.segments[i].initial_rest},
                        {"scr_peaks", s.truth.peaks_per_segment[i]},
                        {"lf_power_ms2", rt.lf_power},
                        {"hf_power_ms2", rt.hf_power},
                        {"ectopic_beats", rt.ectopic_indices.size()}});
    }
    write_text(out_dir / "ground_truth.json",
               nlohmann::json{{"participant_id", spec.participant_id}, {"segments", segs}}.dump(2) + "\n");
}

inline void cmd_synth_cohort(const synth::CohortSessionOptions& opt, const fs::path& out_dir)
{
    for (const auto& spec : synth::cohort_session_specs(opt)) cmd_synth(spec, out_dir / spec.participant_id);
}

struct PipelineOutputs {
    fs::path features_csv;
    fs::path stats_report;
    std::vector<fs::path> eval_reports;
};

/// features.csv, stats_report.json (3-way and 4-way analyses of every
/// configured measure) and eval_<task>.json for all four tasks.
inline PipelineOutputs cmd_pipeline(const fs::path& cohort_dir, const PipelineConfig& cfg, const fs::path& out_dir,
                                    std::size_t jobs = 1)
{
    cfg.validate();
    PipelineOutputs out;
    const auto rows = cmd_features(find_sessions(cohort_dir), cfg, jobs);
    out.features_csv = out_dir / "features.csv";
    write_text(out.features_csv, to_csv(rows));

    out.stats_report = out_dir / "stats_report.json";
    write_text(out.stats_report,
               cmd_stats(rows, cfg.stats.measures, {three_conditions(), four_conditions()}, cfg).dump(2) + "\n");

    for (auto task : kAllTasks) {
        const auto path = out_dir / ("eval_" + std::string(to_string(task)) + ".json");
        write_text(path, cmd_eval(rows, task, cfg, jobs).dump(2) + "\n");
        out.eval_reports.push_back(path);
    }
    return out;
}

} // namespace flowphys::pipeline

#endif // FLOWPHYS_PIPELINE_HPP_
