#ifndef FLOWPHYS_SYNTH_HPP_
#define FLOWPHYS_SYNTH_HPP_

#include "flowphys/common.hpp"
#include "flowphys/features.hpp"
#include "flowphys/ingest.hpp"
#include "flowphys/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace flowphys::synth {

/// Parameters of one synthetic recording.
struct SynthSpec {
    double duration_s = 300.0;
    Timestamp start_ms = 0;

    double rr_base_ms = 800.0;
    double lf_amp_ms = 0.0;
    double lf_freq_hz = 0.10;
    double hf_amp_ms = 0.0;
    double hf_freq_hz = 0.30;
    double jitter_sd_ms = 0.0;
    double ectopic_rate = 0.0;

    std::vector<double> scr_times_s;
    double scr_amp_us = 0.05;
    double scr_rise_s = 1.0;
    double scr_decay_s = 3.0;
    double eda_baseline_us = 5.0;
    double eda_rate_hz = 5.0;

    double pupil_mean_mm = 3.5;
    double pupil_sd_mm = 0.1;
    double pupil_rate_hz = 10.0;
    double pupil_dropout_rate = 0.0;

    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(duration_s > 0.0)) throw ValidationError("synth duration_s must be positive", "synth");
        if (lf_amp_ms < 0 || hf_amp_ms < 0 || jitter_sd_ms < 0 || scr_amp_us < 0 || pupil_sd_mm < 0)
            throw ValidationError("synth amplitudes must be non-negative", "synth");
        if (lf_freq_hz < 0.04 || lf_freq_hz >= 0.15) throw ValidationError("synth lf_freq_hz outside [0.04, 0.15)", "synth");
        if (hf_freq_hz < 0.15 || hf_freq_hz > 0.4) throw ValidationError("synth hf_freq_hz outside [0.15, 0.4]", "synth");
        if (!(rr_base_ms > lf_amp_ms + hf_amp_ms)) throw ValidationError("synth rr_base_ms must exceed the amplitude sum", "synth");
        if (!(ectopic_rate >= 0.0 && ectopic_rate < 1.0)) throw ValidationError("synth ectopic_rate outside [0, 1)", "synth");
        if (!(eda_baseline_us > 0.0)) throw ValidationError("synth eda_baseline_us must be positive", "synth");
        if (!(eda_rate_hz > 0.0) || !(pupil_rate_hz > 0.0)) throw ValidationError("synth rates must be positive", "synth");
    }
};

struct RRTruth {
    double lf_power = 0.0; // ms^2
    double hf_power = 0.0;
    std::vector<std::size_t> ectopic_indices;
};

struct SynthRR {
    RRSeries rr;
    RRTruth truth;
};

/// rr_i = base + lf*sin(2 pi f_lf t_i) + hf*sin(2 pi f_hf t_i) + jitter, with t_i
/// the onset of beat i in seconds since the start; each sample is stamped at
/// the end of its interval. Ectopic beats are +50% intervals.
inline SynthRR synth_rr(const SynthSpec& spec)
{
    spec.validate();
    SynthRR out;
    out.truth.lf_power = spec.lf_amp_ms * spec.lf_amp_ms / 2.0;
    out.truth.hf_power = spec.hf_amp_ms * spec.hf_amp_ms / 2.0;
    Rng rng(derive_seed(spec.seed, 1));
    const double end = spec.duration_s * 1000.0;
    double t = 0.0;
    while (true) {
        const double ts = t / 1000.0;
        double rr = spec.rr_base_ms + spec.lf_amp_ms * std::sin(2.0 * std::numbers::pi * spec.lf_freq_hz * ts) +
                    spec.hf_amp_ms * std::sin(2.0 * std::numbers::pi * spec.hf_freq_hz * ts);
        if (spec.jitter_sd_ms > 0.0) rr += spec.jitter_sd_ms * rng.normal();
        // an ectopic beat never opens the series, which would anchor the cleaner on it
        const bool ectopic = spec.ectopic_rate > 0.0 && rng.uniform01() < spec.ectopic_rate && !out.rr.empty();
        if (ectopic) rr *= 1.5;
        if (t + rr > end) break;
        if (ectopic) out.truth.ectopic_indices.push_back(out.rr.size());
        t += rr;
        out.rr.samples.push_back({spec.start_ms + static_cast<Timestamp>(std::llround(t)), rr});
    }
    return out;
}

struct SynthEDA {
    EDASeries eda; // resistance, kOhm
    std::size_t peak_count = 0;
    std::vector<double> peak_times_s;
};

/// Skin conductance response shape: linear rise to `amp` over `rise`, then
/// exponential decay with time constant `decay`.
inline double scr_shape(double tau, double amp, double rise, double decay)
{
    if (tau < 0.0) return 0.0;
    if (tau < rise) return amp * tau / rise;
    return amp * std::exp(-(tau - rise) / decay);
}

/// Baseline conductance plus planted responses, sampled at `eda_rate_hz` and
/// emitted as resistance in kOhm.
inline SynthEDA synth_eda(const SynthSpec& spec)
{
    spec.validate();
    auto times = spec.scr_times_s;
    std::sort(times.begin(), times.end());
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < 0.0 || times[i] + spec.scr_rise_s > spec.duration_s)
            throw ValidationError("SCR at " + format_double(times[i]) + " s lies outside the recording", "synth");
        if (i > 0 && times[i] - times[i - 1] <= spec.scr_rise_s + spec.scr_decay_s)
            throw ValidationError("SCRs overlap: spacing must exceed rise + decay", "synth");
    }
    SynthEDA out;
    out.eda.unit = EdaUnit::resistance_kohm;
    out.eda.nominal_rate = spec.eda_rate_hz;
    const double step_ms = 1000.0 / spec.eda_rate_hz;
    for (std::size_t k = 0;; ++k) {
        const double t_ms = static_cast<double>(k) * step_ms;
        if (t_ms > spec.duration_s * 1000.0 + 1e-9) break;
        double c = spec.eda_baseline_us;
        for (double s : times) c += scr_shape(t_ms / 1000.0 - s, spec.scr_amp_us, spec.scr_rise_s, spec.scr_decay_s);
        out.eda.samples.push_back({spec.start_ms + static_cast<Timestamp>(std::trunc(t_ms)), 1000.0 / c});
    }
    out.peak_count = times.size();
    out.peak_times_s = times;
    return out;
}

/// Both eyes around a common diameter with small independent noise; a
/// `pupil_dropout_rate` fraction of samples loses one eye.
inline PupilSeries synth_pupil(const SynthSpec& spec)
{
    spec.validate();
    PupilSeries p;
    Rng rng(derive_seed(spec.seed, 3));
    const double step_ms = 1000.0 / spec.pupil_rate_hz;
    for (std::size_t k = 0;; ++k) {
        const double t_ms = static_cast<double>(k) * step_ms;
        if (t_ms > spec.duration_s * 1000.0 + 1e-9) break;
        const double d = std::clamp(spec.pupil_mean_mm + spec.pupil_sd_mm * rng.normal(), 1.0, 10.0);
        PupilSample s;
        s.t = spec.start_ms + static_cast<Timestamp>(std::trunc(t_ms));
        s.left_mm = d * (1.0 + 0.01 * rng.normal());
        s.right_mm = d * (1.0 + 0.01 * rng.normal());
        s.left_valid = s.right_valid = true;
        if (spec.pupil_dropout_rate > 0.0 && rng.uniform01() < spec.pupil_dropout_rate) {
            (rng.below(2) == 0 ? s.left_valid : s.right_valid) = false;
        }
        p.samples.push_back(s);
    }
    return p;
}

//-----------------------------------------------------------------------------
// sessions

struct SegmentSpec {
    Label label = Label::rest;
    bool initial_rest = false;
    SynthSpec signal; // duration_s is the segment length; start_ms is set by the layout
};

struct SessionSpec {
    std::string participant_id = "p01";
    Timestamp start_ms = 1'600'000'000'000;
    double gap_s = 10.0;
    /// Sensor start/stop offsets exercising the common-range crop.
    double eda_lag_s = 1.3;
    double pupil_early_stop_s = 0.7;
    std::vector<SegmentSpec> segments;
};

struct SessionTruth {
    std::vector<std::size_t> peaks_per_segment;
    std::vector<RRTruth> rr_per_segment;
};

struct SynthSession {
    Session session;
    SessionTruth truth;
};

/// Lays segments out back to back with gaps and concatenates their streams.
inline SynthSession synth_session(const SessionSpec& spec)
{
    SynthSession out;
    auto& s = out.session;
    s.participant_id = spec.participant_id;
    s.eda.unit = EdaUnit::resistance_kohm;
    Timestamp cursor = spec.start_ms;
    for (std::size_t i = 0; i < spec.segments.size(); ++i) {
        const auto& seg = spec.segments[i];
        SynthSpec sig = seg.signal;
        sig.start_ms = cursor;
        const auto dur_ms = static_cast<Timestamp>(std::llround(sig.duration_s * 1000.0));
        s.segments.push_back({spec.participant_id, seg.label, cursor, cursor + dur_ms, seg.initial_rest});
        s.eda_rate_hz = sig.eda_rate_hz;
        s.eda.nominal_rate = sig.eda_rate_hz;

        const auto rr = synth_rr(sig);
        s.rr.samples.insert(s.rr.samples.end(), rr.rr.samples.begin(), rr.rr.samples.end());
        out.truth.rr_per_segment.push_back(rr.truth);

        const auto eda = synth_eda(sig);
        const auto lag = static_cast<Timestamp>(std::llround(spec.eda_lag_s * 1000.0));
        std::size_t kept_peaks = 0;
        for (const auto& e : eda.eda.samples) {
            if (e.t >= cursor + lag) s.eda.samples.push_back(e);
        }
        for (double t : eda.peak_times_s) {
            if (t * 1000.0 >= static_cast<double>(lag)) ++kept_peaks;
        }
        out.truth.peaks_per_segment.push_back(kept_peaks);

        const auto pupil = synth_pupil(sig);
        const auto stop = cursor + dur_ms - static_cast<Timestamp>(std::llround(spec.pupil_early_stop_s * 1000.0));
        for (const auto& p : pupil.samples) {
            if (p.t <= stop) s.pupil.samples.push_back(p);
        }
        cursor += dur_ms + static_cast<Timestamp>(std::llround(spec.gap_s * 1000.0));
    }
    return out;
}

//-----------------------------------------------------------------------------
// JSON spec files

inline SynthSpec synth_spec_from_json(const nlohmann::json& j, SynthSpec s = {})
{
    try {
        s.duration_s = j.value("duration_s", s.duration_s);
        s.rr_base_ms = j.value("rr_base_ms", s.rr_base_ms);
        s.lf_amp_ms = j.value("lf_amp_ms", s.lf_amp_ms);
        s.lf_freq_hz = j.value("lf_freq_hz", s.lf_freq_hz);
        s.hf_amp_ms = j.value("hf_amp_ms", s.hf_amp_ms);
        s.hf_freq_hz = j.value("hf_freq_hz", s.hf_freq_hz);
        s.jitter_sd_ms = j.value("jitter_sd_ms", s.jitter_sd_ms);
        s.ectopic_rate = j.value("ectopic_rate", s.ectopic_rate);
        s.scr_times_s = j.value("scr_times_s", s.scr_times_s);
        s.scr_amp_us = j.value("scr_amp_us", s.scr_amp_us);
        s.scr_rise_s = j.value("scr_rise_s", s.scr_rise_s);
        s.scr_decay_s = j.value("scr_decay_s", s.scr_decay_s);
        s.eda_baseline_us = j.value("eda_baseline_us", s.eda_baseline_us);
        s.eda_rate_hz = j.value("eda_rate_hz", s.eda_rate_hz);
        s.pupil_mean_mm = j.value("pupil_mean_mm", s.pupil_mean_mm);
        s.pupil_sd_mm = j.value("pupil_sd_mm", s.pupil_sd_mm);
        s.pupil_rate_hz = j.value("pupil_rate_hz", s.pupil_rate_hz);
        s.pupil_dropout_rate = j.value("pupil_dropout_rate", s.pupil_dropout_rate);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed synth spec: ") + e.what(), "synth");
    }
    return s;
}

/// {participant_id, start_ms, gap_s, defaults:{...}, segments:[{label,
/// initial_rest, ...signal overrides}]}
inline SessionSpec session_spec_from_json(const nlohmann::json& j)
{
    SessionSpec spec;
    try {
        spec.participant_id = j.value("participant_id", spec.participant_id);
        spec.start_ms = j.value("start_ms", spec.start_ms);
        spec.gap_s = j.value("gap_s", spec.gap_s);
        spec.eda_lag_s = j.value("eda_lag_s", spec.eda_lag_s);
        spec.pupil_early_stop_s = j.value("pupil_early_stop_s", spec.pupil_early_stop_s);
        const SynthSpec defaults = j.contains("defaults") ? synth_spec_from_json(j.at("defaults")) : SynthSpec{};
        std::uint64_t k = 0;
        for (const auto& js : j.at("segments")) {
            SegmentSpec seg;
            seg.label = parse_label(js.at("label").get<std::string>());
            seg.initial_rest = js.value("initial_rest", false);
            SynthSpec base = defaults;
            base.seed = derive_seed(defaults.seed, k++);
            seg.signal = synth_spec_from_json(js, base);
            spec.segments.push_back(std::move(seg));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed session spec: ") + e.what(), "synth");
    }
    return spec;
}

//-----------------------------------------------------------------------------
// cohorts

/// Evenly spaced SCR onsets, `count` of them, inside `duration_s`.
inline std::vector<double> spaced_scrs(std::size_t count, double duration_s, double rise_s, double decay_s)
{
    std::vector<double> t;
    if (count == 0) return t;
    const double spacing = duration_s / static_cast<double>(count + 1);
    if (spacing <= rise_s + decay_s) throw ValidationError("too many SCRs for the duration", "synth");
    for (std::size_t i = 1; i <= count; ++i) t.push_back(spacing * static_cast<double>(i));
    return t;
}

struct CohortSessionOptions {
    std::size_t n_participants = 12;
    double task_s = 600.0;
    double rest_s = 180.0;
    /// Multiplies all between-condition signal differences.
    double effect = 1.0;
    std::uint64_t seed = 7;
};

/// Per-participant sessions: an initial rest, then three tasks (order
/// rotated per participant) each followed by a rest. Conditions differ in
/// mean RR, LF/HF modulation, SCR rate and pupil size.
inline std::vector<SessionSpec> cohort_session_specs(const CohortSessionOptions& opt)
{
    std::vector<SessionSpec> out;
    Rng rng(opt.seed);
    const std::array<Label, 3> tasks = {Label::not_flow, Label::automatic_flow, Label::balanced_flow};
    for (std::size_t p = 0; p < opt.n_participants; ++p) {
        SessionSpec s;
        char id[16];
        std::snprintf(id, sizeof id, "p%02zu", p + 1);
        s.participant_id = id;
        s.start_ms = 1'600'000'000'000 + static_cast<Timestamp>(p) * 86'400'000;
        const double rr_offset = 60.0 * rng.normal();
        const double pupil_offset = 0.3 * rng.normal();
        const double eda_base = 4.0 + 2.0 * rng.uniform01();
        std::uint64_t seg_no = 0;

        auto make = [&](Label label, bool initial, double duration) {
            SegmentSpec seg;
            seg.label = label;
            seg.initial_rest = initial;
            auto& sig = seg.signal;
            sig.duration_s = duration;
            sig.seed = derive_seed(opt.seed, 1000 * p + seg_no++);
            sig.jitter_sd_ms = 8.0;
            sig.ectopic_rate = 0.01;
            sig.eda_baseline_us = eda_base;
            sig.pupil_dropout_rate = 0.02;
            const double e = opt.effect;
            std::size_t n_scr = 0;
            switch (label) {
            case Label::rest:
                sig.rr_base_ms = 880.0 + rr_offset;
                sig.lf_amp_ms = 25.0;
                sig.hf_amp_ms = 25.0 + 10.0 * e;
                sig.pupil_mean_mm = 3.4 + pupil_offset - 0.5 * e;
                n_scr = 2;
                break;
            case Label::not_flow:
                sig.rr_base_ms = 800.0 + rr_offset - 20.0 * e;
                sig.lf_amp_ms = 25.0;
                sig.hf_amp_ms = 20.0;
                sig.pupil_mean_mm = 3.4 + pupil_offset;
                n_scr = 8;
                break;
            case Label::automatic_flow:
                sig.rr_base_ms = 800.0 + rr_offset;
                sig.lf_amp_ms = 25.0 + 15.0 * e;
                sig.hf_amp_ms = 20.0;
                sig.pupil_mean_mm = 3.4 + pupil_offset;
                n_scr = 4;
                break;
            case Label::balanced_flow:
                sig.rr_base_ms = 800.0 + rr_offset;
                sig.lf_amp_ms = 25.0 + 15.0 * e;
                sig.hf_amp_ms = 20.0;
                sig.pupil_mean_mm = 3.4 + pupil_offset + 0.2 * e;
                n_scr = static_cast<std::size_t>(std::llround(8.0 + 8.0 * e));
                break;
            }
            n_scr = static_cast<std::size_t>(std::ceil(static_cast<double>(n_scr) * duration / 300.0));
            sig.scr_times_s = spaced_scrs(n_scr, duration, sig.scr_rise_s, sig.scr_decay_s);
            return seg;
        };

        s.segments.push_back(make(Label::rest, true, opt.rest_s));
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            s.segments.push_back(make(tasks[(t + p) % tasks.size()], false, opt.task_s));
            s.segments.push_back(make(Label::rest, false, opt.rest_s));
        }
        out.push_back(std::move(s));
    }
    return out;
}

struct CohortFeatures {
    std::vector<FeatureRow> rows;
    std::vector<std::size_t> rest_features;     // separate rest from work
    std::vector<std::size_t> flow_features;     // separate flow from not-flow
    std::vector<std::size_t> balanced_features; // separate balanced flow from other work
};

struct CohortFeatureOptions {
    std::size_t n_participants = 12;
    std::size_t windows_per_condition = 10;
    double class_separation_sd = 2.0;
    double participant_offset_sd = 1.0;
    double missing_rate = 0.02;
    std::uint64_t seed = 11;
};

/// Feature rows whose condition means differ by `class_separation_sd`
/// within-class standard deviations on two planted features per contrast:
/// rest vs work on the pupil features, flow vs not-flow on sdNN and SD2,
/// balanced vs other work on EDA_mean and peaks. Each participant gets its own
/// offset per feature. Pupil and EDA values go missing at `missing_rate`.
inline CohortFeatures synth_cohort(const CohortFeatureOptions& opt)
{
    if (opt.n_participants < 2) throw ValidationError("cohort needs at least two participants", "synth");
    CohortFeatures c;
    c.rest_features = {index_of(Feature::pupil_diameter_mean), index_of(Feature::pupil_diameter_variance)};
    c.flow_features = {index_of(Feature::sdNN), index_of(Feature::SD2)};
    c.balanced_features = {index_of(Feature::EDA_mean), index_of(Feature::peaks)};
    const double sep = opt.class_separation_sd;
    Rng rng(opt.seed);

    // nominal location and spread per feature, for plausible magnitudes
    std::array<double, kNumFeatures> loc{}, scale{};
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
        loc[f] = 10.0 + static_cast<double>(f);
        scale[f] = 1.0 + 0.1 * static_cast<double>(f);
    }

    auto shift = [&](Label l, std::size_t f) {
        double s = 0.0;
        if (std::find(c.rest_features.begin(), c.rest_features.end(), f) != c.rest_features.end()) {
            s = l == Label::rest ? sep : 0.0;
        } else if (std::find(c.flow_features.begin(), c.flow_features.end(), f) != c.flow_features.end()) {
            s = (l == Label::automatic_flow || l == Label::balanced_flow) ? sep : 0.0;
        } else if (std::find(c.balanced_features.begin(), c.balanced_features.end(), f) != c.balanced_features.end()) {
            s = l == Label::balanced_flow ? sep : 0.0;
        }
        return s;
    };
    auto may_be_missing = [&](std::size_t f) {
        return f >= index_of(Feature::EDA_mean) && opt.missing_rate > 0.0;
    };

    const std::array<Label, 4> labels = {Label::not_flow, Label::automatic_flow, Label::balanced_flow, Label::rest};
    for (std::size_t p = 0; p < opt.n_participants; ++p) {
        char id[16];
        std::snprintf(id, sizeof id, "p%02zu", p + 1);
        std::array<double, kNumFeatures> offset{};
        for (auto& o : offset) o = opt.participant_offset_sd * rng.normal();
        Timestamp t = 1'600'000'000'000 + static_cast<Timestamp>(p) * 86'400'000;

        auto emit = [&](Label l, bool initial) {
            FeatureRow r;
            r.participant_id = id;
            r.label = l;
            r.initial_rest = initial;
            r.t_start = t;
            r.t_end = t + 72'000;
            t += 48'000;
            for (std::size_t f = 0; f < kNumFeatures; ++f) {
                const double z = offset[f] + shift(l, f) + rng.normal();
                const bool missing = may_be_missing(f) && rng.uniform01() < opt.missing_rate;
                r.values[f] = missing ? MaybeDouble{} : MaybeDouble{loc[f] + scale[f] * z};
            }
            c.rows.push_back(std::move(r));
        };

        const std::size_t initial_windows = (opt.windows_per_condition + 2) / 3;
        for (std::size_t w = 0; w < initial_windows; ++w) emit(Label::rest, true);
        for (auto l : labels) {
            for (std::size_t w = 0; w < opt.windows_per_condition; ++w) emit(l, false);
        }
    }
    return c;
}

/// Shuffles labels among each participant's rows (initial-rest rows keep
/// theirs), destroying any label/feature association.
inline std::vector<FeatureRow> permute_labels_within_participants(std::vector<FeatureRow> rows, std::uint64_t seed)
{
    Rng rng(seed);
    std::map<std::string, std::vector<std::size_t>> by_p;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].initial_rest) by_p[rows[i].participant_id].push_back(i);
    }
    for (auto& [pid, idx] : by_p) {
        std::vector<Label> labels;
        for (auto i : idx) labels.push_back(rows[i].label);
        rng.shuffle(labels);
        for (std::size_t k = 0; k < idx.size(); ++k) rows[idx[k]].label = labels[k];
    }
    return rows;
}

} // namespace flowphys::synth

#endif // FLOWPHYS_SYNTH_HPP_
