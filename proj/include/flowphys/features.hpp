#ifndef FLOWPHYS_FEATURES_HPP_
#define FLOWPHYS_FEATURES_HPP_

#include "flowphys/clean.hpp"
#include "flowphys/common.hpp"
#include "flowphys/csv.hpp"
#include "flowphys/spectral.hpp"
#include "flowphys/window.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>
#include <string_view>
#include <vector>

namespace flowphys {

inline constexpr std::size_t kNumFeatures = 29;

/// Canonical feature order; also the features.csv column order.
inline constexpr std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "maxHR", "minHR", "mHR", "sdHR",                                       // bpm
    "mRRi", "sdNN", "rmssd",                                               // ms
    "nn5", "nn10", "nn20", "nn50",                                         // counts
    "pnn5", "pnn10", "pnn20", "pnn50",                                     // percent
    "LF", "HF", "vLF", "total_power",                                      // ms^2
    "LF_HF", "LFnu",                                                       //
    "SD1", "SD2", "SD1_SD2",                                               //
    "EDA_mean", "EDA_variance", "peaks",                                   // uS, uS^2, count
    "pupil_diameter_mean", "pupil_diameter_variance",                      // mm, mm^2
};

enum class Feature : std::size_t {
    maxHR, minHR, mHR, sdHR, mRRi, sdNN, rmssd, nn5, nn10, nn20, nn50, pnn5, pnn10, pnn20, pnn50,
    LF, HF, vLF, total_power, LF_HF, LFnu, SD1, SD2, SD1_SD2,
    EDA_mean, EDA_variance, peaks, pupil_diameter_mean, pupil_diameter_variance,
};

inline constexpr std::size_t index_of(Feature f) noexcept { return static_cast<std::size_t>(f); }

inline std::optional<std::size_t> feature_index(std::string_view name)
{
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
        if (kFeatureNames[i] == name) return i;
    }
    return std::nullopt;
}

using FeatureValues = std::array<MaybeDouble, kNumFeatures>;

struct FeatureRow {
    std::string participant_id;
    Label label = Label::rest;
    bool initial_rest = false;
    Timestamp t_start = 0;
    Timestamp t_end = 0;
    FeatureValues values{};

    MaybeDouble& operator[](Feature f) { return values[index_of(f)]; }
    const MaybeDouble& operator[](Feature f) const { return values[index_of(f)]; }
};

struct SpectralConfig {
    double resample_hz = 4.0;
    std::size_t welch_segment = 256;
    double welch_overlap = 0.5;

    void validate() const
    {
        if (!(resample_hz / 2.0 > 0.4)) throw ConfigError("features.resample_hz must exceed 0.8 Hz");
        if (welch_segment < 8) throw ConfigError("features.welch_segment must be >= 8");
        if (!(welch_overlap >= 0.0 && welch_overlap < 1.0)) throw ConfigError("features.welch_overlap must lie in [0, 1)");
    }
};

struct FeatureConfig {
    SpectralConfig spectral;
    double scr_amp_threshold = 0.01; // uS
    std::size_t min_rr_for_freq = 64;
};

//-----------------------------------------------------------------------------
// HRV, time domain

struct TimeDomain {
    double maxHR, minHR, mHR, sdHR;
    double mRRi, sdNN, rmssd;
    std::array<double, 4> nn;  // 5, 10, 20, 50 ms
    std::array<double, 4> pnn; // percent
};

inline constexpr std::array<double, 4> kNNThresholdsMs = {5.0, 10.0, 20.0, 50.0};

inline TimeDomain hrv_time_domain(std::span<const double> rr)
{
    if (rr.size() < 2) throw FeatureError("time-domain HRV needs at least two intervals");
    TimeDomain td{};
    std::vector<double> hr, rrv(rr.begin(), rr.end());
    hr.reserve(rr.size());
    for (double v : rr) hr.push_back(60000.0 / v);
    td.maxHR = *std::max_element(hr.begin(), hr.end());
    td.minHR = *std::min_element(hr.begin(), hr.end());
    td.mHR = mean(hr);
    td.sdHR = sample_sd(hr);
    td.mRRi = mean(rrv);
    td.sdNN = sample_sd(rrv);
    double ss = 0.0;
    td.nn.fill(0.0);
    for (std::size_t i = 0; i + 1 < rr.size(); ++i) {
        const double d = rr[i + 1] - rr[i];
        ss += d * d;
        for (std::size_t j = 0; j < kNNThresholdsMs.size(); ++j) {
            if (std::abs(d) > kNNThresholdsMs[j]) td.nn[j] += 1.0;
        }
    }
    const auto n_diff = static_cast<double>(rr.size() - 1);
    td.rmssd = std::sqrt(ss / n_diff);
    for (std::size_t j = 0; j < td.nn.size(); ++j) td.pnn[j] = 100.0 * td.nn[j] / n_diff;
    return td;
}

//-----------------------------------------------------------------------------
// HRV, frequency domain

struct FrequencyDomain {
    double LF = 0.0, HF = 0.0, vLF = 0.0, total_power = 0.0;
    MaybeDouble LF_HF;
    MaybeDouble LFnu;
};

inline constexpr double kVlfHigh = 0.04;
inline constexpr double kLfHigh = 0.15;
inline constexpr double kHfHigh = 0.40;

/// Tachogram (rr value at each beat timestamp) interpolated onto a uniform
/// grid at `fs_hz`, starting at the first beat. Returned in ms.
inline std::vector<double> resample_tachogram(std::span<const RRSample> rr, double fs_hz)
{
    std::vector<double> out;
    if (rr.empty()) return out;
    const double t0 = static_cast<double>(rr.front().t);
    const double t_last = static_cast<double>(rr.back().t);
    const double step = 1000.0 / fs_hz;
    std::size_t j = 0;
    for (std::size_t k = 0;; ++k) {
        const double t = t0 + static_cast<double>(k) * step;
        if (t > t_last + 1e-9) break;
        if (rr.size() == 1) {
            out.push_back(rr[0].rr_ms);
            continue;
        }
        while (j + 2 < rr.size() && static_cast<double>(rr[j + 1].t) <= t) ++j;
        const double ta = static_cast<double>(rr[j].t);
        const double tb = static_cast<double>(rr[j + 1].t);
        if (t >= tb) {
            out.push_back(rr[j + 1].rr_ms);
        } else {
            const double w = (t - ta) / (tb - ta);
            out.push_back(rr[j].rr_ms + w * (rr[j + 1].rr_ms - rr[j].rr_ms));
        }
    }
    return out;
}

/// Power spectral density of the mean-removed, resampled tachogram.
inline dsp::Psd tachogram_psd(std::span<const RRSample> rr, const SpectralConfig& cfg)
{
    auto x = resample_tachogram(rr, cfg.resample_hz);
    const double m = dsp::anchored_mean(x);
    for (double& v : x) v -= m;
    return dsp::welch(x, cfg.resample_hz, cfg.welch_segment, cfg.welch_overlap);
}

inline FrequencyDomain hrv_frequency_domain(std::span<const RRSample> rr, const SpectralConfig& cfg,
                                            std::size_t min_intervals = 64)
{
    if (rr.size() < min_intervals || rr.size() < 2) {
        throw FeatureError("frequency-domain HRV needs at least " + std::to_string(min_intervals) + " intervals");
    }
    const auto psd = tachogram_psd(rr, cfg);
    FrequencyDomain fd;
    fd.vLF = dsp::band_power(psd, 0.0, kVlfHigh);
    fd.LF = dsp::band_power(psd, kVlfHigh, kLfHigh);
    fd.HF = dsp::band_power(psd, kLfHigh, kHfHigh);
    fd.total_power = dsp::band_power(psd, 0.0, kHfHigh);
    if (fd.HF > 0.0) fd.LF_HF = fd.LF / fd.HF;
    if (fd.LF + fd.HF > 0.0) fd.LFnu = fd.LF / (fd.LF + fd.HF);
    return fd;
}

//-----------------------------------------------------------------------------
// HRV, Poincare

struct Poincare {
    double SD1 = 0.0, SD2 = 0.0;
    MaybeDouble SD1_SD2;
};

inline Poincare hrv_nonlinear(double rmssd, double sdnn)
{
    Poincare p;
    p.SD1 = rmssd / std::numbers::sqrt2;
    p.SD2 = std::sqrt(std::max(0.0, 2.0 * sdnn * sdnn - p.SD1 * p.SD1));
    if (p.SD2 > 0.0) p.SD1_SD2 = p.SD1 / p.SD2;
    return p;
}

inline Poincare hrv_nonlinear(std::span<const double> rr)
{
    const auto td = hrv_time_domain(rr);
    return hrv_nonlinear(td.rmssd, td.sdNN);
}

//-----------------------------------------------------------------------------
// skin conductance responses

struct PeakDetection {
    std::size_t count = 0;
    std::vector<std::size_t> indices;
};

/// Counts skin conductance responses. Extrema are taken on the signal with
/// flat runs collapsed. A local maximum opens a response when it rises at
/// least `amp_threshold` above the preceding local minimum (the onset; the
/// first sample when there is none). Higher maxima reached before the signal
/// has fallen `amp_threshold` below the open response merge into it.
inline PeakDetection detect_scr_peaks(std::span<const double> x, double amp_threshold = 0.01)
{
    PeakDetection out;
    const std::size_t n = x.size();
    if (n < 3) return out;

    struct Extremum {
        std::size_t index;
        double value;
        bool is_max;
    };
    // turning points, with plateaus represented by their first sample
    std::vector<Extremum> ext;
    int prev_dir = 0;
    std::size_t run_start = 0;
    for (std::size_t i = 1; i < n; ++i) {
        const int dir = x[i] > x[i - 1] ? 1 : (x[i] < x[i - 1] ? -1 : 0);
        if (dir == 0) continue;
        if (prev_dir == 1 && dir == -1) ext.push_back({run_start, x[run_start], true});
        if (prev_dir == -1 && dir == 1) ext.push_back({run_start, x[run_start], false});
        prev_dir = dir;
        run_start = i;
    }
    // run_start now marks the last strict change; nothing after it is an extremum

    double onset = x[0];
    bool open = false;
    Extremum peak{};
    for (const auto& e : ext) {
        if (e.is_max) {
            if (open) {
                if (e.value > peak.value) peak = e;
            } else if (e.value - onset >= amp_threshold) {
                open = true;
                peak = e;
            }
        } else {
            if (open && peak.value - e.value >= amp_threshold) {
                out.indices.push_back(peak.index);
                open = false;
            }
            if (!open) onset = e.value;
        }
    }
    if (open) out.indices.push_back(peak.index);
    out.count = out.indices.size();
    return out;
}

//-----------------------------------------------------------------------------
// slice summaries

struct SliceStats {
    MaybeDouble mean;
    MaybeDouble variance;
};

inline SliceStats summarize(const std::vector<double>& v)
{
    if (v.empty()) return {};
    return {flowphys::mean(v), sample_variance(v)};
}

struct EdaFeatures {
    MaybeDouble mean, variance, peaks;
};

inline EdaFeatures eda_features(const EDASeries& slice, double amp_threshold = 0.01)
{
    if (slice.empty()) return {};
    std::vector<double> v;
    v.reserve(slice.size());
    for (const auto& s : slice.samples) v.push_back(s.value);
    const auto st = summarize(v);
    return {st.mean, st.variance, static_cast<double>(detect_scr_peaks(v, amp_threshold).count)};
}

inline SliceStats pupil_features(const std::vector<PupilMean>& slice)
{
    std::vector<double> v;
    v.reserve(slice.size());
    for (const auto& s : slice) v.push_back(s.diameter_mm);
    return summarize(v);
}

//-----------------------------------------------------------------------------
// composition

inline FeatureRow extract_features(const Window& w, const FeatureConfig& cfg = {})
{
    FeatureRow row;
    row.participant_id = w.participant_id;
    row.label = w.label;
    row.initial_rest = w.initial_rest;
    row.t_start = w.t_start;
    row.t_end = w.t_end;

    std::vector<double> rr;
    rr.reserve(w.rr.size());
    for (const auto& s : w.rr) rr.push_back(s.rr_ms);
    const auto td = hrv_time_domain(rr);
    row[Feature::maxHR] = td.maxHR;
    row[Feature::minHR] = td.minHR;
    row[Feature::mHR] = td.mHR;
    row[Feature::sdHR] = td.sdHR;
    row[Feature::mRRi] = td.mRRi;
    row[Feature::sdNN] = td.sdNN;
    row[Feature::rmssd] = td.rmssd;
    for (std::size_t j = 0; j < 4; ++j) {
        row.values[index_of(Feature::nn5) + j] = td.nn[j];
        row.values[index_of(Feature::pnn5) + j] = td.pnn[j];
    }

    const auto fd = hrv_frequency_domain(w.rr, cfg.spectral, cfg.min_rr_for_freq);
    row[Feature::LF] = fd.LF;
    row[Feature::HF] = fd.HF;
    row[Feature::vLF] = fd.vLF;
    row[Feature::total_power] = fd.total_power;
    row[Feature::LF_HF] = fd.LF_HF;
    row[Feature::LFnu] = fd.LFnu;

    const auto pc = hrv_nonlinear(td.rmssd, td.sdNN);
    row[Feature::SD1] = pc.SD1;
    row[Feature::SD2] = pc.SD2;
    row[Feature::SD1_SD2] = pc.SD1_SD2;

    const auto eda = eda_features(w.eda_slice, cfg.scr_amp_threshold);
    row[Feature::EDA_mean] = eda.mean;
    row[Feature::EDA_variance] = eda.variance;
    row[Feature::peaks] = eda.peaks;

    const auto pupil = pupil_features(w.pupil_slice);
    row[Feature::pupil_diameter_mean] = pupil.mean;
    row[Feature::pupil_diameter_variance] = pupil.variance;
    return row;
}

/// Per participant and per feature, replaces present values by their
/// z-score within that participant. Absent values stay absent.
inline std::vector<FeatureRow> zscore_per_participant(std::vector<FeatureRow> rows)
{
    std::map<std::string, std::vector<std::size_t>> by_participant;
    for (std::size_t i = 0; i < rows.size(); ++i) by_participant[rows[i].participant_id].push_back(i);
    for (const auto& [pid, idx] : by_participant) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            std::vector<double> vals;
            std::vector<std::size_t> where;
            for (std::size_t i : idx) {
                if (rows[i].values[f]) {
                    vals.push_back(*rows[i].values[f]);
                    where.push_back(i);
                }
            }
            const auto z = zscore(vals);
            for (std::size_t k = 0; k < where.size(); ++k) rows[where[k]].values[f] = z[k];
        }
    }
    return rows;
}

//-----------------------------------------------------------------------------
// features.csv

inline std::string features_csv_header()
{
    std::string h = "participant_id,label,t_start,t_end";
    for (auto name : kFeatureNames) {
        h += ',';
        h += name;
    }
    return h;
}

inline std::string to_csv(const std::vector<FeatureRow>& rows)
{
    std::ostringstream os;
    os << features_csv_header() << '\n';
    for (const auto& r : rows) {
        os << r.participant_id << ',' << to_string(r.label) << ',' << r.t_start << ',' << r.t_end;
        for (const auto& v : r.values) os << ',' << format_optional(v);
        os << '\n';
    }
    return os.str();
}

inline std::vector<FeatureRow> load_features_csv(const std::string& path)
{
    std::vector<FeatureRow> rows;
    csv::read_file(path, features_csv_header(), [&](const auto& f, std::size_t line) {
        FeatureRow r;
        r.participant_id = std::string(f[0]);
        try {
            r.label = parse_label(f[1]);
        } catch (const ValidationError& e) {
            throw ParseError(e.what(), line);
        }
        r.t_start = csv::parse_int(f[2], line);
        r.t_end = csv::parse_int(f[3], line);
        for (std::size_t i = 0; i < kNumFeatures; ++i) r.values[i] = csv::parse_optional(f[4 + i], line);
        rows.push_back(std::move(r));
    });
    return rows;
}

} // namespace flowphys

#endif // FLOWPHYS_FEATURES_HPP_
