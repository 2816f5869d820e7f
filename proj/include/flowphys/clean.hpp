#ifndef FLOWPHYS_CLEAN_HPP_
#define FLOWPHYS_CLEAN_HPP_

#include "flowphys/butterworth.hpp"
#include "flowphys/common.hpp"
#include "flowphys/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flowphys {

struct CleanConfig {
    double ectopic_rel_threshold = 0.20;
    double pupil_rel_threshold = 0.10;
    double eda_upsample_hz = 8.0;
    int butter_order = 6;
    double butter_wn = 0.25;

    void validate() const
    {
        if (!(ectopic_rel_threshold > 0.0 && ectopic_rel_threshold < 1.0))
            throw ConfigError("clean.ectopic_rel_threshold must lie in (0, 1)");
        if (!(pupil_rel_threshold > 0.0 && pupil_rel_threshold < 1.0))
            throw ConfigError("clean.pupil_rel_threshold must lie in (0, 1)");
        if (!(eda_upsample_hz > 0.0)) throw ConfigError("clean.eda_upsample_hz must be positive");
        if (butter_order < 1) throw ConfigError("clean.butter_order must be >= 1");
        if (!(butter_wn > 0.0 && butter_wn < 1.0)) throw ConfigError("clean.butter_wn must lie in (0, 1)");
    }
};

/// Drops RR intervals deviating from the last retained interval by more than
/// `threshold` (relative). The first interval is always kept.
inline RRSeries remove_ectopic(const RRSeries& rr, double threshold)
{
    RRSeries out;
    out.samples.reserve(rr.size());
    for (const auto& s : rr.samples) {
        if (out.empty()) {
            out.samples.push_back(s);
            continue;
        }
        const double prev = out.samples.back().rr_ms;
        if (std::abs(s.rr_ms - prev) / prev <= threshold) out.samples.push_back(s);
    }
    return out;
}

struct PupilMean {
    Timestamp t = 0;
    double diameter_mm = 0.0;
    friend bool operator==(const PupilMean&, const PupilMean&) = default;
};

/// Keeps samples where both eyes are valid and agree within `threshold`
/// relative to their mean, and maps each to the mean diameter.
inline std::vector<PupilMean> clean_pupil(const PupilSeries& p, double threshold)
{
    std::vector<PupilMean> out;
    for (const auto& s : p.samples) {
        if (!s.left_valid || !s.right_valid) continue;
        const double m = 0.5 * (s.left_mm + s.right_mm);
        if (!(m > 0.0)) continue;
        if (std::abs(s.left_mm - s.right_mm) / m > threshold) continue;
        out.push_back({s.t, m});
    }
    return out;
}

/// kOhm -> uS as 1000 / value. Conductance series pass through.
inline EDASeries resistance_to_conductance(const EDASeries& e)
{
    if (e.unit == EdaUnit::conductance_us) return e;
    EDASeries out;
    out.unit = EdaUnit::conductance_us;
    out.nominal_rate = e.nominal_rate;
    out.samples.reserve(e.size());
    for (const auto& s : e.samples) {
        if (!(s.value > 0.0)) throw ValidationError("non-positive skin resistance", "clean");
        out.samples.push_back({s.t, 1000.0 / s.value});
    }
    return out;
}

/// Linear interpolation onto a uniform grid from the first to the last
/// timestamp at `target_hz`; grid timestamps are truncated to whole ms.
inline EDASeries resample_linear(const EDASeries& e, double target_hz)
{
    if (e.size() < 2) throw ResampleError("resampling needs at least two samples");
    if (!(target_hz > 0.0)) throw ResampleError("target rate must be positive");
    const double step = 1000.0 / target_hz;
    const double t0 = static_cast<double>(e.samples.front().t);
    const double t_last = static_cast<double>(e.samples.back().t);

    EDASeries out;
    out.unit = e.unit;
    out.nominal_rate = target_hz;
    std::size_t j = 0; // e.samples[j].t <= t < e.samples[j+1].t
    for (std::size_t k = 0;; ++k) {
        const double t = t0 + static_cast<double>(k) * step;
        if (t > t_last + 1e-9) break;
        while (j + 2 < e.size() && static_cast<double>(e.samples[j + 1].t) <= t) ++j;
        const auto& a = e.samples[j];
        const auto& b = e.samples[j + 1];
        double v;
        const double span = static_cast<double>(b.t - a.t);
        if (span <= 0.0 || t >= static_cast<double>(b.t)) {
            v = b.value;
        } else {
            const double w = (t - static_cast<double>(a.t)) / span;
            v = a.value + w * (b.value - a.value);
        }
        out.samples.push_back({static_cast<Timestamp>(std::trunc(t)), v});
    }
    return out;
}

/// True when consecutive timestamps are spaced 1000/rate ms apart (within the
/// 1 ms truncation of grid timestamps).
inline bool is_uniform(const EDASeries& e)
{
    if (!(e.nominal_rate > 0.0)) return false;
    const double step = 1000.0 / e.nominal_rate;
    for (std::size_t i = 1; i < e.size(); ++i) {
        const double d = static_cast<double>(e.samples[i].t - e.samples[i - 1].t);
        if (std::abs(d - step) > 1.0) return false;
    }
    return true;
}

/// Zero-phase Butterworth low-pass; `wn` is a fraction of Nyquist.
inline EDASeries butterworth_lowpass(const EDASeries& e, int order, double wn)
{
    if (!is_uniform(e)) throw FilterError("butterworth_lowpass requires a uniformly sampled series");
    const auto filt = dsp::butterworth_lowpass_design(order, wn);
    std::vector<double> x;
    x.reserve(e.size());
    for (const auto& s : e.samples) x.push_back(s.value);
    const auto y = dsp::filtfilt(filt, x);
    EDASeries out = e;
    for (std::size_t i = 0; i < y.size(); ++i) out.samples[i].value = y[i];
    return out;
}

/// Full skin-conductance conditioning: reciprocal, upsample, low-pass.
inline EDASeries condition_eda(const EDASeries& raw, const CleanConfig& cfg)
{
    auto us = resistance_to_conductance(raw);
    auto up = resample_linear(us, cfg.eda_upsample_hz);
    return butterworth_lowpass(up, cfg.butter_order, cfg.butter_wn);
}

/// (x - mean) / sd, or all zeros when sd == 0.
inline std::vector<double> zscore(const std::vector<double>& values, double mu, double sd)
{
    std::vector<double> out(values.size(), 0.0);
    if (sd == 0.0) return out;
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - mu) / sd;
    return out;
}

/// z-scores with the values' own mean and sample sd.
inline std::vector<double> zscore(const std::vector<double>& values)
{
    if (values.empty() || std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
        return std::vector<double>(values.size(), 0.0);
    }
    return zscore(values, mean(values), sample_sd(values));
}

} // namespace flowphys

#endif // FLOWPHYS_CLEAN_HPP_
