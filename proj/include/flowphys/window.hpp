#ifndef FLOWPHYS_WINDOW_HPP_
#define FLOWPHYS_WINDOW_HPP_

#include "flowphys/clean.hpp"
#include "flowphys/common.hpp"
#include "flowphys/ingest.hpp"

#include <algorithm>
#include <vector>

namespace flowphys {

struct WindowConfig {
    std::size_t size_rr = 90;
    std::size_t overlap_rr = 30;
    std::size_t min_rr_for_freq = 64;

    std::size_t stride() const noexcept { return size_rr - overlap_rr; }

    void validate() const
    {
        if (overlap_rr >= size_rr) throw ConfigError("window.overlap_rr must be smaller than window.size_rr");
        if (size_rr < min_rr_for_freq) throw ConfigError("window.size_rr must be >= window.min_rr_for_freq");
        if (min_rr_for_freq < 2) throw ConfigError("window.min_rr_for_freq must be >= 2");
    }
};

/// Half-open range of RR indices [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const noexcept { return end - begin; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct Window {
    std::string participant_id;
    Label label = Label::rest;
    bool initial_rest = false;
    std::vector<RRSample> rr;
    EDASeries eda_slice;
    std::vector<PupilMean> pupil_slice;
    Timestamp t_start = 0;
    Timestamp t_end = 0;
};

/// Windows of `size_rr` intervals every `size_rr - overlap_rr`; a trailing
/// partial window is dropped.
inline std::vector<IndexRange> segment_windows(std::size_t n_intervals, const WindowConfig& cfg)
{
    std::vector<IndexRange> out;
    if (cfg.size_rr == 0 || cfg.overlap_rr >= cfg.size_rr) throw ConfigError("invalid window configuration");
    for (std::size_t b = 0; b + cfg.size_rr <= n_intervals; b += cfg.stride()) out.push_back({b, b + cfg.size_rr});
    return out;
}

inline std::vector<IndexRange> segment_windows(const RRSeries& rr, const WindowConfig& cfg)
{
    return segment_windows(rr.size(), cfg);
}

/// Builds a window over `range`, attaching every companion sample whose
/// timestamp lies in [t_start, t_end] (both ends inclusive).
inline Window attach_streams(const IndexRange& range, const RRSeries& rr, const EDASeries& eda,
                             const std::vector<PupilMean>& pupil)
{
    Window w;
    w.rr.assign(rr.samples.begin() + static_cast<std::ptrdiff_t>(range.begin),
                rr.samples.begin() + static_cast<std::ptrdiff_t>(range.end));
    w.t_start = w.rr.front().t;
    w.t_end = w.rr.back().t;
    w.eda_slice.unit = eda.unit;
    w.eda_slice.nominal_rate = eda.nominal_rate;
    for (const auto& s : eda.samples) {
        if (s.t >= w.t_start && s.t <= w.t_end) w.eda_slice.samples.push_back(s);
    }
    for (const auto& s : pupil) {
        if (s.t >= w.t_start && s.t <= w.t_end) w.pupil_slice.push_back(s);
    }
    return w;
}

} // namespace flowphys

#endif // FLOWPHYS_WINDOW_HPP_
