#ifndef FLOWPHYS_INGEST_HPP_
#define FLOWPHYS_INGEST_HPP_

#include "flowphys/common.hpp"
#include "flowphys/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace flowphys {

//-----------------------------------------------------------------------------
// stream types

struct RRSample {
    Timestamp t = 0;
    double rr_ms = 0.0;
    friend bool operator==(const RRSample&, const RRSample&) = default;
};

/// Interbeat intervals; the master clock for windowing.
struct RRSeries {
    std::vector<RRSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    friend bool operator==(const RRSeries&, const RRSeries&) = default;
};

enum class EdaUnit { resistance_kohm, conductance_us };

struct EDASample {
    Timestamp t = 0;
    double value = 0.0;
    friend bool operator==(const EDASample&, const EDASample&) = default;
};

struct EDASeries {
    std::vector<EDASample> samples;
    EdaUnit unit = EdaUnit::conductance_us;
    double nominal_rate = 0.0; // Hz

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    friend bool operator==(const EDASeries&, const EDASeries&) = default;
};

struct PupilSample {
    Timestamp t = 0;
    double left_mm = 0.0;
    double right_mm = 0.0;
    bool left_valid = false;
    bool right_valid = false;
    friend bool operator==(const PupilSample&, const PupilSample&) = default;
};

struct PupilSeries {
    std::vector<PupilSample> samples;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    friend bool operator==(const PupilSeries&, const PupilSeries&) = default;
};

struct TaskSegment {
    std::string participant_id;
    Label label = Label::rest;
    Timestamp nominal_start = 0;
    Timestamp nominal_end = 0;
    /// Rest recorded before the first task; excluded from rest analyses.
    bool initial_rest = false;
    friend bool operator==(const TaskSegment&, const TaskSegment&) = default;
};

struct Session {
    std::string participant_id;
    RRSeries rr;
    EDASeries eda;
    PupilSeries pupil;
    std::vector<TaskSegment> segments;
    double eda_rate_hz = 5.0;
};

inline std::string_view unit_token(EdaUnit u) noexcept
{
    return u == EdaUnit::resistance_kohm ? "kohm" : "us";
}

//-----------------------------------------------------------------------------
// validation

inline void validate(const RRSeries& rr)
{
    for (std::size_t i = 0; i < rr.samples.size(); ++i) {
        if (!(rr.samples[i].rr_ms > 0.0)) {
            throw ValidationError("non-positive rr at sample " + std::to_string(i));
        }
        if (i > 0 && rr.samples[i].t <= rr.samples[i - 1].t) {
            throw ValidationError("rr timestamps not strictly increasing at sample " + std::to_string(i));
        }
    }
}

inline void validate(const EDASeries& e)
{
    for (std::size_t i = 0; i < e.samples.size(); ++i) {
        if (!(e.samples[i].value > 0.0)) throw ValidationError("non-positive eda value at sample " + std::to_string(i));
        if (i > 0 && e.samples[i].t < e.samples[i - 1].t) {
            throw ValidationError("eda timestamps decreasing at sample " + std::to_string(i));
        }
    }
}

inline void validate(const PupilSeries& p)
{
    auto ok = [](double d) { return d > 0.0 && d < 12.0; };
    for (std::size_t i = 0; i < p.samples.size(); ++i) {
        const auto& s = p.samples[i];
        if ((s.left_valid && !ok(s.left_mm)) || (s.right_valid && !ok(s.right_mm))) {
            throw ValidationError("valid pupil diameter outside (0, 12) mm at sample " + std::to_string(i));
        }
        if (i > 0 && s.t < p.samples[i - 1].t) {
            throw ValidationError("pupil timestamps decreasing at sample " + std::to_string(i));
        }
    }
}

/// Segments must be well-formed, belong to `participant_id` and not overlap.
inline void validate(const std::vector<TaskSegment>& segments, const std::string& participant_id)
{
    for (const auto& s : segments) {
        if (s.participant_id != participant_id) throw ValidationError("segment belongs to another participant");
        if (s.nominal_start >= s.nominal_end) throw ValidationError("segment start_ms must precede end_ms");
    }
    std::vector<const TaskSegment*> sorted;
    for (const auto& s : segments) sorted.push_back(&s);
    std::sort(sorted.begin(), sorted.end(),
              [](auto* a, auto* b) { return a->nominal_start < b->nominal_start; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        // inclusive ranges: sharing an endpoint is already an overlap
        if (sorted[i]->nominal_start <= sorted[i - 1]->nominal_end) {
            throw ValidationError("segments overlap at " + std::to_string(sorted[i]->nominal_start) + " ms");
        }
    }
}

//-----------------------------------------------------------------------------
// loaders

inline RRSeries load_rr_csv(const std::string& path)
{
    RRSeries rr;
    csv::read_file(path, "timestamp_ms,rr_ms", [&](const auto& f, std::size_t line) {
        const Timestamp t = csv::parse_int(f[0], line);
        const double v = csv::parse_double(f[1], line);
        if (!(v > 0.0)) throw ValidationError("non-positive rr on line " + std::to_string(line));
        rr.samples.push_back({t, v});
    });
    std::stable_sort(rr.samples.begin(), rr.samples.end(), [](auto& a, auto& b) { return a.t < b.t; });
    validate(rr);
    return rr;
}

inline EDASeries load_eda_csv(const std::string& path, double nominal_rate_hz = 5.0)
{
    EDASeries e;
    e.nominal_rate = nominal_rate_hz;
    bool have_unit = false;
    csv::read_file(path, "timestamp_ms,value,unit", [&](const auto& f, std::size_t line) {
        EdaUnit u;
        if (f[2] == "kohm") u = EdaUnit::resistance_kohm;
        else if (f[2] == "us") u = EdaUnit::conductance_us;
        else throw ParseError("unknown eda unit '" + std::string(f[2]) + "'", line);
        if (have_unit && u != e.unit) throw ParseError("mixed eda units", line);
        e.unit = u;
        have_unit = true;
        e.samples.push_back({csv::parse_int(f[0], line), csv::parse_double(f[1], line)});
    });
    std::stable_sort(e.samples.begin(), e.samples.end(), [](auto& a, auto& b) { return a.t < b.t; });
    validate(e);
    return e;
}

inline PupilSeries load_pupil_csv(const std::string& path)
{
    PupilSeries p;
    auto flag = [](std::string_view s, std::size_t line) {
        if (s == "1") return true;
        if (s == "0") return false;
        throw ParseError("validity flag must be 0 or 1", line);
    };
    csv::read_file(path, "timestamp_ms,left_mm,right_mm,left_valid,right_valid", [&](const auto& f, std::size_t line) {
        p.samples.push_back({csv::parse_int(f[0], line), csv::parse_double(f[1], line), csv::parse_double(f[2], line),
                             flag(f[3], line), flag(f[4], line)});
    });
    std::stable_sort(p.samples.begin(), p.samples.end(), [](auto& a, auto& b) { return a.t < b.t; });
    validate(p);
    return p;
}

struct Manifest {
    std::string participant_id;
    std::vector<TaskSegment> segments;
    double eda_hz = 5.0;
};

inline Manifest parse_manifest(const nlohmann::json& j)
{
    Manifest m;
    try {
        m.participant_id = j.at("participant_id").get<std::string>();
        for (const auto& s : j.at("segments")) {
            TaskSegment seg;
            seg.participant_id = m.participant_id;
            seg.label = parse_label(s.at("label").get<std::string>());
            seg.nominal_start = s.at("start_ms").get<Timestamp>();
            seg.nominal_end = s.at("end_ms").get<Timestamp>();
            seg.initial_rest = s.value("initial_rest", false);
            if (seg.initial_rest && seg.label != Label::rest) {
                throw ValidationError("initial_rest set on a non-rest segment");
            }
            m.segments.push_back(seg);
        }
        if (j.contains("rates")) m.eda_hz = j.at("rates").value("eda_hz", 5.0);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest: ") + e.what());
    }
    if (!(m.eda_hz > 0.0)) throw ValidationError("rates.eda_hz must be positive");
    validate(m.segments, m.participant_id);
    return m;
}

inline Manifest load_manifest(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("manifest '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_manifest(j);
}

inline nlohmann::json to_json(const Manifest& m)
{
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : m.segments) {
        nlohmann::json js = {{"label", to_string(s.label)}, {"start_ms", s.nominal_start}, {"end_ms", s.nominal_end}};
        if (s.initial_rest) js["initial_rest"] = true;
        segs.push_back(std::move(js));
    }
    return {{"participant_id", m.participant_id}, {"segments", segs}, {"rates", {{"eda_hz", m.eda_hz}}}};
}

/// Loads rr.csv, eda.csv, pupil.csv and manifest.json from a session directory.
inline Session load_session(const std::filesystem::path& dir)
{
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path)) {
        throw ValidationError("missing manifest.json in '" + dir.string() + "'");
    }
    Manifest m = load_manifest(manifest_path.string());
    Session s;
    s.participant_id = m.participant_id;
    s.segments = std::move(m.segments);
    s.eda_rate_hz = m.eda_hz;
    s.rr = load_rr_csv((dir / "rr.csv").string());
    s.eda = load_eda_csv((dir / "eda.csv").string(), m.eda_hz);
    s.pupil = load_pupil_csv((dir / "pupil.csv").string());
    return s;
}

//-----------------------------------------------------------------------------
// writers

inline std::string to_csv(const RRSeries& rr)
{
    std::ostringstream os;
    os << "timestamp_ms,rr_ms\n";
    for (const auto& s : rr.samples) os << s.t << ',' << format_double(s.rr_ms) << '\n';
    return os.str();
}

inline std::string to_csv(const EDASeries& e)
{
    std::ostringstream os;
    os << "timestamp_ms,value,unit\n";
    for (const auto& s : e.samples) os << s.t << ',' << format_double(s.value) << ',' << unit_token(e.unit) << '\n';
    return os.str();
}

inline std::string to_csv(const PupilSeries& p)
{
    std::ostringstream os;
    os << "timestamp_ms,left_mm,right_mm,left_valid,right_valid\n";
    for (const auto& s : p.samples) {
        os << s.t << ',' << format_double(s.left_mm) << ',' << format_double(s.right_mm) << ','
           << (s.left_valid ? 1 : 0) << ',' << (s.right_valid ? 1 : 0) << '\n';
    }
    return os.str();
}

inline void write_session(const std::filesystem::path& dir, const Session& s)
{
    std::filesystem::create_directories(dir);
    csv::write_file((dir / "rr.csv").string(), to_csv(s.rr));
    csv::write_file((dir / "eda.csv").string(), to_csv(s.eda));
    csv::write_file((dir / "pupil.csv").string(), to_csv(s.pupil));
    Manifest m{s.participant_id, s.segments, s.eda_rate_hz};
    csv::write_file((dir / "manifest.json").string(), to_json(m).dump(2) + "\n");
}

//-----------------------------------------------------------------------------
// cropping

struct CroppedStreams {
    RRSeries rr;
    EDASeries eda;
    PupilSeries pupil;
    Timestamp effective_start = 0;
    Timestamp effective_end = 0;
};

namespace detail {

template <typename Samples>
Samples within(const Samples& s, Timestamp lo, Timestamp hi)
{
    Samples out;
    for (const auto& x : s) {
        if (x.t >= lo && x.t <= hi) out.push_back(x);
    }
    return out;
}

} // namespace detail

/// Restricts all three streams to the common time range of a segment: the
/// latest first sample and earliest last sample across streams, bounded by
/// the segment's nominal range. One pass only. Re-cropping the output is the
/// identity when the streams have samples at both range ends; on staggered
/// grids it can shrink the range by a sample period.
inline CroppedStreams crop_to_segment(const RRSeries& rr, const EDASeries& eda, const PupilSeries& pupil,
                                      const TaskSegment& seg)
{
    CroppedStreams out;
    out.eda.unit = eda.unit;
    out.eda.nominal_rate = eda.nominal_rate;
    out.rr.samples = detail::within(rr.samples, seg.nominal_start, seg.nominal_end);
    out.eda.samples = detail::within(eda.samples, seg.nominal_start, seg.nominal_end);
    out.pupil.samples = detail::within(pupil.samples, seg.nominal_start, seg.nominal_end);
    if (out.rr.empty()) throw CropError("rr", "rr stream has no samples in segment");
    if (out.eda.empty()) throw CropError("eda", "eda stream has no samples in segment");
    if (out.pupil.empty()) throw CropError("pupil", "pupil stream has no samples in segment");
    const Timestamp lo = std::max({seg.nominal_start, out.rr.samples.front().t, out.eda.samples.front().t,
                                   out.pupil.samples.front().t});
    const Timestamp hi = std::min({seg.nominal_end, out.rr.samples.back().t, out.eda.samples.back().t,
                                   out.pupil.samples.back().t});
    if (lo > hi) throw CropError("all", "streams do not overlap within segment");
    out.rr.samples = detail::within(out.rr.samples, lo, hi);
    out.eda.samples = detail::within(out.eda.samples, lo, hi);
    out.pupil.samples = detail::within(out.pupil.samples, lo, hi);
    out.effective_start = lo;
    out.effective_end = hi;
    return out;
}

inline CroppedStreams crop_to_segment(const Session& s, const TaskSegment& seg)
{
    return crop_to_segment(s.rr, s.eda, s.pupil, seg);
}

} // namespace flowphys

#endif // FLOWPHYS_INGEST_HPP_
