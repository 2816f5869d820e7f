#ifndef FLOWPHYS_SPECTRAL_HPP_
#define FLOWPHYS_SPECTRAL_HPP_

#include "flowphys/common.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace flowphys::dsp {

/// One-sided power spectral density on a uniform frequency grid.
struct Psd {
    std::vector<double> freq_hz;
    std::vector<double> density; // units^2 / Hz
    std::size_t segments = 0;
};

/// Mean of `x`, exact for constant input.
inline double anchored_mean(std::span<const double> x)
{
    if (x.empty()) return 0.0;
    const double anchor = x[0];
    double s = 0.0;
    for (double v : x) s += v - anchor;
    return anchor + s / static_cast<double>(x.size());
}

/// Periodic Hann taper.
inline std::vector<double> hann_periodic(std::size_t n)
{
    std::vector<double> w(n, 1.0);
    if (n <= 1) return w;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    }
    return w;
}

/// Welch estimate: segments of `seg_len` samples overlapping by
/// floor(seg_len * overlap), each mean-removed and Hann-tapered; periodograms
/// are density-scaled, folded to one side and averaged. Segments are short
/// (a few hundred samples) so a direct DFT with a twiddle table is used.
inline Psd welch(std::span<const double> x, double fs_hz, std::size_t seg_len, double overlap)
{
    Psd psd;
    const std::size_t n = x.size();
    if (n == 0 || seg_len == 0 || !(fs_hz > 0.0)) return psd;
    seg_len = std::min(seg_len, n);
    const auto noverlap = static_cast<std::size_t>(std::floor(static_cast<double>(seg_len) * overlap));
    const std::size_t step = std::max<std::size_t>(1, seg_len - std::min(noverlap, seg_len - 1));
    const auto w = hann_periodic(seg_len);
    double wss = 0.0;
    for (double v : w) wss += v * v;

    const std::size_t n_bins = seg_len / 2 + 1;
    std::vector<double> cos_t(seg_len), sin_t(seg_len);
    for (std::size_t i = 0; i < seg_len; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(seg_len);
        cos_t[i] = std::cos(a);
        sin_t[i] = std::sin(a);
    }

    psd.density.assign(n_bins, 0.0);
    psd.freq_hz.resize(n_bins);
    for (std::size_t k = 0; k < n_bins; ++k) {
        psd.freq_hz[k] = static_cast<double>(k) * fs_hz / static_cast<double>(seg_len);
    }

    std::vector<double> seg(seg_len);
    for (std::size_t start = 0; start + seg_len <= n; start += step) {
        const auto part = x.subspan(start, seg_len);
        const double m = anchored_mean(part);
        for (std::size_t i = 0; i < seg_len; ++i) seg[i] = (part[i] - m) * w[i];
        for (std::size_t k = 0; k < n_bins; ++k) {
            double re = 0.0, im = 0.0;
            std::size_t idx = 0;
            for (std::size_t i = 0; i < seg_len; ++i) {
                re += seg[i] * cos_t[idx];
                im -= seg[i] * sin_t[idx];
                idx += k;
                if (idx >= seg_len) idx -= seg_len;
            }
            double p = (re * re + im * im) / (fs_hz * wss);
            const bool nyquist = (seg_len % 2 == 0) && k == seg_len / 2;
            if (k != 0 && !nyquist) p *= 2.0;
            psd.density[k] += p;
        }
        ++psd.segments;
    }
    if (psd.segments > 0) {
        for (double& p : psd.density) p /= static_cast<double>(psd.segments);
    }
    return psd;
}

/// Integral of the piecewise-linear interpolant of the PSD over [lo, hi].
/// Integrals over adjacent bands add up exactly to the integral over their
/// union.
inline double band_power(const Psd& psd, double lo, double hi)
{
    const auto& f = psd.freq_hz;
    const auto& p = psd.density;
    if (f.size() < 2 || hi <= lo) return 0.0;
    auto interp = [&](std::size_t k, double x) {
        const double t = (x - f[k]) / (f[k + 1] - f[k]);
        return p[k] + t * (p[k + 1] - p[k]);
    };
    double area = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) {
        const double a = std::max(lo, f[k]);
        const double b = std::min(hi, f[k + 1]);
        if (b <= a) continue;
        area += 0.5 * (b - a) * (interp(k, a) + interp(k, b));
    }
    return area;
}

} // namespace flowphys::dsp

#endif // FLOWPHYS_SPECTRAL_HPP_
