#ifndef FLOWPHYS_BUTTERWORTH_HPP_
#define FLOWPHYS_BUTTERWORTH_HPP_

#include "flowphys/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace flowphys::dsp {

/// One biquad, a0 normalised to 1, transposed direct form II.
struct Biquad {
    std::array<double, 3> b{};
    std::array<double, 3> a{1.0, 0.0, 0.0};

    std::complex<double> response(double omega) const
    {
        const std::complex<double> z1 = std::polar(1.0, -omega);
        const std::complex<double> z2 = z1 * z1;
        return (b[0] + b[1] * z1 + b[2] * z2) / (a[0] + a[1] * z1 + a[2] * z2);
    }

    double dc_gain() const { return (b[0] + b[1] + b[2]) / (a[0] + a[1] + a[2]); }
};

/// Cascade of second-order sections.
struct SosFilter {
    std::vector<Biquad> sections;

    /// Complex response at `freq_hz` for sampling rate `fs_hz`.
    std::complex<double> response(double freq_hz, double fs_hz) const
    {
        const double omega = 2.0 * std::numbers::pi * freq_hz / fs_hz;
        std::complex<double> h{1.0, 0.0};
        for (const auto& s : sections) h *= s.response(omega);
        return h;
    }
};

/// Digital Butterworth low-pass of the given order. `wn` is the cutoff as a
/// fraction of Nyquist (0 < wn < 1). Analog prototype poles are scaled to the
/// prewarped cutoff and mapped with the bilinear transform; each section is
/// normalised to unit DC gain.
inline SosFilter butterworth_lowpass_design(int order, double wn)
{
    if (order < 1) throw FilterError("butterworth order must be >= 1");
    if (!(wn > 0.0 && wn < 1.0)) throw FilterError("butterworth wn must lie in (0, 1)");

    // normalised sampling rate fs = 2 so that Nyquist = 1
    constexpr double fs = 2.0;
    const double warped = 2.0 * fs * std::tan(std::numbers::pi * wn / fs);

    SosFilter filt;
    const int n_pairs = order / 2;
    for (int k = 0; k < n_pairs; ++k) {
        // upper-half-plane prototype pole; its conjugate is implied
        const double theta = std::numbers::pi * (2.0 * k + 1.0 + order) / (2.0 * order);
        const std::complex<double> s_pole = warped * std::polar(1.0, theta);
        const std::complex<double> z_pole = (2.0 * fs + s_pole) / (2.0 * fs - s_pole);
        Biquad q;
        q.a = {1.0, -2.0 * z_pole.real(), std::norm(z_pole)};
        const double g = (q.a[0] + q.a[1] + q.a[2]) / 4.0;
        q.b = {g, 2.0 * g, g};
        filt.sections.push_back(q);
    }
    if (order % 2 == 1) {
        const double s_pole = -warped;
        const double z_pole = (2.0 * fs + s_pole) / (2.0 * fs - s_pole);
        Biquad q;
        q.a = {1.0, -z_pole, 0.0};
        const double g = (1.0 - z_pole) / 2.0;
        q.b = {g, g, 0.0};
        filt.sections.push_back(q);
    }
    return filt;
}

/// Single forward pass; `state` holds two delay values per section.
inline void sos_filter_inplace(const SosFilter& f, std::span<double> x, std::vector<std::array<double, 2>>& state)
{
    for (std::size_t s = 0; s < f.sections.size(); ++s) {
        const auto& q = f.sections[s];
        auto& z = state[s];
        for (double& v : x) {
            const double in = v;
            const double out = q.b[0] * in + z[0];
            z[0] = q.b[1] * in - q.a[1] * out + z[1];
            z[1] = q.b[2] * in - q.a[2] * out;
            v = out;
        }
    }
}

/// Steady-state delay values for a unit step input, per section.
inline std::vector<std::array<double, 2>> sos_step_state(const SosFilter& f)
{
    std::vector<std::array<double, 2>> zi(f.sections.size());
    double level = 1.0; // input level reaching this section
    for (std::size_t s = 0; s < f.sections.size(); ++s) {
        const auto& q = f.sections[s];
        const double y = q.dc_gain() * level;
        const double z1 = q.b[2] * level - q.a[2] * y;
        const double z0 = q.b[1] * level - q.a[1] * y + z1;
        zi[s] = {z0, z1};
        level = y;
    }
    return zi;
}

/// Zero-phase filtering: forward then backward pass with odd-extension
/// padding and steady-state initial conditions. Output length equals input.
inline std::vector<double> filtfilt(const SosFilter& f, std::span<const double> x)
{
    const std::size_t n = x.size();
    if (n == 0) return {};
    if (n == 1) return {x[0] * f.response(0.0, 1.0).real()};

    std::size_t padlen = 3 * (2 * f.sections.size() + 1);
    padlen = std::min(padlen, n - 1);

    std::vector<double> ext;
    ext.reserve(n + 2 * padlen);
    for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

    const auto zi = sos_step_state(f);
    auto scaled = [&](double v) {
        auto z = zi;
        for (auto& p : z) {
            p[0] *= v;
            p[1] *= v;
        }
        return z;
    };

    auto state = scaled(ext.front());
    sos_filter_inplace(f, ext, state);
    std::reverse(ext.begin(), ext.end());
    state = scaled(ext.front());
    sos_filter_inplace(f, ext, state);
    std::reverse(ext.begin(), ext.end());

    return {ext.begin() + static_cast<std::ptrdiff_t>(padlen),
            ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

} // namespace flowphys::dsp

#endif // FLOWPHYS_BUTTERWORTH_HPP_
