#include "flowphys/features.hpp"
#include "flowphys/synth.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace flowphys;

namespace {

std::vector<RRSample> stamped(const std::vector<double>& rr, Timestamp t0 = 0)
{
    std::vector<RRSample> out;
    double t = static_cast<double>(t0);
    for (double v : rr) {
        t += v;
        out.push_back({static_cast<Timestamp>(std::llround(t)), v});
    }
    return out;
}

std::vector<RRSample> sinusoid_tachogram(double amp, double freq, std::size_t beats)
{
    synth::SynthSpec s;
    s.rr_base_ms = 1000.0;
    if (freq < 0.15) {
        s.lf_amp_ms = amp;
        s.lf_freq_hz = freq;
    } else {
        s.hf_amp_ms = amp;
        s.hf_freq_hz = freq;
    }
    s.duration_s = static_cast<double>(beats) + 5.0;
    auto rr = synth::synth_rr(s).rr.samples;
    rr.resize(beats);
    return rr;
}

void expect_rel(double got, double want, double rel, const char* what)
{
    EXPECT_LE(std::abs(got - want), rel * std::max(1.0, std::abs(want))) << what << ": " << got << " vs " << want;
}

} // namespace

TEST(TimeDomain, HandExample)
{
    const auto td = hrv_time_domain(std::vector<double>{800, 810, 790, 805});
    EXPECT_NEAR(td.rmssd, std::sqrt(725.0 / 3.0), 1e-12);
    EXPECT_NEAR(td.rmssd, 15.546, 5e-4);
    EXPECT_NEAR(td.sdNN, 8.539, 5e-4);
    EXPECT_EQ(td.nn[1], 2.0);
    EXPECT_NEAR(td.pnn[1], 200.0 / 3.0, 1e-12);
    EXPECT_NEAR(td.mRRi, 801.25, 1e-12);
}

TEST(TimeDomain, Constant)
{
    const auto td = hrv_time_domain(std::vector<double>(20, 1000.0));
    EXPECT_EQ(td.mHR, 60.0);
    EXPECT_EQ(td.sdHR, 0.0);
    EXPECT_EQ(td.rmssd, 0.0);
    for (double c : td.nn) EXPECT_EQ(c, 0.0);
}

TEST(TimeDomain, StrictThreshold)
{
    const auto td = hrv_time_domain(std::vector<double>{800, 860, 805});
    EXPECT_EQ(td.nn[3], 2.0);
    EXPECT_EQ(td.pnn[3], 100.0);
    const auto edge = hrv_time_domain(std::vector<double>{800, 850, 800});
    EXPECT_EQ(edge.nn[3], 0.0);
}

TEST(TimeDomain, TooShort)
{
    EXPECT_THROW(hrv_time_domain(std::vector<double>{800}), FeatureError);
}

TEST(TimeDomain, MatchesBruteForceOracle)
{
    Rng rng(2024);
    for (int w = 0; w < 100; ++w) {
        std::vector<double> rr(90);
        const double base = 600 + 500 * rng.uniform01();
        for (auto& v : rr) v = base + 40 * rng.normal();
        const auto td = hrv_time_domain(rr);
        const auto ref = oracle::time_domain(rr);
        const std::array<double, 15> got = {td.maxHR, td.minHR, td.mHR,   td.sdHR,   td.mRRi,
                                            td.sdNN,  td.rmssd, td.nn[0], td.nn[1],  td.nn[2],
                                            td.nn[3], td.pnn[0], td.pnn[1], td.pnn[2], td.pnn[3]};
        for (std::size_t i = 0; i < 15; ++i) expect_rel(got[i], ref[i], 1e-9, std::string(kFeatureNames[i]).c_str());
    }
}

TEST(Poincare, HandExample)
{
    const auto p = hrv_nonlinear(std::vector<double>{800, 810, 790, 805});
    // rmssd^2 = 725/3
    EXPECT_NEAR(p.SD1, std::sqrt(725.0 / 6.0), 1e-12);
    EXPECT_NEAR(p.SD1, 10.992, 5e-4);
    // 2 sdNN^2 - SD1^2 = 875/6 - 725/6 = 25
    EXPECT_NEAR(p.SD2, 5.0, 1e-12);
    ASSERT_TRUE(p.SD1_SD2);
    EXPECT_NEAR(*p.SD1_SD2, p.SD1 / 5.0, 1e-12);
}

TEST(Poincare, DegenerateAndAlternating)
{
    const auto c = hrv_nonlinear(std::vector<double>(10, 900.0));
    EXPECT_EQ(c.SD1, 0.0);
    EXPECT_EQ(c.SD2, 0.0);
    EXPECT_FALSE(c.SD1_SD2);

    std::vector<double> alt;
    for (int i = 0; i < 40; ++i) alt.push_back(i % 2 ? 900 : 800);
    EXPECT_NEAR(hrv_nonlinear(alt).SD1, 100.0 / std::numbers::sqrt2, 1e-9);
}

TEST(Welch, MatchesReferenceEstimator)
{
    // PSDs of the same series from an established Welch implementation
    // (Hann, constant detrend, density scaling).
    const std::vector<double> ref32 = {
        0.026593140572086876, 0.39460934646028817, 0.07262175335225345,  1.7475751929732624,
        2.085146804716866,    0.11202672064301514, 0.0018068242708019194, 0.00020385906204798662,
        0.00010315891191935607, 0.0016419502251505947, 0.12593999731885738, 0.2128413449702169,
        0.01933174053417122,  0.00016240384312711512, 1.4358715821451224e-05, 2.5381265560508725e-06,
        5.194366612874497e-07};
    const std::vector<double> ref37 = {
        0.0013550684072120242, 0.6110465901000884,    0.02178385443661824,   0.4612983375506989,
        3.081936310489358,     1.062497251207427,     0.0024260368095713873, 0.00018962043854523647,
        5.6052326311301864e-05, 5.3823694739217825e-05, 0.0002508630838169929, 0.017020848789723545,
        0.2322059401748877,    0.16353642015861594,   0.0030979120714666915, 8.821137252776906e-05,
        9.720783944370496e-06, 1.754374116328332e-06, 4.5563713181805906e-07};
    auto series = [](std::size_t n) {
        std::vector<double> x(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = static_cast<double>(i);
            x[i] = std::sin(0.7 * d) + 0.3 * std::cos(2.1 * d) + 0.05 * d;
        }
        return x;
    };
    const auto a = dsp::welch(series(100), 4.0, 32, 0.5);
    ASSERT_EQ(a.density.size(), ref32.size());
    for (std::size_t k = 0; k < ref32.size(); ++k) EXPECT_NEAR(a.density[k], ref32[k], 1e-12 + 1e-9 * ref32[k]) << k;
    EXPECT_DOUBLE_EQ(a.freq_hz[1], 0.125);

    // segment longer than the series shrinks to it
    const auto b = dsp::welch(series(37), 4.0, 256, 0.5);
    ASSERT_EQ(b.density.size(), ref37.size());
    for (std::size_t k = 0; k < ref37.size(); ++k) EXPECT_NEAR(b.density[k], ref37[k], 1e-12 + 1e-9 * ref37[k]) << k;
}

TEST(Welch, BandPowerOfLinearPsdIsExact)
{
    dsp::Psd p;
    p.freq_hz = {0.0, 0.1, 0.2, 0.3};
    p.density = {1.0, 3.0, 3.0, 0.0};
    // trapezoids: 0.2 + 0.3 + 0.15
    EXPECT_NEAR(dsp::band_power(p, 0.0, 0.3), 0.65, 1e-15);
    // partial bin: density at 0.05 is 2, at 0.25 is 1.5
    EXPECT_NEAR(dsp::band_power(p, 0.05, 0.1), 0.125, 1e-15);
    EXPECT_NEAR(dsp::band_power(p, 0.2, 0.25), 0.1125, 1e-15);
    EXPECT_EQ(dsp::band_power(p, 0.2, 0.2), 0.0);
}

TEST(Spectral, LowFrequencySinusoid)
{
    const auto fd = hrv_frequency_domain(sinusoid_tachogram(50.0, 0.10, 300), SpectralConfig{});
    EXPECT_GE(fd.LF / fd.total_power, 0.90);
    EXPECT_NEAR(fd.total_power, 1250.0, 0.2 * 1250.0);
}

TEST(Spectral, LowFrequencySinusoidSingleWindow)
{
    const auto fd = hrv_frequency_domain(sinusoid_tachogram(50.0, 0.10, 90), SpectralConfig{});
    EXPECT_GE(fd.LF / fd.total_power, 0.90);
    EXPECT_NEAR(fd.total_power, 1250.0, 0.2 * 1250.0);
}

TEST(Spectral, HighFrequencySinusoid)
{
    const auto fd = hrv_frequency_domain(sinusoid_tachogram(30.0, 0.30, 300), SpectralConfig{});
    EXPECT_GE(fd.HF / fd.total_power, 0.90);
    ASSERT_TRUE(fd.LFnu);
    EXPECT_LE(*fd.LFnu, 0.1);
}

TEST(Spectral, ConstantTachogram)
{
    const auto fd = hrv_frequency_domain(stamped(std::vector<double>(120, 850.0)), SpectralConfig{});
    EXPECT_EQ(fd.LF, 0.0);
    EXPECT_EQ(fd.HF, 0.0);
    EXPECT_EQ(fd.vLF, 0.0);
    EXPECT_EQ(fd.total_power, 0.0);
    EXPECT_FALSE(fd.LF_HF);
    EXPECT_FALSE(fd.LFnu);
}

TEST(Spectral, BandsPartitionTotal)
{
    Rng rng(5);
    for (int w = 0; w < 50; ++w) {
        std::vector<double> rr(90);
        for (auto& v : rr) v = 800 + 50 * rng.normal();
        const auto fd = hrv_frequency_domain(stamped(rr), SpectralConfig{});
        EXPECT_NEAR(fd.vLF + fd.LF + fd.HF, fd.total_power, 1e-9 * fd.total_power);
        ASSERT_TRUE(fd.LF_HF && fd.LFnu);
        EXPECT_NEAR(*fd.LFnu, *fd.LF_HF / (1 + *fd.LF_HF), 1e-12);
    }
}

TEST(Spectral, InvariantToTimeShift)
{
    Rng rng(9);
    std::vector<double> rr(90);
    for (auto& v : rr) v = 900 + 30 * rng.normal();
    const auto a = hrv_frequency_domain(stamped(rr, 0), SpectralConfig{});
    const auto b = hrv_frequency_domain(stamped(rr, 1'600'000'000'000), SpectralConfig{});
    EXPECT_EQ(a.LF, b.LF);
    EXPECT_EQ(a.HF, b.HF);
    EXPECT_EQ(a.total_power, b.total_power);
}

TEST(Spectral, TooShort)
{
    EXPECT_THROW(hrv_frequency_domain(stamped(std::vector<double>(63, 800.0)), SpectralConfig{}), FeatureError);
}

TEST(Peaks, SevenPlantedResponses)
{
    // 8 Hz conductance with seven separated 0.05 uS bumps on a 5 uS baseline
    std::vector<double> x;
    const double onsets[] = {10, 30, 50, 70, 90, 110, 130};
    for (int i = 0; i < 8 * 150; ++i) {
        const double t = i / 8.0;
        double v = 5.0;
        for (double o : onsets) v += synth::scr_shape(t - o, 0.05, 1.0, 3.0);
        x.push_back(v);
    }
    const auto p = detect_scr_peaks(x, 0.01);
    ASSERT_EQ(p.count, 7u);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(p.indices[i], static_cast<std::size_t>(8 * (onsets[i] + 1)));
}

TEST(Peaks, MonotoneAndSubThreshold)
{
    std::vector<double> up;
    for (int i = 0; i < 100; ++i) up.push_back(5.0 + 0.01 * i);
    EXPECT_EQ(detect_scr_peaks(up, 0.01).count, 0u);

    std::vector<double> small;
    for (int i = 0; i < 200; ++i) small.push_back(5.0 + synth::scr_shape(i / 8.0 - 5.0, 0.005, 1.0, 3.0));
    EXPECT_EQ(detect_scr_peaks(small, 0.01).count, 0u);
    EXPECT_EQ(detect_scr_peaks(std::vector<double>{1.0, 2.0}, 0.01).count, 0u);
}

TEST(Peaks, PlateauAndMerge)
{
    // plateau maximum counts once, at its first sample
    EXPECT_EQ(detect_scr_peaks(std::vector<double>{0, 1, 1, 1, 0}, 0.5).indices, (std::vector<std::size_t>{1}));
    // a dip shallower than the threshold does not close the response; the
    // higher maximum takes over
    EXPECT_EQ(detect_scr_peaks(std::vector<double>{0, 1, 0.8, 1.2, 0}, 0.5).indices, (std::vector<std::size_t>{3}));
    // a deep dip separates two responses
    EXPECT_EQ(detect_scr_peaks(std::vector<double>{0, 1, 0.2, 1.2, 0}, 0.5).count, 2u);
    // response still open at the end of the slice
    EXPECT_EQ(detect_scr_peaks(std::vector<double>{0, 0, 1, 0.9}, 0.5).count, 1u);
}

TEST(EdaFeatures, Examples)
{
    EDASeries e;
    for (int i = 0; i < 40; ++i) e.samples.push_back({i * 125, 5.0});
    auto f = eda_features(e);
    EXPECT_EQ(*f.mean, 5.0);
    EXPECT_EQ(*f.variance, 0.0);
    EXPECT_EQ(*f.peaks, 0.0);

    e.samples = {{0, 4.0}, {125, 6.0}};
    f = eda_features(e);
    EXPECT_EQ(*f.mean, 5.0);
    EXPECT_EQ(*f.variance, 2.0);

    f = eda_features(EDASeries{});
    EXPECT_FALSE(f.mean || f.variance || f.peaks);
}

TEST(PupilFeatures, Examples)
{
    auto p = pupil_features({{0, 3.0}, {10, 3.2}});
    EXPECT_NEAR(*p.mean, 3.1, 1e-12);
    EXPECT_NEAR(*p.variance, 0.02, 1e-12);
    EXPECT_NEAR(*pupil_features({{0, 2.8}, {1, 2.8}, {2, 2.8}}).variance, 0.0, 1e-28);
    p = pupil_features({});
    EXPECT_FALSE(p.mean || p.variance);
}

TEST(Extract, ComposesComponents)
{
    Rng rng(3);
    std::vector<double> rr(90);
    for (auto& v : rr) v = 820 + 25 * rng.normal();
    Window w;
    w.participant_id = "p03";
    w.label = Label::balanced_flow;
    w.rr = stamped(rr, 10'000);
    w.t_start = w.rr.front().t;
    w.t_end = w.rr.back().t;
    w.eda_slice.samples = {{w.t_start, 4.0}, {w.t_end, 6.0}};
    w.pupil_slice = {{w.t_start, 3.0}, {w.t_end, 3.2}};
    const auto row = extract_features(w);

    const auto ref = oracle::time_domain(rr);
    for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(*row.values[i], ref[i], 1e-9 * std::max(1.0, std::abs(ref[i])));
    EXPECT_NEAR(*row[Feature::SD1], *row[Feature::rmssd] / std::numbers::sqrt2, 1e-12);
    EXPECT_EQ(*row[Feature::EDA_mean], 5.0);
    EXPECT_NEAR(*row[Feature::pupil_diameter_mean], 3.1, 1e-12);
    EXPECT_EQ(row.participant_id, "p03");
    EXPECT_EQ(row.label, Label::balanced_flow);
    for (const auto& v : row.values) EXPECT_TRUE(v.has_value());
}

TEST(FeaturesCsv, HeaderOrderAndRoundTrip)
{
    const auto header = features_csv_header();
    EXPECT_EQ(header.rfind("participant_id,label,t_start,t_end,maxHR,minHR,mHR,sdHR,mRRi,sdNN,rmssd", 0), 0u);
    EXPECT_NE(header.find("SD1,SD2,SD1_SD2,EDA_mean,EDA_variance,peaks,pupil_diameter_mean,pupil_diameter_variance"),
              std::string::npos);

    FeatureRow r;
    r.participant_id = "p01";
    r.label = Label::not_flow;
    r.t_start = 5;
    r.t_end = 95;
    for (std::size_t i = 0; i < kNumFeatures; ++i) r.values[i] = 0.1 * static_cast<double>(i) + 1.0 / 3.0;
    r[Feature::LF_HF].reset();
    const std::string path = testing::TempDir() + "features_roundtrip.csv";
    csv::write_file(path, to_csv({r, r}));
    const auto back = load_features_csv(path);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[0].values, r.values);
    EXPECT_EQ(back[1].label, Label::not_flow);
    EXPECT_EQ(back[1].t_end, 95);
}

TEST(ZscorePerParticipant, IndependentGroups)
{
    std::vector<FeatureRow> rows(4);
    rows[0].participant_id = rows[1].participant_id = "a";
    rows[2].participant_id = rows[3].participant_id = "b";
    const double v[] = {1, 3, 100, 100};
    for (int i = 0; i < 4; ++i) rows[i][Feature::mHR] = v[i];
    rows[3][Feature::EDA_mean] = 2.0;
    const auto z = zscore_per_participant(rows);
    EXPECT_NEAR(*z[0][Feature::mHR], -1.0 / std::numbers::sqrt2, 1e-12);
    EXPECT_NEAR(*z[1][Feature::mHR], 1.0 / std::numbers::sqrt2, 1e-12);
    EXPECT_EQ(*z[2][Feature::mHR], 0.0);
    EXPECT_FALSE(z[2][Feature::EDA_mean]);
    EXPECT_EQ(*z[3][Feature::EDA_mean], 0.0);
}
