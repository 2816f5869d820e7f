// Acceptance checks; one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "flowphys/flowphys.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace flowphys;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void check(bool cond, const std::string& what)
    {
        if (!cond) {
            ok = false;
            detail << " [failed: " << what << "]";
        }
    }
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Outcome&)>& body)
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0) o.check(secs < budget_s, "runtime over " + format_double(budget_s) + " s");
    if (!o.ok) ++failures;
    std::printf("%s %2d. %s (%.2f s)%s\n", o.ok ? "PASS" : "FAIL", id, title.c_str(), secs, o.detail.str().c_str());
    std::fflush(stdout);
}

bool rel_close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(b), 1e-300); }

std::vector<RRSample> tachogram(double amp, double freq, std::size_t beats)
{
    synth::SynthSpec s;
    s.rr_base_ms = 1000;
    (freq < 0.15 ? s.lf_amp_ms : s.hf_amp_ms) = amp;
    (freq < 0.15 ? s.lf_freq_hz : s.hf_freq_hz) = freq;
    s.duration_s = static_cast<double>(beats) + 5;
    auto rr = synth::synth_rr(s).rr.samples;
    rr.resize(beats);
    return rr;
}

stats::ConditionTable table_of(std::vector<std::vector<double>> cells)
{
    stats::ConditionTable t;
    for (std::size_t j = 0; j < cells[0].size(); ++j) t.condition_names.push_back("c" + std::to_string(j));
    for (std::size_t i = 0; i < cells.size(); ++i) t.participants.push_back("s" + std::to_string(i));
    t.cells = std::move(cells);
    return t;
}

} // namespace

int main()
{
    testing_support::TempDir work("acceptance");
    const fs::path cohort_dir = work / "cohort";

    criterion(1, "time-domain features match brute-force oracle on 100 windows", 5.0, [](Outcome& o) {
        Rng rng(1);
        double worst = 0;
        for (int w = 0; w < 100; ++w) {
            std::vector<double> rr(90);
            const double base = 600 + 500 * rng.uniform01();
            const double spread = 5 + 60 * rng.uniform01();
            for (auto& v : rr) v = base + spread * rng.normal();
            const auto td = hrv_time_domain(rr);
            const auto ref = oracle::time_domain(rr);
            const std::array<double, 15> got = {td.maxHR,  td.minHR,  td.mHR,    td.sdHR,   td.mRRi,
                                                td.sdNN,   td.rmssd,  td.nn[0],  td.nn[1],  td.nn[2],
                                                td.nn[3],  td.pnn[0], td.pnn[1], td.pnn[2], td.pnn[3]};
            for (std::size_t i = 0; i < 15; ++i) {
                const double err = ref[i] == 0 ? std::abs(got[i]) : std::abs(got[i] - ref[i]) / std::abs(ref[i]);
                worst = std::max(worst, err);
            }
        }
        o.detail << " max rel err " << worst;
        o.check(worst <= 1e-9, "relative error above 1e-9");
    });

    criterion(2, "spectral identity for 0.10 Hz and 0.30 Hz tachograms", 5.0, [](Outcome& o) {
        const auto lf = hrv_frequency_domain(tachogram(50, 0.10, 300), SpectralConfig{});
        const auto hf = hrv_frequency_domain(tachogram(50, 0.30, 300), SpectralConfig{});
        o.detail << " LF/total " << lf.LF / lf.total_power << ", total " << lf.total_power << " ms^2, HF share "
                 << hf.HF / hf.total_power;
        o.check(lf.LF / lf.total_power >= 0.90, "LF share");
        o.check(std::abs(lf.total_power - 1250.0) <= 0.2 * 1250.0, "total power");
        o.check(hf.HF / hf.total_power >= 0.90, "HF share");
    });

    // bundled cohort: raw sessions generated from the default cohort layout
    synth::CohortSessionOptions cohort_opts;
    pipeline::cmd_synth_cohort(cohort_opts, cohort_dir);
    std::vector<FeatureRow> cohort_rows;

    criterion(3, "band, Poincare and normalised-unit identities on every cohort window", 0, [&](Outcome& o) {
        PipelineConfig cfg;
        for (const auto& dir : pipeline::find_sessions(cohort_dir)) {
            const auto rows = pipeline::session_features(load_session(dir), cfg);
            cohort_rows.insert(cohort_rows.end(), rows.begin(), rows.end());
        }
        std::size_t checked_lfnu = 0;
        for (const auto& r : cohort_rows) {
            const double parts = *r[Feature::vLF] + *r[Feature::LF] + *r[Feature::HF];
            o.check(rel_close(parts, *r[Feature::total_power], 1e-6), "band partition");
            o.check(std::abs(*r[Feature::SD1] - *r[Feature::rmssd] / std::numbers::sqrt2) <=
                        1e-12 * std::max(1.0, *r[Feature::SD1]),
                    "SD1 identity");
            if (*r[Feature::HF] > 0) {
                const double x = *r[Feature::LF_HF];
                o.check(std::abs(*r[Feature::LFnu] - x / (1 + x)) <= 1e-9, "LFnu identity");
                ++checked_lfnu;
            }
            if (!o.ok) break;
        }
        o.detail << " " << cohort_rows.size() << " windows, " << checked_lfnu << " with HF > 0";
        o.check(!cohort_rows.empty(), "no windows");
    });

    criterion(4, "zero-phase Butterworth passes 0.1 Hz within 1% and attenuates 2 Hz by >= 30 dB", 1.0, [](Outcome& o) {
        const double fs = 8.0;
        auto run = [&](double f) {
            EDASeries e;
            e.nominal_rate = fs;
            const std::size_t n = 8 * 200;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / fs;
                e.samples.push_back({static_cast<Timestamp>(i * 125), 5.0 + std::sin(2 * std::numbers::pi * f * t)});
            }
            const auto y = butterworth_lowpass(e, 6, 0.25);
            // peak-to-peak over the central part, away from the edges
            double lo = 1e300, hi = -1e300;
            for (std::size_t i = 400; i < n - 400; ++i) {
                lo = std::min(lo, y.samples[i].value);
                hi = std::max(hi, y.samples[i].value);
            }
            return (hi - lo) / 2.0;
        };
        const double pass = run(0.1), stop = run(2.0);
        o.detail << " 0.1 Hz gain " << pass << ", 2 Hz gain " << 20 * std::log10(stop) << " dB";
        o.check(std::abs(pass - 1.0) <= 0.01, "passband amplitude");
        o.check(20 * std::log10(stop) <= -30.0, "stopband attenuation");
    });

    criterion(5, "seven planted SCRs recovered through conversion, upsampling and filtering", 0, [](Outcome& o) {
        synth::SynthSpec s;
        s.duration_s = 300;
        s.scr_times_s = synth::spaced_scrs(7, s.duration_s, s.scr_rise_s, s.scr_decay_s);
        const auto raw = synth::synth_eda(s).eda;
        const auto cond = condition_eda(raw, CleanConfig{});
        std::vector<double> v;
        for (const auto& x : cond.samples) v.push_back(x.value);
        const auto peaks = detect_scr_peaks(v, 0.01);
        const auto pps = stats::peaks_per_second(static_cast<double>(peaks.count), static_cast<double>(v.size()));
        const double duration = static_cast<double>(v.size()) / 8.0;
        o.detail << " detected " << peaks.count << " over " << duration << " s, " << *pps << " peaks/s";
        o.check(peaks.count == 7, "peak count");
        o.check(std::abs(*pps - 7.0 / duration) <= 1e-9, "peaks per second");
    });

    criterion(6, "ectopic cleaning removes exactly the planted artifacts and is idempotent", 0, [](Outcome& o) {
        std::size_t planted = 0;
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            synth::SynthSpec s;
            s.seed = seed;
            s.lf_amp_ms = 40;
            s.hf_amp_ms = 25;
            s.jitter_sd_ms = 8;
            s.ectopic_rate = 0.04;
            const auto r = synth::synth_rr(s);
            const auto cleaned = remove_ectopic(r.rr, 0.2);
            std::vector<std::size_t> removed;
            for (std::size_t i = 0, j = 0; i < r.rr.size(); ++i) {
                if (j < cleaned.size() && cleaned.samples[j] == r.rr.samples[i]) ++j;
                else removed.push_back(i);
            }
            planted += r.truth.ectopic_indices.size();
            o.check(removed == r.truth.ectopic_indices, "removed set differs for seed " + std::to_string(seed));
            o.check(remove_ectopic(cleaned, 0.2) == cleaned, "not idempotent");
        }
        // hand-crafted series
        RRSeries hand;
        const double v[] = {800, 1000, 810, 812, 600, 805, 960};
        for (int i = 0; i < 7; ++i) hand.samples.push_back({i * 1000, v[i]});
        const auto c = remove_ectopic(hand, 0.2);
        std::vector<double> kept;
        for (const auto& x : c.samples) kept.push_back(x.rr_ms);
        o.check(kept == std::vector<double>{800, 810, 812, 805, 960}, "hand series");
        o.detail << " " << planted << " planted artifacts over 25 series";
    });

    criterion(7, "statistics oracles: rm_anova, Friedman, Wilcoxon, Holm, F and chi-square tails", 0, [](Outcome& o) {
        const auto a = stats::rm_anova(table_of({{2, 4, 6}, {3, 5, 4}, {4, 6, 8}}), false);
        o.check(std::abs(a.statistic - 7.0) <= 1e-9 && a.df == std::vector<double>{2, 4}, "F(2,4) = 7");
        o.check(std::abs(a.p - 0.049382716049382716049) <= 1e-6, "F tail");
        const auto f = stats::friedman(table_of({{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}));
        o.check(std::abs(f.statistic - 6.0) <= 1e-12, "Friedman 6");
        o.check(std::abs(f.p - 0.049787068367863942979) <= 1e-6, "chi-square tail");
        const auto w = stats::wilcoxon_signed_rank({1, -2, 3, -4, 5}, std::vector<double>(5, 0.0));
        o.check(w.exact && std::abs(w.p - 0.8125) <= 1e-12, "Wilcoxon exact p");
        const auto h = stats::holm_correction({0.01, 0.04, 0.03}, 0.05);
        const int rejected = h[0].rejected + h[1].rejected + h[2].rejected;
        o.check(rejected == 1 && h[0].rejected, "Holm rejections");
        // step-down with monotone enforcement: 3(0.01), max(.03, 2(.03)), max(.06, .04)
        o.check(std::abs(h[0].adjusted_p - 0.03) < 1e-15 && std::abs(h[1].adjusted_p - 0.06) < 1e-15 &&
                    std::abs(h[2].adjusted_p - 0.06) < 1e-15,
                "Holm adjusted");
        o.check(std::abs(special::betainc(10, 20, 0.35) - 0.59238666366390500246) <= 1e-6, "betainc reference");
        o.check(std::abs(special::gammainc_upper(10, 15) - 0.069853660699409767692) <= 1e-6, "gammainc reference");
        o.detail << " F=" << a.statistic << " p=" << a.p << ", chi2=" << f.statistic << ", W-=" << w.w_minus
                 << " p=" << w.p << ", Holm adjusted [" << h[0].adjusted_p << ", " << h[1].adjusted_p << ", "
                 << h[2].adjusted_p << "]";
    });

    const auto features = synth::synth_cohort({});
    const auto zrows = zscore_per_participant(features.rows);

    criterion(8, "linear SVM LOPO AUC >= 0.95 on separated cohort, chance on permuted labels", 60.0, [&](Outcome& o) {
        ModelConfig cfg;
        const auto nf = lopo_evaluate(relabel(zrows, Task::nonflow_vs_flow), cfg, 4);
        const auto rw = lopo_evaluate(relabel(zrows, Task::rest_vs_work), cfg, 4);
        const auto perm = zscore_per_participant(synth::permute_labels_within_participants(features.rows, 99));
        const auto np = lopo_evaluate(relabel(perm, Task::nonflow_vs_flow), cfg, 4);
        const auto rp = lopo_evaluate(relabel(perm, Task::rest_vs_work), cfg, 4);
        const double perm_mean = (*np.mean + *rp.mean) / 2.0;
        o.detail << " nonflow_vs_flow " << *nf.mean << ", rest_vs_work " << *rw.mean << ", permuted " << *np.mean
                 << " / " << *rp.mean;
        o.check(*nf.mean >= 0.95, "nonflow_vs_flow AUC");
        o.check(*rw.mean >= 0.95, "rest_vs_work AUC");
        o.check(perm_mean >= 0.4 && perm_mean <= 0.6, "permuted AUC outside [0.4, 0.6]");
    });

    criterion(9, "no fold trains on its held-out participant; same seed gives identical reports", 0, [&](Outcome& o) {
        PipelineConfig cfg;
        cfg.model.reps = 3;
        std::size_t folds = 0;
        for (auto task : kAllTasks) {
            const auto ds = relabel(zrows, task);
            lopo_evaluate(ds, cfg.model, 4, [&](const FoldTrace& t) {
                ++folds;
                for (const auto& s : *t.balanced_train) {
                    if (s.participant_id == t.held_out) o.check(false, "held-out row in training set");
                }
            });
        }
        for (auto kind : {ClassifierKind::linear_svm, ClassifierKind::random_forest}) {
            cfg.model.classifier = kind;
            const auto a = pipeline::cmd_eval(features.rows, Task::three_way, cfg, 1).dump();
            const auto b = pipeline::cmd_eval(features.rows, Task::three_way, cfg, 4).dump();
            o.check(a == b, "reports differ for " + std::string(to_string(kind)));
        }
        o.detail << " " << folds << " folds audited";
    });

    criterion(10, "end-to-end pipeline on the bundled cohort", 120.0, [&](Outcome& o) {
        PipelineConfig cfg;
        const auto out = pipeline::cmd_pipeline(cohort_dir, cfg, work / "out", 4);
        const auto header = testing_support::slurp(out.features_csv).substr(0, features_csv_header().size());
        o.check(header == features_csv_header(), "features.csv header");
        const auto rows = load_features_csv(out.features_csv.string());
        const auto report = nlohmann::json::parse(testing_support::slurp(out.stats_report));
        std::set<std::string> measures;
        std::set<std::size_t> widths;
        for (const auto& a : report) {
            measures.insert(a["measure"].get<std::string>());
            widths.insert(a["conditions"].size());
        }
        o.check(measures.size() >= 3, "fewer than 3 measures");
        o.check(widths == std::set<std::size_t>{3, 4}, "3-way and 4-way analyses");
        o.check(out.eval_reports.size() == 4, "eval reports");
        std::ostringstream evals;
        for (const auto& p : out.eval_reports) {
            const auto j = nlohmann::json::parse(testing_support::slurp(p));
            evals << ' ' << j["task"].get<std::string>() << '=' << j["mean"];
        }
        o.detail << " " << rows.size() << " windows, " << report.size() << " analyses," << evals.str();
    });

    std::printf("%s: %d failing criteria\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
