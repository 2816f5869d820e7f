#ifndef FLOWPHYS_STATS_HPP_
#define FLOWPHYS_STATS_HPP_

#include "flowphys/common.hpp"
#include "flowphys/features.hpp"
#include "flowphys/special_functions.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace flowphys::stats {

/// Participants x conditions matrix of per-participant condition means.
struct ConditionTable {
    std::string measure;
    std::vector<std::string> condition_names;
    std::vector<std::string> participants;
    std::vector<std::vector<double>> cells; // [participant][condition]
    std::vector<std::string> excluded;      // participants lacking a condition

    std::size_t n() const noexcept { return cells.size(); }
    std::size_t k() const noexcept { return condition_names.size(); }

    std::vector<double> column(std::size_t j) const
    {
        std::vector<double> c;
        c.reserve(cells.size());
        for (const auto& row : cells) c.push_back(row[j]);
        return c;
    }
};

struct PostHoc {
    std::string first, second;
    double statistic = 0.0;
    double p_raw = 1.0;
    double p_holm = 1.0;
    bool rejected = false;
};

struct TestResult {
    std::string test;
    double statistic = 0.0;
    std::vector<double> df;
    double p = 1.0;
    std::optional<double> epsilon_hf;
    std::optional<double> epsilon_gg;
    bool degenerate = false;
    std::vector<PostHoc> posthoc;

    // anova sums of squares
    double ss_total = 0.0, ss_cond = 0.0, ss_subj = 0.0, ss_err = 0.0;
    // wilcoxon rank sums
    double w_plus = 0.0, w_minus = 0.0;
    bool exact = false;
};

//-----------------------------------------------------------------------------
// aggregation

/// Peak count normalised by recording length in seconds.
inline MaybeDouble peaks_per_second(double peak_count, double n_samples, double rate_hz = 8.0)
{
    if (!(n_samples > 0.0) || !(rate_hz > 0.0)) return std::nullopt;
    return peak_count / (n_samples / rate_hz);
}

inline constexpr std::string_view kPeaksPerSecond = "peaks_per_second";

/// Value of `measure` for one window row. Besides the 29 features this
/// accepts "peaks_per_second", with the sample count implied by the window
/// span at `eda_rate_hz`.
inline MaybeDouble measure_value(const FeatureRow& r, std::string_view measure, double eda_rate_hz = 8.0)
{
    if (measure == kPeaksPerSecond) {
        const auto& pk = r[Feature::peaks];
        if (!pk) return std::nullopt;
        const double n_samples =
            std::floor(static_cast<double>(r.t_end - r.t_start) * eda_rate_hz / 1000.0) + 1.0;
        return peaks_per_second(*pk, n_samples, eda_rate_hz);
    }
    const auto idx = feature_index(measure);
    if (!idx) throw ValidationError("unknown measure '" + std::string(measure) + "'", "stats");
    return r.values[*idx];
}

/// Averages each participant's window values per condition. Rest pools the
/// rest periods that follow tasks; the initial rest is never included.
/// Participants missing any condition are excluded and listed.
inline ConditionTable aggregate_by_condition(const std::vector<FeatureRow>& rows, std::string_view measure,
                                             const std::vector<Label>& conditions, double eda_rate_hz = 8.0)
{
    ConditionTable t;
    t.measure = std::string(measure);
    for (auto c : conditions) t.condition_names.emplace_back(to_string(c));

    std::map<std::string, std::vector<std::vector<double>>> acc;
    for (const auto& r : rows) {
        if (r.initial_rest) continue;
        auto& per = acc[r.participant_id];
        per.resize(conditions.size());
        const auto it = std::find(conditions.begin(), conditions.end(), r.label);
        if (it == conditions.end()) continue;
        const auto v = measure_value(r, measure, eda_rate_hz);
        if (!v) continue;
        per[static_cast<std::size_t>(it - conditions.begin())].push_back(*v);
    }
    for (const auto& [pid, per] : acc) {
        bool complete = true;
        std::vector<double> row;
        for (const auto& vals : per) {
            if (vals.empty()) {
                complete = false;
                break;
            }
            row.push_back(mean(vals));
        }
        if (!complete) {
            t.excluded.push_back(pid);
            continue;
        }
        t.participants.push_back(pid);
        t.cells.push_back(std::move(row));
    }
    return t;
}

//-----------------------------------------------------------------------------
// repeated-measures ANOVA

/// Greenhouse-Geisser epsilon from the double-centred condition covariance.
inline double greenhouse_geisser_epsilon(const ConditionTable& t)
{
    const std::size_t n = t.n(), k = t.k();
    if (k < 2 || n < 2) return 1.0;
    std::vector<double> mu(k);
    for (std::size_t j = 0; j < k; ++j) mu[j] = mean(t.column(j));
    std::vector<std::vector<double>> s(k, std::vector<double>(k, 0.0));
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += (t.cells[i][a] - mu[a]) * (t.cells[i][b] - mu[b]);
            s[a][b] = acc / static_cast<double>(n - 1);
        }
    }
    std::vector<double> rm(k, 0.0), cm(k, 0.0);
    double gm = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            rm[a] += s[a][b] / static_cast<double>(k);
            cm[b] += s[a][b] / static_cast<double>(k);
            gm += s[a][b] / static_cast<double>(k * k);
        }
    }
    double tr = 0.0, sq = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            const double v = s[a][b] - rm[a] - cm[b] + gm;
            sq += v * v;
            if (a == b) tr += v;
        }
    }
    if (!(sq > 0.0)) return 1.0;
    return std::clamp(tr * tr / (static_cast<double>(k - 1) * sq), 1.0 / static_cast<double>(k - 1), 1.0);
}

/// Huynh-Feldt correction of a Greenhouse-Geisser epsilon, bounded to
/// [1/(k-1), 1].
inline double huynh_feldt_epsilon(double eps_gg, std::size_t n, std::size_t k)
{
    const double nn = static_cast<double>(n);
    const double km1 = static_cast<double>(k) - 1.0;
    if (km1 <= 0.0) return 1.0;
    const double num = nn * km1 * eps_gg - 2.0;
    const double den = km1 * (nn - 1.0 - km1 * eps_gg);
    if (!(den > 0.0)) return 1.0;
    return std::clamp(num / den, 1.0 / km1, 1.0);
}

/// One-way repeated-measures ANOVA, participant as random factor. Degrees of
/// freedom are scaled by the Huynh-Feldt epsilon when `apply_hf` is set.
inline TestResult rm_anova(const ConditionTable& t, bool apply_hf = true)
{
    const std::size_t n = t.n(), k = t.k();
    if (n < 2 || k < 2) throw ValidationError("rm_anova needs at least 2 participants and 2 conditions", "stats");
    TestResult r;
    r.test = "rm_anova";

    double grand = 0.0;
    for (const auto& row : t.cells) for (double v : row) grand += v;
    grand /= static_cast<double>(n * k);
    std::vector<double> row_mean(n, 0.0), col_mean(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            row_mean[i] += t.cells[i][j] / static_cast<double>(k);
            col_mean[j] += t.cells[i][j] / static_cast<double>(n);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        r.ss_subj += static_cast<double>(k) * (row_mean[i] - grand) * (row_mean[i] - grand);
        for (std::size_t j = 0; j < k; ++j) {
            const double dev = t.cells[i][j] - grand;
            const double res = t.cells[i][j] - row_mean[i] - col_mean[j] + grand;
            r.ss_total += dev * dev;
            r.ss_err += res * res;
        }
    }
    for (std::size_t j = 0; j < k; ++j) r.ss_cond += static_cast<double>(n) * (col_mean[j] - grand) * (col_mean[j] - grand);

    const double df1 = static_cast<double>(k - 1);
    const double df2 = static_cast<double>((k - 1) * (n - 1));
    const double eps_gg = greenhouse_geisser_epsilon(t);
    const double eps_hf = huynh_feldt_epsilon(eps_gg, n, k);
    r.epsilon_gg = eps_gg;
    r.epsilon_hf = eps_hf;
    const double scale = apply_hf ? eps_hf : 1.0;
    r.df = {df1 * scale, df2 * scale};

    const double noise_floor = 1e-12 * std::max(r.ss_total, std::numeric_limits<double>::min());
    if (r.ss_err <= noise_floor) {
        if (r.ss_cond <= noise_floor) {
            r.statistic = 0.0;
            r.p = 1.0;
        } else {
            r.degenerate = true;
            r.statistic = std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
        return r;
    }
    r.statistic = (r.ss_cond / df1) / (r.ss_err / df2);
    r.p = special::f_sf(r.statistic, r.df[0], r.df[1]);
    return r;
}

//-----------------------------------------------------------------------------
// rank tests

/// Midranks (1-based) of `v`.
inline std::vector<double> midranks(const std::vector<double>& v)
{
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Friedman chi-square on within-participant midranks (no tie correction).
inline TestResult friedman(const ConditionTable& t)
{
    const std::size_t n = t.n(), k = t.k();
    if (n < 2 || k < 2) throw ValidationError("friedman needs at least 2 participants and 2 conditions", "stats");
    std::vector<double> rank_sum(k, 0.0);
    for (const auto& row : t.cells) {
        const auto r = midranks(row);
        for (std::size_t j = 0; j < k; ++j) rank_sum[j] += r[j];
    }
    const double nn = static_cast<double>(n), kk = static_cast<double>(k);
    const double expected = nn * (kk + 1.0) / 2.0;
    double ss = 0.0;
    for (double rs : rank_sum) ss += (rs - expected) * (rs - expected);
    TestResult res;
    res.test = "friedman";
    res.statistic = 12.0 / (nn * kk * (kk + 1.0)) * ss;
    res.df = {kk - 1.0};
    res.p = special::chi2_sf(res.statistic, kk - 1.0);
    return res;
}

/// Number of subsets of {1..n} with each possible rank sum.
inline std::vector<double> signed_rank_counts(std::size_t n)
{
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<double> c(max_sum + 1, 0.0);
    c[0] = 1.0;
    for (std::size_t r = 1; r <= n; ++r) {
        for (std::size_t s = max_sum; s >= r; --s) c[s] += c[s - r];
    }
    return c;
}

inline constexpr std::size_t kWilcoxonExactMax = 25;

/// Wilcoxon signed-rank test on paired samples. Zero differences are
/// dropped. Exact two-sided p for at most 25 untied pairs, otherwise the
/// normal approximation with tie-corrected variance and continuity correction.
inline TestResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size()) throw ValidationError("wilcoxon needs paired samples of equal length", "stats");
    TestResult r;
    r.test = "wilcoxon";
    r.df = {};
    std::vector<double> d, mag;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] - y[i];
        if (v != 0.0) {
            d.push_back(v);
            mag.push_back(std::abs(v));
        }
    }
    const std::size_t n = d.size();
    if (n == 0) {
        r.statistic = 0.0;
        r.p = 1.0;
        r.exact = true;
        return r;
    }
    const auto ranks = midranks(mag);
    for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? r.w_plus : r.w_minus) += ranks[i];
    r.statistic = std::min(r.w_plus, r.w_minus);

    std::map<double, std::size_t> tie_sizes;
    for (double m : mag) ++tie_sizes[m];
    const bool ties = tie_sizes.size() != n;

    if (n <= kWilcoxonExactMax && !ties) {
        const auto counts = signed_rank_counts(n);
        const double total = std::ldexp(1.0, static_cast<int>(n));
        double tail = 0.0;
        const auto w = static_cast<std::size_t>(std::llround(r.statistic));
        for (std::size_t s = 0; s <= w; ++s) tail += counts[s];
        r.p = std::min(1.0, 2.0 * tail / total);
        r.exact = true;
        return r;
    }
    const double nn = static_cast<double>(n);
    const double mu = nn * (nn + 1.0) / 4.0;
    double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
    for (const auto& [v, t] : tie_sizes) {
        const double tt = static_cast<double>(t);
        var -= (tt * tt * tt - tt) / 48.0;
    }
    if (!(var > 0.0)) {
        r.p = 1.0;
        return r;
    }
    const double z = std::max(0.0, (std::abs(r.statistic - mu) - 0.5) / std::sqrt(var));
    r.p = std::min(1.0, 2.0 * special::normal_sf(z));
    return r;
}

/// Two-sided paired t-test.
inline TestResult paired_t_test(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("paired t-test needs >= 2 equal-length pairs", "stats");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    const double m = mean(d);
    const double sd = sample_sd(d);
    TestResult r;
    r.test = "paired_t";
    r.df = {static_cast<double>(d.size() - 1)};
    if (sd == 0.0) {
        r.statistic = m == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), m);
        r.p = m == 0.0 ? 1.0 : 0.0;
        r.degenerate = m != 0.0;
        return r;
    }
    r.statistic = m / (sd / std::sqrt(static_cast<double>(d.size())));
    r.p = special::t_two_sided(r.statistic, r.df[0]);
    return r;
}

//-----------------------------------------------------------------------------
// multiple comparisons

struct HolmOutcome {
    double adjusted_p = 1.0;
    bool rejected = false;
};

/// Holm step-down; results are in input order.
inline std::vector<HolmOutcome> holm_correction(const std::vector<double>& p, double alpha = 0.05)
{
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<HolmOutcome> out(m);
    double running = 0.0;
    bool still_rejecting = true;
    for (std::size_t i = 0; i < m; ++i) {
        const double factor = static_cast<double>(m - i);
        const double pi = p[order[i]];
        running = std::max(running, std::min(1.0, factor * pi));
        out[order[i]].adjusted_p = running;
        if (still_rejecting && pi <= alpha / factor) {
            out[order[i]].rejected = true;
        } else {
            still_rejecting = false;
        }
    }
    return out;
}

//-----------------------------------------------------------------------------
// driver

enum class TestPath { parametric, nonparametric };

inline std::string_view to_string(TestPath p) { return p == TestPath::parametric ? "parametric" : "nonparametric"; }

inline TestPath parse_path(std::string_view s)
{
    if (s == "parametric") return TestPath::parametric;
    if (s == "nonparametric") return TestPath::nonparametric;
    throw ConfigError("stats path must be 'parametric' or 'nonparametric', got '" + std::string(s) + "'");
}

struct GroupSummary {
    std::string condition;
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

struct Analysis {
    std::string measure;
    std::vector<std::string> conditions;
    TestPath path = TestPath::nonparametric;
    TestResult result;
    std::vector<GroupSummary> group_summaries;
    std::vector<std::string> excluded;
};

/// Omnibus test on a condition table plus Holm-corrected pairwise
/// post-hocs: rm_anova with paired t-tests, or Friedman with Wilcoxon.
inline Analysis analyze(const ConditionTable& t, TestPath path, double alpha = 0.05, bool apply_hf = true)
{
    Analysis a;
    a.measure = t.measure;
    a.conditions = t.condition_names;
    a.path = path;
    a.excluded = t.excluded;
    for (std::size_t j = 0; j < t.k(); ++j) {
        const auto c = t.column(j);
        a.group_summaries.push_back({t.condition_names[j], mean(c), sample_sd(c), c.size()});
    }
    a.result = path == TestPath::parametric ? rm_anova(t, apply_hf) : friedman(t);

    std::vector<double> raw;
    for (std::size_t i = 0; i < t.k(); ++i) {
        for (std::size_t j = i + 1; j < t.k(); ++j) {
            const auto x = t.column(i), y = t.column(j);
            const auto ph = path == TestPath::parametric ? paired_t_test(x, y) : wilcoxon_signed_rank(x, y);
            a.result.posthoc.push_back({t.condition_names[i], t.condition_names[j], ph.statistic, ph.p, 1.0, false});
            raw.push_back(ph.p);
        }
    }
    const auto holm = holm_correction(raw, alpha);
    for (std::size_t i = 0; i < holm.size(); ++i) {
        a.result.posthoc[i].p_holm = holm[i].adjusted_p;
        a.result.posthoc[i].rejected = holm[i].rejected;
    }
    return a;
}

inline Analysis analyze(const std::vector<FeatureRow>& rows, std::string_view measure, const std::vector<Label>& conditions,
                        TestPath path, double alpha = 0.05, bool apply_hf = true, double eda_rate_hz = 8.0)
{
    return analyze(aggregate_by_condition(rows, measure, conditions, eda_rate_hz), path, alpha, apply_hf);
}

/// JSON number, or null for non-finite values.
inline nlohmann::json json_number(double v)
{
    if (!std::isfinite(v)) return nullptr;
    return v;
}

inline nlohmann::json to_json(const Analysis& a)
{
    nlohmann::json posthoc = nlohmann::json::array();
    for (const auto& p : a.result.posthoc) {
        posthoc.push_back({{"pair", {p.first, p.second}},
                           {"statistic", json_number(p.statistic)},
                           {"p_raw", p.p_raw},
                           {"p_holm", p.p_holm},
                           {"rejected", p.rejected}});
    }
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : a.group_summaries) {
        groups.push_back({{"condition", g.condition}, {"mean", g.mean}, {"sd", g.sd}, {"n", g.n}});
    }
    nlohmann::json j = {{"measure", a.measure},
                        {"conditions", a.conditions},
                        {"path", to_string(a.path)},
                        {"test", a.result.test},
                        {"statistic", json_number(a.result.statistic)},
                        {"df", a.result.df},
                        {"p", a.result.p},
                        {"posthoc", posthoc},
                        {"group_summaries", groups},
                        {"excluded", a.excluded}};
    if (a.result.epsilon_hf) j["epsilon_hf"] = *a.result.epsilon_hf;
    if (a.result.degenerate) j["degenerate"] = true;
    return j;
}

} // namespace flowphys::stats

#endif // FLOWPHYS_STATS_HPP_
