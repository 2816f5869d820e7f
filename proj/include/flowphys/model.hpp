#ifndef FLOWPHYS_MODEL_HPP_
#define FLOWPHYS_MODEL_HPP_

#include "flowphys/classifiers.hpp"
#include "flowphys/common.hpp"
#include "flowphys/features.hpp"
#include "flowphys/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace flowphys {

//-----------------------------------------------------------------------------
// tasks and datasets

enum class Task { three_way, nonflow_vs_flow, balanced_vs_other_work, rest_vs_work };

inline constexpr std::array<Task, 4> kAllTasks = {Task::three_way, Task::nonflow_vs_flow,
                                                  Task::balanced_vs_other_work, Task::rest_vs_work};

inline std::string_view to_string(Task t)
{
    switch (t) {
    case Task::three_way: return "three_way";
    case Task::nonflow_vs_flow: return "nonflow_vs_flow";
    case Task::balanced_vs_other_work: return "balanced_vs_other_work";
    case Task::rest_vs_work: return "rest_vs_work";
    }
    return "?";
}

inline Task parse_task(std::string_view s)
{
    for (auto t : kAllTasks) {
        if (to_string(t) == s) return t;
    }
    throw ConfigError("unknown task '" + std::string(s) + "'");
}

inline bool is_binary(Task t) { return t != Task::three_way; }

struct Sample {
    std::string participant_id;
    int cls = 0;
    FeatureValues values{};
};

struct Dataset {
    Task task = Task::three_way;
    std::vector<std::string> class_names;
    std::vector<Sample> rows;

    std::set<std::string> participants() const
    {
        std::set<std::string> p;
        for (const auto& r : rows) p.insert(r.participant_id);
        return p;
    }

    std::vector<std::size_t> class_counts() const
    {
        std::vector<std::size_t> c(class_names.size(), 0);
        for (const auto& r : rows) ++c[static_cast<std::size_t>(r.cls)];
        return c;
    }
};

inline std::vector<std::string> class_names(Task t)
{
    switch (t) {
    case Task::three_way: return {"not_flow", "automatic_flow", "balanced_flow"};
    case Task::nonflow_vs_flow: return {"not_flow", "flow"};
    case Task::balanced_vs_other_work: return {"other_work", "balanced_flow"};
    case Task::rest_vs_work: return {"work", "rest"};
    }
    return {};
}

/// Maps base labels onto the task's classes. Binary tasks put the class of
/// interest (flow, balanced flow, rest) at index 1. Rest rows are dropped for
/// the work-only tasks; the initial rest is always dropped.
inline Dataset relabel(const std::vector<FeatureRow>& rows, Task task)
{
    Dataset ds;
    ds.task = task;
    ds.class_names = class_names(task);
    for (const auto& r : rows) {
        if (r.initial_rest) continue;
        int cls = -1;
        switch (task) {
        case Task::three_way:
            if (r.label == Label::not_flow) cls = 0;
            else if (r.label == Label::automatic_flow) cls = 1;
            else if (r.label == Label::balanced_flow) cls = 2;
            break;
        case Task::nonflow_vs_flow:
            if (r.label == Label::not_flow) cls = 0;
            else if (is_work(r.label)) cls = 1;
            break;
        case Task::balanced_vs_other_work:
            if (r.label == Label::balanced_flow) cls = 1;
            else if (is_work(r.label)) cls = 0;
            break;
        case Task::rest_vs_work: cls = r.label == Label::rest ? 1 : 0; break;
        }
        if (cls < 0) continue;
        ds.rows.push_back({r.participant_id, cls, r.values});
    }
    const auto counts = ds.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) throw DatasetError("class '" + ds.class_names[c] + "' is empty for task " + std::string(to_string(task)));
    }
    return ds;
}

//-----------------------------------------------------------------------------
// fold-local preprocessing

/// Per-feature training means (of present values; 0 when none are present).
inline std::vector<double> imputation_means(const std::vector<Sample>& rows)
{
    std::vector<double> sum(kNumFeatures, 0.0), cnt(kNumFeatures, 0.0);
    for (const auto& r : rows) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) {
            if (r.values[f]) {
                sum[f] += *r.values[f];
                cnt[f] += 1.0;
            }
        }
    }
    for (std::size_t f = 0; f < kNumFeatures; ++f) sum[f] = cnt[f] > 0 ? sum[f] / cnt[f] : 0.0;
    return sum;
}

inline ml::Matrix impute(const std::vector<Sample>& rows, const std::vector<double>& means)
{
    ml::Matrix x(rows.size(), std::vector<double>(kNumFeatures));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t f = 0; f < kNumFeatures; ++f) x[i][f] = rows[i].values[f].value_or(means[f]);
    }
    return x;
}

struct Standardizer {
    std::vector<double> mean, scale;

    static Standardizer fit(const ml::Matrix& x)
    {
        Standardizer s;
        const std::size_t d = x.empty() ? 0 : x[0].size();
        s.mean.assign(d, 0.0);
        s.scale.assign(d, 1.0);
        for (std::size_t f = 0; f < d; ++f) {
            std::vector<double> col;
            col.reserve(x.size());
            for (const auto& r : x) col.push_back(r[f]);
            s.mean[f] = flowphys::mean(col);
            const double sd = sample_sd(col);
            s.scale[f] = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    std::vector<double> apply(std::span<const double> row, const std::vector<std::size_t>& cols) const
    {
        std::vector<double> out;
        out.reserve(cols.size());
        for (std::size_t c : cols) out.push_back((row[c] - mean[c]) / scale[c]);
        return out;
    }
};

//-----------------------------------------------------------------------------
// feature selection

/// One-way ANOVA F of one feature across classes. Zero within-class spread
/// with nonzero between-class spread is +inf; no between-class spread is 0.
inline double anova_f(const ml::Matrix& x, std::span<const int> y, std::size_t feature, std::size_t n_classes)
{
    std::vector<double> sum(n_classes, 0.0), cnt(n_classes, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum[static_cast<std::size_t>(y[i])] += x[i][feature];
        cnt[static_cast<std::size_t>(y[i])] += 1.0;
        total += x[i][feature];
    }
    const double n = static_cast<double>(x.size());
    const double grand = total / n;
    double between = 0.0, within = 0.0;
    std::size_t groups = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        if (cnt[c] == 0) continue;
        ++groups;
        const double m = sum[c] / cnt[c];
        between += cnt[c] * (m - grand) * (m - grand);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto c = static_cast<std::size_t>(y[i]);
        const double dev = x[i][feature] - sum[c] / cnt[c];
        within += dev * dev;
    }
    if (groups < 2 || !(between > 0.0)) return 0.0;
    if (!(within > 0.0)) return std::numeric_limits<double>::infinity();
    const double df_b = static_cast<double>(groups - 1);
    const double df_w = n - static_cast<double>(groups);
    if (df_w <= 0.0) return std::numeric_limits<double>::infinity();
    return (between / df_b) / (within / df_w);
}

inline std::size_t selection_count(std::size_t d, double fraction)
{
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(d) - 1e-9));
    return std::clamp<std::size_t>(k, 1, d);
}

/// Indices of the ceil(fraction * d) highest-F features, ties broken by
/// canonical order; returned in rank order.
inline std::vector<std::size_t> anova_f_select(const ml::Matrix& x, std::span<const int> y, double fraction = 0.20)
{
    const std::size_t d = x.empty() ? 0 : x[0].size();
    const std::size_t n_classes = ml::count_classes(y);
    if (n_classes < 2) throw DatasetError("feature selection needs at least two classes");
    std::vector<double> f(d);
    for (std::size_t j = 0; j < d; ++j) f[j] = anova_f(x, y, j, n_classes);
    std::vector<std::size_t> order(d);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] > f[b]; });
    order.resize(selection_count(d, fraction));
    return order;
}

//-----------------------------------------------------------------------------
// class balancing

/// Randomly reduces every class to the minority count (without replacement).
/// Surviving rows keep their original relative order.
inline std::vector<Sample> undersample(const std::vector<Sample>& rows, std::uint64_t seed)
{
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < rows.size(); ++i) by_class[rows[i].cls].push_back(i);
    if (by_class.size() < 2) throw DatasetError("undersampling needs at least two classes");
    std::size_t minority = std::numeric_limits<std::size_t>::max();
    for (const auto& [c, idx] : by_class) minority = std::min(minority, idx.size());
    Rng rng(seed);
    std::vector<std::size_t> keep;
    for (auto& [c, idx] : by_class) {
        rng.shuffle(idx);
        keep.insert(keep.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(minority));
    }
    std::sort(keep.begin(), keep.end());
    std::vector<Sample> out;
    out.reserve(keep.size());
    for (std::size_t i : keep) out.push_back(rows[i]);
    return out;
}

//-----------------------------------------------------------------------------
// trained models

enum class ClassifierKind { linear_svm, decision_tree, random_forest };

inline std::string_view to_string(ClassifierKind k)
{
    switch (k) {
    case ClassifierKind::linear_svm: return "linear_svm";
    case ClassifierKind::decision_tree: return "decision_tree";
    case ClassifierKind::random_forest: return "random_forest";
    }
    return "?";
}

inline ClassifierKind parse_classifier(std::string_view s)
{
    if (s == "linear_svm") return ClassifierKind::linear_svm;
    if (s == "decision_tree") return ClassifierKind::decision_tree;
    if (s == "random_forest") return ClassifierKind::random_forest;
    throw ConfigError("unknown classifier '" + std::string(s) + "'");
}

struct ModelConfig {
    ClassifierKind classifier = ClassifierKind::linear_svm;
    ml::SvmParams svm;
    std::size_t n_trees = 10;
    std::size_t reps = 10;
    std::uint64_t seed = 0;
    double select_fraction = 0.20;

    void validate() const
    {
        if (!(svm.C > 0.0)) throw ConfigError("model.C must be positive");
        if (!(svm.tol > 0.0)) throw ConfigError("model.tol must be positive");
        if (svm.max_iter == 0) throw ConfigError("model.max_iter must be positive");
        if (reps == 0) throw ConfigError("model.reps must be positive");
        if (n_trees == 0) throw ConfigError("model.n_trees must be positive");
        if (!(select_fraction > 0.0 && select_fraction <= 1.0)) throw ConfigError("model.select_fraction must lie in (0, 1]");
    }
};

/// Preprocessing fitted on one training set plus the fitted classifier.
struct TrainedModel {
    ClassifierKind kind = ClassifierKind::linear_svm;
    std::size_t n_classes = 2;
    std::vector<std::size_t> selected;
    std::vector<double> imputation;
    Standardizer standardizer;
    std::variant<ml::LinearSvm, ml::DecisionTree, ml::RandomForest> classifier;
    std::uint64_t seed = 0;

    std::vector<double> features_of(const Sample& s) const
    {
        std::vector<double> full(kNumFeatures);
        for (std::size_t f = 0; f < kNumFeatures; ++f) full[f] = s.values[f].value_or(imputation[f]);
        return standardizer.apply(full, selected);
    }

    /// Per-class scores; larger means more likely.
    std::vector<double> class_scores(const Sample& s) const
    {
        const auto x = features_of(s);
        return std::visit(
            [&](const auto& m) -> std::vector<double> {
                using M = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<M, ml::LinearSvm>) return m.class_scores(x);
                else if constexpr (std::is_same_v<M, ml::DecisionTree>) return m.leaf(x);
                else return m.votes(x);
            },
            classifier);
    }

    /// Decision score for class 1 of a binary task.
    double score(const Sample& s) const { return class_scores(s)[1]; }

    int predict(const Sample& s) const { return static_cast<int>(ml::argmax(class_scores(s))); }
};

/// Imputes and standardises with statistics of `train`, selects features by
/// ANOVA F, and fits the configured classifier.
inline TrainedModel train_model(const std::vector<Sample>& train, std::size_t n_classes, const ModelConfig& cfg,
                                std::uint64_t seed)
{
    TrainedModel m;
    m.kind = cfg.classifier;
    m.n_classes = n_classes;
    m.seed = seed;
    m.imputation = imputation_means(train);
    const auto full = impute(train, m.imputation);
    m.standardizer = Standardizer::fit(full);
    std::vector<int> y;
    y.reserve(train.size());
    for (const auto& s : train) y.push_back(s.cls);
    m.selected = anova_f_select(full, y, cfg.select_fraction);
    ml::Matrix x;
    x.reserve(full.size());
    for (const auto& r : full) x.push_back(m.standardizer.apply(r, m.selected));

    switch (cfg.classifier) {
    case ClassifierKind::linear_svm: {
        auto svm = ml::train_linear_svm(x, y, cfg.svm, seed);
        svm.n_classes = n_classes;
        m.classifier = std::move(svm);
        break;
    }
    case ClassifierKind::decision_tree: m.classifier = ml::train_decision_tree(x, y, {}, seed, n_classes); break;
    case ClassifierKind::random_forest: {
        auto forest = ml::train_random_forest(x, y, cfg.n_trees, seed);
        forest.n_classes = n_classes;
        m.classifier = std::move(forest);
        break;
    }
    }
    return m;
}

//-----------------------------------------------------------------------------
// metrics

/// Rank-based AUC with midranks for tied scores; absent unless both classes
/// occur. `labels` holds 1 for positives.
inline MaybeDouble auc(std::span<const double> scores, std::span<const int> labels)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_pos = 0.0;
    double n_pos = 0.0, n_neg = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m) {
            if (labels[order[m]] == 1) {
                rank_pos += r;
                n_pos += 1.0;
            } else {
                n_neg += 1.0;
            }
        }
        i = j + 1;
    }
    if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
    return (rank_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

/// Support-weighted mean of per-class F1 over the classes present in `labels`.
inline MaybeDouble weighted_f1(std::span<const int> predictions, std::span<const int> labels)
{
    if (labels.empty()) return std::nullopt;
    std::map<int, double> tp, fp, fn, support;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        support[labels[i]] += 1.0;
        if (predictions[i] == labels[i]) {
            tp[labels[i]] += 1.0;
        } else {
            fp[predictions[i]] += 1.0;
            fn[labels[i]] += 1.0;
        }
    }
    double total = 0.0;
    for (const auto& [c, n] : support) {
        const double precision_den = tp[c] + fp[c];
        const double recall_den = tp[c] + fn[c];
        const double precision = precision_den > 0 ? tp[c] / precision_den : 0.0;
        const double recall = recall_den > 0 ? tp[c] / recall_den : 0.0;
        const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        total += f1 * n;
    }
    return total / static_cast<double>(labels.size());
}

//-----------------------------------------------------------------------------
// leave-one-participant-out evaluation

enum class Metric { auc, weighted_f1 };

inline std::string_view to_string(Metric m) { return m == Metric::auc ? "AUC" : "weighted_F1"; }

struct FoldSelection {
    std::string held_out;
    std::size_t rep = 0;
    std::vector<std::size_t> features;
};

struct ParticipantScore {
    std::string id;
    MaybeDouble value;
};

struct EvalReport {
    Task task = Task::three_way;
    ClassifierKind classifier = ClassifierKind::linear_svm;
    Metric metric = Metric::auc;
    std::vector<ParticipantScore> per_participant;
    MaybeDouble mean, sd;
    std::size_t reps = 0;
    std::uint64_t seed = 0;
    std::vector<FoldSelection> selected_features_per_fold;
    bool all_converged = true;
};

/// What a fold saw; handed to an optional observer for leakage auditing.
struct FoldTrace {
    std::string held_out;
    std::size_t rep = 0;
    const std::vector<Sample>* balanced_train = nullptr;
    const TrainedModel* model = nullptr;
};

using FoldObserver = std::function<void(const FoldTrace&)>;

/// Runs `body(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body)
{
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Leave-one-participant-out evaluation. For each held-out participant and
/// repetition r, the other participants' rows are undersampled with seed+r,
/// a model is fitted on that balanced set alone, and the held-out rows are
/// scored. Binary tasks report AUC of class-1 scores, the three-way task
/// weighted F1 of argmax predictions; repetitions are averaged per
/// participant before the across-participant mean and sample sd.
inline EvalReport lopo_evaluate(const Dataset& ds, const ModelConfig& cfg, std::size_t jobs = 1,
                                const FoldObserver& observer = {})
{
    const auto participants_set = ds.participants();
    const std::vector<std::string> participants(participants_set.begin(), participants_set.end());
    if (participants.size() < 2) throw DatasetError("LOPO evaluation needs at least two participants");

    EvalReport rep;
    rep.task = ds.task;
    rep.classifier = cfg.classifier;
    rep.metric = is_binary(ds.task) ? Metric::auc : Metric::weighted_f1;
    rep.reps = cfg.reps;
    rep.seed = cfg.seed;
    rep.per_participant.resize(participants.size());
    rep.selected_features_per_fold.resize(participants.size() * cfg.reps);
    std::vector<char> converged(participants.size(), 1);
    const std::size_t n_classes = ds.class_names.size();
    std::mutex observer_mutex;

    parallel_for(participants.size(), jobs, [&](std::size_t pi) {
        const auto& pid = participants[pi];
        std::vector<Sample> train, test;
        for (const auto& r : ds.rows) (r.participant_id == pid ? test : train).push_back(r);
        std::vector<int> truth;
        for (const auto& s : test) truth.push_back(s.cls);

        std::vector<double> metric_values;
        for (std::size_t r = 0; r < cfg.reps; ++r) {
            const std::uint64_t rep_seed = cfg.seed + r;
            const auto balanced = undersample(train, rep_seed);
            const auto model = train_model(balanced, n_classes, cfg, rep_seed);
            if (const auto* svm = std::get_if<ml::LinearSvm>(&model.classifier); svm && !svm->converged()) {
                converged[pi] = 0;
            }
            if (observer) {
                std::lock_guard lock(observer_mutex);
                observer({pid, r, &balanced, &model});
            }
            rep.selected_features_per_fold[pi * cfg.reps + r] = {pid, r, model.selected};

            MaybeDouble value;
            if (rep.metric == Metric::auc) {
                std::vector<double> scores;
                for (const auto& s : test) scores.push_back(model.score(s));
                value = auc(scores, truth);
            } else {
                std::vector<int> pred;
                for (const auto& s : test) pred.push_back(model.predict(s));
                value = weighted_f1(pred, truth);
            }
            if (value) metric_values.push_back(*value);
        }
        rep.per_participant[pi] = {pid, metric_values.empty() ? MaybeDouble{} : MaybeDouble{mean(metric_values)}};
    });

    std::vector<double> present;
    for (const auto& p : rep.per_participant) {
        if (p.value) present.push_back(*p.value);
    }
    if (!present.empty()) {
        rep.mean = mean(present);
        rep.sd = sample_sd(present);
    }
    rep.all_converged = std::all_of(converged.begin(), converged.end(), [](char c) { return c != 0; });
    return rep;
}

inline nlohmann::json to_json(const EvalReport& r)
{
    auto opt = [](const MaybeDouble& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json per = nlohmann::json::array();
    for (const auto& p : r.per_participant) per.push_back({{"id", p.id}, {"value", opt(p.value)}});
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.selected_features_per_fold) {
        nlohmann::json names = nlohmann::json::array();
        for (auto i : f.features) names.push_back(kFeatureNames[i]);
        folds.push_back({{"held_out", f.held_out}, {"rep", f.rep}, {"features", names}});
    }
    return {{"task", to_string(r.task)},
            {"classifier", to_string(r.classifier)},
            {"metric", to_string(r.metric)},
            {"per_participant", per},
            {"mean", opt(r.mean)},
            {"sd", opt(r.sd)},
            {"reps", r.reps},
            {"seed", r.seed},
            {"converged", r.all_converged},
            {"selected_features_per_fold", folds}};
}

} // namespace flowphys

#endif // FLOWPHYS_MODEL_HPP_
