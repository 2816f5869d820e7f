#include "flowphys/model.hpp"
#include "flowphys/synth.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace flowphys;

namespace {

std::vector<FeatureRow> rows_with(std::initializer_list<std::pair<Label, std::size_t>> counts, const std::string& pid = "p")
{
    std::vector<FeatureRow> rows;
    for (const auto& [l, n] : counts) {
        for (std::size_t i = 0; i < n; ++i) {
            FeatureRow r;
            r.participant_id = pid;
            r.label = l;
            rows.push_back(r);
        }
    }
    return rows;
}

std::vector<Sample> samples_with(std::vector<std::size_t> per_class)
{
    std::vector<Sample> out;
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        for (std::size_t i = 0; i < per_class[c]; ++i) {
            Sample s;
            s.participant_id = "p" + std::to_string(i % 3);
            s.cls = static_cast<int>(c);
            s.values[0] = static_cast<double>(out.size());
            out.push_back(s);
        }
    }
    return out;
}

double accuracy(const ml::LinearSvm& m, const ml::Matrix& x, const std::vector<int>& y)
{
    double ok = 0;
    for (std::size_t i = 0; i < x.size(); ++i) ok += static_cast<int>(ml::argmax(m.class_scores(x[i]))) == y[i];
    return ok / static_cast<double>(x.size());
}

} // namespace

TEST(Relabel, NonflowVsFlowCounts)
{
    const auto ds = relabel(rows_with({{Label::balanced_flow, 100}, {Label::automatic_flow, 100}, {Label::not_flow, 100},
                                       {Label::rest, 40}}),
                            Task::nonflow_vs_flow);
    EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>{100, 200}));
    EXPECT_EQ(ds.class_names[1], "flow");
}

TEST(Relabel, TaskMappings)
{
    const auto rows = rows_with({{Label::balanced_flow, 3}, {Label::automatic_flow, 5}, {Label::not_flow, 7}, {Label::rest, 11}});
    EXPECT_EQ(relabel(rows, Task::three_way).class_counts(), (std::vector<std::size_t>{7, 5, 3}));
    EXPECT_EQ(relabel(rows, Task::balanced_vs_other_work).class_counts(), (std::vector<std::size_t>{12, 3}));
    EXPECT_EQ(relabel(rows, Task::rest_vs_work).class_counts(), (std::vector<std::size_t>{15, 11}));
}

TEST(Relabel, InitialRestDropped)
{
    auto rows = rows_with({{Label::not_flow, 4}, {Label::rest, 6}});
    for (std::size_t i = 4; i < 7; ++i) rows[i].initial_rest = true;
    EXPECT_EQ(relabel(rows, Task::rest_vs_work).class_counts(), (std::vector<std::size_t>{4, 3}));
}

TEST(Relabel, EmptyClassIsError)
{
    EXPECT_THROW(relabel(rows_with({{Label::not_flow, 4}}), Task::nonflow_vs_flow), DatasetError);
}

TEST(Selection, CountAndOrdering)
{
    EXPECT_EQ(selection_count(29, 0.2), 6u);
    EXPECT_EQ(selection_count(10, 0.2), 2u);
    EXPECT_EQ(selection_count(3, 0.2), 1u);

    // feature 4 equals the label (infinite F), feature 0 constant (F = 0),
    // features 1..3 noisy with decreasing signal
    Rng rng(4);
    ml::Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 60; ++i) {
        const int c = i % 2;
        y.push_back(c);
        x.push_back({7.0, c + 0.3 * rng.normal(), c + 1.0 * rng.normal(), c + 3.0 * rng.normal(), double(c), 0.0});
    }
    const auto sel = anova_f_select(x, y, 0.5);
    ASSERT_EQ(sel.size(), 3u);
    EXPECT_EQ(sel[0], 4u);
    EXPECT_EQ(sel[1], 1u);
    EXPECT_EQ(anova_f(x, y, 0, 2), 0.0);
    EXPECT_TRUE(std::isinf(anova_f(x, y, 4, 2)));
    // two F = 0 columns keep canonical order at the bottom
    const auto all = anova_f_select(x, y, 1.0);
    EXPECT_EQ(all[4], 0u);
    EXPECT_EQ(all[5], 5u);
}

TEST(Undersample, MinorityCount)
{
    auto out = undersample(samples_with({200, 100}), 1);
    std::map<int, int> c;
    for (const auto& s : out) ++c[s.cls];
    EXPECT_EQ(c[0], 100);
    EXPECT_EQ(c[1], 100);

    out = undersample(samples_with({50, 80, 120}), 2);
    c.clear();
    for (const auto& s : out) ++c[s.cls];
    EXPECT_EQ(c[0], 50);
    EXPECT_EQ(c[1], 50);
    EXPECT_EQ(c[2], 50);
    // original relative order kept
    for (std::size_t i = 1; i < out.size(); ++i) EXPECT_LT(*out[i - 1].values[0], *out[i].values[0]);
}

TEST(Undersample, BalancedUnchangedAndSeeded)
{
    const auto in = samples_with({30, 30});
    const auto out = undersample(in, 9);
    ASSERT_EQ(out.size(), in.size());
    for (std::size_t i = 0; i < in.size(); ++i) EXPECT_EQ(out[i].values, in[i].values);

    const auto a = undersample(samples_with({80, 20}), 5), b = undersample(samples_with({80, 20}), 5),
               c = undersample(samples_with({80, 20}), 6);
    auto ids = [](const std::vector<Sample>& v) {
        std::vector<double> r;
        for (const auto& s : v) r.push_back(*s.values[0]);
        return r;
    };
    EXPECT_EQ(ids(a), ids(b));
    EXPECT_NE(ids(a), ids(c));
}

TEST(LinearSvm, SeparablePoints)
{
    ml::Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 10; ++i) {
        x.push_back({-1.0});
        y.push_back(0);
        x.push_back({1.0});
        y.push_back(1);
    }
    const auto m = ml::train_linear_svm(x, y, {}, 0);
    EXPECT_TRUE(m.converged());
    EXPECT_EQ(accuracy(m, x, y), 1.0);
}

TEST(LinearSvm, PermutedLabelsNearChance)
{
    Rng rng(21);
    ml::Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 200; ++i) {
        x.push_back({rng.normal(), rng.normal(), rng.normal()});
        y.push_back(i % 2);
    }
    rng.shuffle(y);
    EXPECT_NEAR(accuracy(ml::train_linear_svm(x, y, {}, 3), x, y), 0.5, 0.15);
}

TEST(LinearSvm, DuplicatedDatasetSameDecision)
{
    Rng rng(8);
    ml::Matrix x, x2;
    std::vector<int> y, y2;
    for (int i = 0; i < 60; ++i) {
        const int c = i % 2;
        x.push_back({c + rng.normal(), rng.normal()});
        y.push_back(c ? 1 : -1);
    }
    for (int k = 0; k < 2; ++k) {
        x2.insert(x2.end(), x.begin(), x.end());
        y2.insert(y2.end(), y.begin(), y.end());
    }
    ml::SvmParams p;
    p.tol = 1e-6;
    p.max_iter = 100000;
    const auto a = ml::train_linear_svm_binary(x, y, p, 1);
    const auto b = ml::train_linear_svm_binary(x2, y2, p, 1);
    ASSERT_TRUE(a.converged && b.converged);
    for (std::size_t j = 0; j < a.w.size(); ++j) EXPECT_NEAR(a.w[j], b.w[j], 1e-3);
    EXPECT_NEAR(a.b, b.b, 1e-3);
}

TEST(LinearSvm, NonConvergenceFlagged)
{
    Rng rng(1);
    ml::Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 100; ++i) {
        x.push_back({rng.normal(), rng.normal()});
        y.push_back(i % 2 ? 1 : -1);
    }
    ml::SvmParams p;
    p.C = 1000;
    p.tol = 1e-12;
    p.max_iter = 2;
    const auto m = ml::train_linear_svm_binary(x, y, p, 0);
    EXPECT_FALSE(m.converged);
    EXPECT_EQ(m.epochs, 2u);
}

TEST(DecisionTree, PureInputIsLeaf)
{
    const ml::Matrix x = {{1.0}, {2.0}, {3.0}};
    const std::vector<int> y = {1, 1, 1};
    const auto t = ml::train_decision_tree(x, y, {}, 0, 2);
    EXPECT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.leaf(x[0]), (std::vector<double>{0.0, 1.0}));
}

TEST(DecisionTree, Xor)
{
    ml::Matrix x;
    std::vector<int> y;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int rep = 0; rep < 5; ++rep) {
                x.push_back({a + 0.01 * rep, b - 0.01 * rep});
                y.push_back(a ^ b);
            }
    const auto t = ml::train_decision_tree(x, y, {}, 0, 2);
    EXPECT_GE(t.depth(), 2u);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(static_cast<int>(ml::argmax(t.leaf(x[i]))), y[i]);
}

TEST(RandomForest, VoteFractions)
{
    Rng rng(2);
    ml::Matrix x;
    std::vector<int> y;
    for (int i = 0; i < 80; ++i) {
        const int c = i % 2;
        x.push_back({c + rng.normal(), rng.normal(), rng.normal(), rng.normal()});
        y.push_back(c);
    }
    const auto f = ml::train_random_forest(x, y, 10, 4);
    ASSERT_EQ(f.trees.size(), 10u);
    for (int k = 0; k < 50; ++k) {
        const std::vector<double> q = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        for (double v : f.votes(q)) {
            EXPECT_NEAR(v * 10.0, std::round(v * 10.0), 1e-12);
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Metrics, Auc)
{
    EXPECT_EQ(*auc(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 1, 0, 0}), 1.0);
    EXPECT_EQ(*auc(std::vector<double>{0.9, 0.4, 0.5, 0.3}, std::vector<int>{1, 1, 0, 0}), 0.75);
    EXPECT_EQ(*auc(std::vector<double>{0.2, 0.2, 0.2}, std::vector<int>{1, 0, 1}), 0.5);
    EXPECT_FALSE(auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}));

    Rng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> s;
        std::vector<int> y;
        for (int i = 0; i < 40; ++i) {
            s.push_back(std::round(rng.normal() * 3) / 3);
            y.push_back(static_cast<int>(rng.below(2)));
        }
        if (std::count(y.begin(), y.end(), 1) == 0) continue;
        EXPECT_NEAR(*auc(s, y), oracle::auc_pairs(s, y), 1e-12);
    }
}

TEST(Metrics, WeightedF1)
{
    EXPECT_EQ(*weighted_f1(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}), 1.0);
    EXPECT_NEAR(*weighted_f1(std::vector<int>{1, 1, 1, 1}, std::vector<int>{0, 0, 1, 1}), 1.0 / 3.0, 1e-15);
    EXPECT_FALSE(weighted_f1(std::vector<int>{}, std::vector<int>{}));
}

TEST(Lopo, TwoParticipantsTwoFolds)
{
    std::vector<FeatureRow> rows;
    for (const std::string pid : {"a", "b"}) {
        for (auto l : {Label::not_flow, Label::balanced_flow}) {
            FeatureRow r;
            r.participant_id = pid;
            r.label = l;
            for (std::size_t f = 0; f < kNumFeatures; ++f) r.values[f] = (l == Label::not_flow ? -1.0 : 1.0) + 0.01 * f;
            rows.push_back(r);
        }
    }
    ModelConfig cfg;
    cfg.reps = 1;
    std::set<std::string> held;
    const auto rep = lopo_evaluate(relabel(rows, Task::nonflow_vs_flow), cfg, 1, [&](const FoldTrace& t) {
        held.insert(t.held_out);
        for (const auto& s : *t.balanced_train) EXPECT_NE(s.participant_id, t.held_out);
    });
    EXPECT_EQ(held, (std::set<std::string>{"a", "b"}));
    EXPECT_EQ(rep.per_participant.size(), 2u);
    EXPECT_EQ(*rep.mean, 1.0);
}

TEST(Lopo, SingleClassHeldOutIsAbsent)
{
    std::vector<FeatureRow> rows;
    for (const std::string pid : {"a", "b", "c"}) {
        for (auto l : {Label::not_flow, Label::balanced_flow}) {
            if (pid == "c" && l == Label::not_flow) continue;
            FeatureRow r;
            r.participant_id = pid;
            r.label = l;
            for (std::size_t f = 0; f < kNumFeatures; ++f) r.values[f] = l == Label::not_flow ? 0.0 : 1.0;
            rows.push_back(r);
        }
    }
    ModelConfig cfg;
    cfg.reps = 2;
    const auto rep = lopo_evaluate(relabel(rows, Task::nonflow_vs_flow), cfg);
    EXPECT_FALSE(rep.per_participant[2].value);
    EXPECT_TRUE(rep.mean);
}

TEST(Lopo, SeparatedCohortAndDeterminism)
{
    const auto cohort = synth::synth_cohort({});
    const auto rows = zscore_per_participant(cohort.rows);
    ModelConfig cfg;
    cfg.reps = 3;
    const auto ds = relabel(rows, Task::rest_vs_work);
    const auto a = to_json(lopo_evaluate(ds, cfg, 1)).dump();
    const auto b = to_json(lopo_evaluate(ds, cfg, 4)).dump();
    EXPECT_EQ(a, b);
    EXPECT_GE(nlohmann::json::parse(a)["mean"].get<double>(), 0.95);

    for (auto kind : {ClassifierKind::decision_tree, ClassifierKind::random_forest}) {
        cfg.classifier = kind;
        const auto r = lopo_evaluate(ds, cfg, 2);
        EXPECT_GE(*r.mean, 0.8) << to_string(kind);
    }
}

TEST(Lopo, ThreeWayReportsWeightedF1)
{
    const auto rows = zscore_per_participant(synth::synth_cohort({}).rows);
    ModelConfig cfg;
    cfg.reps = 2;
    const auto r = lopo_evaluate(relabel(rows, Task::three_way), cfg, 2);
    EXPECT_EQ(r.metric, Metric::weighted_f1);
    EXPECT_GT(*r.mean, 0.6);
    for (const auto& f : r.selected_features_per_fold) EXPECT_EQ(f.features.size(), 6u);
}

TEST(ParallelFor, PropagatesExceptions)
{
    std::vector<int> hit(100, 0);
    parallel_for(100, 8, [&](std::size_t i) { hit[i] = 1; });
    EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 7) throw DatasetError("boom");
                 }),
                 DatasetError);
}

TEST(ModelConfig, Validation)
{
    ModelConfig c;
    EXPECT_NO_THROW(c.validate());
    c.reps = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(parse_classifier("svm"), ConfigError);
    EXPECT_EQ(parse_task("rest_vs_work"), Task::rest_vs_work);
}
