#ifndef FLOWPHYS_CLASSIFIERS_HPP_
#define FLOWPHYS_CLASSIFIERS_HPP_

#include "flowphys/common.hpp"
#include "flowphys/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace flowphys::ml {

/// Row-major sample matrix; rows are samples.
using Matrix = std::vector<std::vector<double>>;

inline std::size_t count_classes(std::span<const int> y)
{
    int hi = -1;
    for (int c : y) hi = std::max(hi, c);
    return static_cast<std::size_t>(hi + 1);
}

inline std::size_t argmax(std::span<const double> v)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

//-----------------------------------------------------------------------------
// linear SVM

struct SvmParams {
    double C = 1.0;
    double tol = 1e-3;
    std::size_t max_iter = 10000;
};

struct LinearBinarySvm {
    std::vector<double> w;
    double b = 0.0;
    bool converged = false;
    std::size_t epochs = 0;

    double decision(std::span<const double> x) const
    {
        double s = b;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
        return s;
    }
};

/// Soft-margin linear SVM, hinge loss with the loss averaged over samples:
///   min 1/2 |w|^2 + (C/n) sum_i max(0, 1 - y_i (w.x_i + b)),
/// with the bias handled as a weight on a constant feature. Solved by dual
/// coordinate descent (box [0, C/n] per sample, shuffled sweep order) until the
/// projected-gradient spread is within `tol` or `max_iter` sweeps. `y` holds
/// +1/-1.
inline LinearBinarySvm train_linear_svm_binary(const Matrix& x, std::span<const int> y, const SvmParams& p,
                                               std::uint64_t seed)
{
    const std::size_t n = x.size();
    LinearBinarySvm m;
    if (n == 0) return m;
    const std::size_t d = x[0].size();
    m.w.assign(d, 0.0);
    const double upper = p.C / static_cast<double>(n);
    std::vector<double> alpha(n, 0.0), qii(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (double v : x[i]) qii[i] += v * v;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);

    for (m.epochs = 0; m.epochs < p.max_iter; ++m.epochs) {
        rng.shuffle(order);
        double pg_max = -std::numeric_limits<double>::infinity();
        double pg_min = std::numeric_limits<double>::infinity();
        for (std::size_t i : order) {
            const double yi = static_cast<double>(y[i]);
            const double g = yi * m.decision(x[i]) - 1.0;
            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] >= upper) pg = std::max(g, 0.0);
            pg_max = std::max(pg_max, pg);
            pg_min = std::min(pg_min, pg);
            if (std::abs(pg) > 1e-12) {
                const double old = alpha[i];
                alpha[i] = std::clamp(old - g / qii[i], 0.0, upper);
                const double delta = (alpha[i] - old) * yi;
                if (delta != 0.0) {
                    for (std::size_t j = 0; j < d; ++j) m.w[j] += delta * x[i][j];
                    m.b += delta;
                }
            }
        }
        if (pg_max - pg_min <= p.tol) {
            m.converged = true;
            ++m.epochs;
            break;
        }
    }
    return m;
}

/// One binary machine for two classes (scores the class-1 side), one per
/// class otherwise (one-vs-rest).
struct LinearSvm {
    std::vector<LinearBinarySvm> machines;
    std::size_t n_classes = 0;

    bool converged() const
    {
        return std::all_of(machines.begin(), machines.end(), [](const auto& m) { return m.converged; });
    }

    std::vector<double> class_scores(std::span<const double> x) const
    {
        if (n_classes == 2) {
            const double s = machines[0].decision(x);
            return {-s, s};
        }
        std::vector<double> s;
        for (const auto& m : machines) s.push_back(m.decision(x));
        return s;
    }
};

inline LinearSvm train_linear_svm(const Matrix& x, std::span<const int> y, const SvmParams& p, std::uint64_t seed)
{
    LinearSvm model;
    model.n_classes = std::max<std::size_t>(2, count_classes(y));
    const std::size_t n_machines = model.n_classes == 2 ? 1 : model.n_classes;
    for (std::size_t c = 0; c < n_machines; ++c) {
        const int positive = model.n_classes == 2 ? 1 : static_cast<int>(c);
        std::vector<int> yy(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) yy[i] = y[i] == positive ? 1 : -1;
        model.machines.push_back(train_linear_svm_binary(x, yy, p, derive_seed(seed, c)));
    }
    return model;
}

//-----------------------------------------------------------------------------
// decision tree

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    std::vector<double> class_fraction;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    std::size_t n_classes = 0;

    const std::vector<double>& leaf(std::span<const double> x) const
    {
        std::size_t i = 0;
        while (nodes[i].feature >= 0) {
            const auto& nd = nodes[i];
            i = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[i].class_fraction;
    }

    std::size_t depth() const
    {
        std::vector<std::size_t> dep(nodes.size(), 0);
        std::size_t best = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].feature >= 0) {
                dep[nodes[i].left] = dep[nodes[i].right] = dep[i] + 1;
            }
            best = std::max(best, dep[i]);
        }
        return best;
    }
};

struct TreeParams {
    /// Candidate features per split; 0 means all.
    std::size_t max_features = 0;
};

namespace detail {

inline double gini(const std::vector<double>& counts, double total)
{
    if (total <= 0.0) return 0.0;
    double s = 1.0;
    for (double c : counts) s -= (c / total) * (c / total);
    return s;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
};

inline SplitChoice best_split_on(const Matrix& x, std::span<const int> y, const std::vector<std::size_t>& idx,
                                 std::size_t feature, std::size_t n_classes)
{
    SplitChoice best;
    std::vector<std::size_t> order = idx;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a][feature] < x[b][feature]; });
    std::vector<double> left(n_classes, 0.0), right(n_classes, 0.0);
    for (std::size_t i : order) right[static_cast<std::size_t>(y[i])] += 1.0;
    const double total = static_cast<double>(order.size());
    for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        const auto c = static_cast<std::size_t>(y[order[pos]]);
        left[c] += 1.0;
        right[c] -= 1.0;
        const double a = x[order[pos]][feature];
        const double b = x[order[pos + 1]][feature];
        if (!(a < b)) continue;
        const double nl = static_cast<double>(pos + 1);
        const double nr = total - nl;
        const double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        if (imp < best.impurity) {
            best.impurity = imp;
            best.feature = static_cast<int>(feature);
            best.threshold = a + 0.5 * (b - a);
        }
    }
    return best;
}

} // namespace detail

/// Greedy CART on Gini impurity with midpoint thresholds, grown until nodes
/// are pure, hold fewer than two samples, or cannot be split. With
/// `max_features` set, each node draws that many candidate features and
/// falls back to the remaining ones only when none of them can split.
inline DecisionTree train_decision_tree(const Matrix& x, std::span<const int> y, const TreeParams& params,
                                        std::uint64_t seed, std::size_t n_classes = 0)
{
    DecisionTree tree;
    tree.n_classes = n_classes ? n_classes : std::max<std::size_t>(2, count_classes(y));
    const std::size_t d = x.empty() ? 0 : x[0].size();
    Rng rng(seed);

    struct Pending {
        std::size_t node;
        std::vector<std::size_t> idx;
    };
    std::vector<std::size_t> all(x.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    tree.nodes.emplace_back();
    std::vector<Pending> stack;
    stack.push_back({0, std::move(all)});

    while (!stack.empty()) {
        Pending cur = std::move(stack.back());
        stack.pop_back();
        std::vector<double> counts(tree.n_classes, 0.0);
        for (std::size_t i : cur.idx) counts[static_cast<std::size_t>(y[i])] += 1.0;
        const double total = static_cast<double>(cur.idx.size());
        auto& fraction = tree.nodes[cur.node].class_fraction;
        fraction.assign(tree.n_classes, 0.0);
        for (std::size_t c = 0; c < tree.n_classes; ++c) fraction[c] = total > 0 ? counts[c] / total : 0.0;

        const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;
        if (pure || cur.idx.size() < 2) continue;

        std::vector<std::size_t> features(d);
        std::iota(features.begin(), features.end(), std::size_t{0});
        std::size_t first_batch = d;
        if (params.max_features > 0 && params.max_features < d) {
            rng.shuffle(features);
            first_batch = params.max_features;
        }
        detail::SplitChoice best;
        for (std::size_t k = 0; k < features.size(); ++k) {
            if (k == first_batch && best.feature >= 0) break;
            const auto s = detail::best_split_on(x, y, cur.idx, features[k], tree.n_classes);
            if (s.feature >= 0 && (s.impurity < best.impurity ||
                                   (s.impurity == best.impurity && s.feature < best.feature))) {
                best = s;
            }
        }
        if (best.feature < 0) continue;

        std::vector<std::size_t> li, ri;
        for (std::size_t i : cur.idx) {
            (x[i][static_cast<std::size_t>(best.feature)] <= best.threshold ? li : ri).push_back(i);
        }
        const std::size_t l = tree.nodes.size();
        tree.nodes.emplace_back();
        const std::size_t r = tree.nodes.size();
        tree.nodes.emplace_back();
        tree.nodes[cur.node].feature = best.feature;
        tree.nodes[cur.node].threshold = best.threshold;
        tree.nodes[cur.node].left = l;
        tree.nodes[cur.node].right = r;
        stack.push_back({r, std::move(ri)});
        stack.push_back({l, std::move(li)});
    }
    return tree;
}

//-----------------------------------------------------------------------------
// random forest

struct RandomForest {
    std::vector<DecisionTree> trees;
    std::size_t n_classes = 0;

    /// Fraction of trees voting for each class.
    std::vector<double> votes(std::span<const double> x) const
    {
        std::vector<double> v(n_classes, 0.0);
        for (const auto& t : trees) v[argmax(t.leaf(x))] += 1.0;
        for (double& c : v) c /= static_cast<double>(trees.size());
        return v;
    }
};

/// Bagged trees on seeded bootstrap samples with ceil(sqrt(d)) candidate
/// features per split.
inline RandomForest train_random_forest(const Matrix& x, std::span<const int> y, std::size_t n_trees,
                                        std::uint64_t seed)
{
    RandomForest f;
    f.n_classes = std::max<std::size_t>(2, count_classes(y));
    const std::size_t n = x.size();
    const std::size_t d = x.empty() ? 0 : x[0].size();
    TreeParams params;
    params.max_features = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
    for (std::size_t t = 0; t < n_trees; ++t) {
        Rng rng(derive_seed(seed, 2 * t));
        Matrix bx;
        std::vector<int> by;
        bx.reserve(n);
        by.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t pick = rng.below(n);
            bx.push_back(x[pick]);
            by.push_back(y[pick]);
        }
        f.trees.push_back(train_decision_tree(bx, by, params, derive_seed(seed, 2 * t + 1), f.n_classes));
    }
    return f;
}

} // namespace flowphys::ml

#endif // FLOWPHYS_CLASSIFIERS_HPP_
