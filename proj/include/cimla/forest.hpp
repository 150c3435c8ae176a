#pragma once
// Regression random forest: CART trees with MSE splits, bootstrap
// resampling, per-split feature subsampling and optional best-first growth
// capped by a leaf budget. Hyperparameters are selected by k-fold
// cross-validation over a caller-supplied grid.
//
// Determinism contract: identical (data, grid, seed) gives an identical
// forest. Split ties break on the lowest feature index, then the lowest
// threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/matrix.hpp"
#include "cimla/model.hpp"
#include "cimla/rng.hpp"

namespace cimla {

struct ForestHyper {
    int n_trees = 100;
    int max_depth = -1;          // -1: unlimited
    int max_features = -1;       // -1: sqrt(m), otherwise explicit count
    int min_samples_leaf = 1;
    int max_leaves = -1;         // -1: unlimited; >0 switches to best-first growth
    bool bootstrap = true;       // per-tree resampling with replacement

    std::string describe() const {
        auto opt = [](int v) { return v < 0 ? std::string("none") : std::to_string(v); };
        return "trees=" + std::to_string(n_trees) + " depth=" + opt(max_depth) +
               " max_features=" + opt(max_features) + " min_leaf=" + std::to_string(min_samples_leaf) +
               " max_leaves=" + opt(max_leaves);
    }
};

// Flat node record; feature < 0 marks a leaf. `value` is always the mean of
// the node's training subset, `gain` the weighted variance reduction of the
// split (zero at leaves).
struct TreeNode {
    std::int32_t feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
    std::uint32_t n_samples = 0;
    double gain = 0.0;
};

namespace detail {

struct SplitResult {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;           // sumL^2/nL + sumR^2/nR - sum^2/n  (>= 0)
};

// Best MSE split over the candidate features, examined in ascending index
// order so equal gains resolve to the lowest feature / lowest threshold.
inline SplitResult best_split(const Matrix& x, std::span<const double> y,
                              std::span<const std::size_t> idx,
                              std::span<const std::size_t> features,
                              int min_samples_leaf,
                              std::vector<std::pair<double, double>>& scratch) {
    SplitResult best;
    std::size_t n = idx.size();
    double sum = 0.0;
    for (std::size_t i : idx) sum += y[i];
    double base = sum * sum / static_cast<double>(n);
    for (std::size_t f : features) {
        scratch.clear();
        scratch.reserve(n);
        for (std::size_t i : idx) scratch.emplace_back(x(i, f), y[i]);
        std::sort(scratch.begin(), scratch.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double left_sum = 0.0;
        for (std::size_t k = 0; k + 1 < n; ++k) {
            left_sum += scratch[k].second;
            if (scratch[k].first == scratch[k + 1].first) continue;
            std::size_t nl = k + 1, nr = n - nl;
            if (nl < static_cast<std::size_t>(min_samples_leaf) ||
                nr < static_cast<std::size_t>(min_samples_leaf))
                continue;
            double right_sum = sum - left_sum;
            double gain = left_sum * left_sum / static_cast<double>(nl) +
                          right_sum * right_sum / static_cast<double>(nr) - base;
            double thr = 0.5 * (scratch[k].first + scratch[k + 1].first);
            bool better = !best.found || gain > best.gain ||
                          (gain == best.gain &&
                           (static_cast<int>(f) < best.feature ||
                            (static_cast<int>(f) == best.feature && thr < best.threshold)));
            if (better) {
                best.found = true;
                best.feature = static_cast<int>(f);
                best.threshold = thr;
                best.gain = gain;
            }
        }
    }
    if (best.found && best.gain < 0.0) best.gain = 0.0;
    return best;
}

} // namespace detail

class DecisionTree {
public:
    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& nodes() { return nodes_; }

    void fit(const Matrix& x, std::span<const double> y, std::vector<std::size_t> idx,
             const ForestHyper& hp, Rng rng) {
        nodes_.clear();
        std::size_t m = x.cols();
        std::size_t n_feat = hp.max_features > 0
                                 ? std::min<std::size_t>(hp.max_features, m)
                                 : std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(m))));
        if (hp.max_leaves > 0)
            grow_best_first(x, y, std::move(idx), hp, n_feat, rng);
        else
            grow_depth_first(x, y, std::move(idx), hp, n_feat, rng);
    }

    double predict_one(std::span<const double> row) const {
        std::int32_t i = 0;
        while (nodes_[i].feature >= 0)
            i = (row[nodes_[i].feature] <= nodes_[i].threshold) ? nodes_[i].left : nodes_[i].right;
        return nodes_[i].value;
    }

private:
    std::vector<TreeNode> nodes_;

    std::int32_t make_node(std::span<const double> y, std::span<const std::size_t> idx) {
        TreeNode node;
        double s = 0.0;
        for (std::size_t i : idx) s += y[i];
        node.value = s / static_cast<double>(idx.size());
        node.n_samples = static_cast<std::uint32_t>(idx.size());
        nodes_.push_back(node);
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    // Candidate feature indices, without replacement, returned sorted.
    static std::vector<std::size_t> draw_features(std::size_t m, std::size_t k, Rng& rng) {
        std::vector<std::size_t> f = rng.sample_without_replacement(m, k);
        std::sort(f.begin(), f.end());
        return f;
    }

    static void partition(const Matrix& x, int feature, double threshold,
                          const std::vector<std::size_t>& idx,
                          std::vector<std::size_t>& left, std::vector<std::size_t>& right) {
        left.clear();
        right.clear();
        for (std::size_t i : idx)
            (x(i, static_cast<std::size_t>(feature)) <= threshold ? left : right).push_back(i);
    }

    void grow_depth_first(const Matrix& x, std::span<const double> y, std::vector<std::size_t> root_idx,
                          const ForestHyper& hp, std::size_t n_feat, Rng& rng) {
        struct Item {
            std::int32_t node;
            std::vector<std::size_t> idx;
            int depth;
        };
        std::vector<std::pair<double, double>> scratch;
        std::vector<Item> stack;
        std::int32_t root = make_node(y, root_idx);
        stack.push_back({root, std::move(root_idx), 0});
        while (!stack.empty()) {
            Item it = std::move(stack.back());
            stack.pop_back();
            if (hp.max_depth >= 0 && it.depth >= hp.max_depth) continue;
            if (it.idx.size() < 2 * static_cast<std::size_t>(hp.min_samples_leaf) || it.idx.size() < 2)
                continue;
            auto feats = draw_features(x.cols(), n_feat, rng);
            auto split = detail::best_split(x, y, it.idx, feats, hp.min_samples_leaf, scratch);
            if (!split.found || split.gain <= 0.0) continue;
            std::vector<std::size_t> li, ri;
            partition(x, split.feature, split.threshold, it.idx, li, ri);
            if (li.empty() || ri.empty()) continue;
            std::int32_t l = make_node(y, li);
            std::int32_t r = make_node(y, ri);
            nodes_[it.node].feature = split.feature;
            nodes_[it.node].threshold = split.threshold;
            nodes_[it.node].left = l;
            nodes_[it.node].right = r;
            nodes_[it.node].gain = split.gain;
            stack.push_back({r, std::move(ri), it.depth + 1});
            stack.push_back({l, std::move(li), it.depth + 1});
        }
    }

    // Best-first growth: repeatedly split the frontier node with the highest
    // gain until the leaf budget is exhausted.
    void grow_best_first(const Matrix& x, std::span<const double> y, std::vector<std::size_t> root_idx,
                         const ForestHyper& hp, std::size_t n_feat, Rng& rng) {
        struct Cand {
            double gain;
            std::int32_t node;
            std::size_t order;           // creation order breaks gain ties
            detail::SplitResult split;
            std::vector<std::size_t> idx;
            int depth;
        };
        auto worse = [](const Cand& a, const Cand& b) {
            if (a.gain != b.gain) return a.gain < b.gain;
            return a.order > b.order;
        };
        std::vector<Cand> frontier;
        std::vector<std::pair<double, double>> scratch;
        std::size_t order = 0;

        auto consider = [&](std::int32_t node, std::vector<std::size_t> idx, int depth) {
            if (hp.max_depth >= 0 && depth >= hp.max_depth) return;
            if (idx.size() < 2 * static_cast<std::size_t>(hp.min_samples_leaf) || idx.size() < 2)
                return;
            auto feats = draw_features(x.cols(), n_feat, rng);
            auto split = detail::best_split(x, y, idx, feats, hp.min_samples_leaf, scratch);
            if (!split.found || split.gain <= 0.0) return;
            frontier.push_back(Cand{split.gain, node, order++, split, std::move(idx), depth});
            std::push_heap(frontier.begin(), frontier.end(), worse);
        };

        std::int32_t root = make_node(y, root_idx);
        int leaves = 1;
        consider(root, std::move(root_idx), 0);
        while (!frontier.empty() && leaves < hp.max_leaves) {
            std::pop_heap(frontier.begin(), frontier.end(), worse);
            Cand c = std::move(frontier.back());
            frontier.pop_back();
            std::vector<std::size_t> li, ri;
            partition(x, c.split.feature, c.split.threshold, c.idx, li, ri);
            if (li.empty() || ri.empty()) continue;
            std::int32_t l = make_node(y, li);
            std::int32_t r = make_node(y, ri);
            nodes_[c.node].feature = c.split.feature;
            nodes_[c.node].threshold = c.split.threshold;
            nodes_[c.node].left = l;
            nodes_[c.node].right = r;
            nodes_[c.node].gain = c.split.gain;
            ++leaves;
            consider(l, std::move(li), c.depth + 1);
            consider(r, std::move(ri), c.depth + 1);
        }
    }
};

class RandomForest {
public:
    RandomForest() = default;
    RandomForest(std::vector<DecisionTree> trees, ForestHyper hp, std::size_t m)
        : trees_(std::move(trees)), hyper_(hp), m_(m) {}

    std::size_t feature_count() const { return m_; }
    std::size_t n_trees() const { return trees_.size(); }
    const std::vector<DecisionTree>& trees() const { return trees_; }
    std::vector<DecisionTree>& trees() { return trees_; }
    const ForestHyper& hyper() const { return hyper_; }
    ForestHyper& hyper() { return hyper_; }
    void set_feature_count(std::size_t m) { m_ = m; }

    double predict_one(std::span<const double> row) const {
        double s = 0.0;
        for (const auto& t : trees_) s += t.predict_one(row);
        return s / static_cast<double>(trees_.size());
    }

    // Trees-outer batch: same accumulation order per sample as predict_one,
    // so both paths are bit-identical.
    void predict_batch(const Matrix& x, std::vector<double>& out) const {
        out.assign(x.rows(), 0.0);
        for (const auto& t : trees_)
            for (std::size_t r = 0; r < x.rows(); ++r) out[r] += t.predict_one(x.row(r));
        double n = static_cast<double>(trees_.size());
        for (double& v : out) v /= n;   // divide, exactly as predict_one does
    }

    // Total split variance reduction per feature, normalized to sum to 1.
    std::vector<double> feature_importance() const {
        std::vector<double> imp(m_, 0.0);
        double total = 0.0;
        for (const auto& t : trees_)
            for (const auto& n : t.nodes())
                if (n.feature >= 0) {
                    imp[static_cast<std::size_t>(n.feature)] += n.gain;
                    total += n.gain;
                }
        if (total > 0.0)
            for (double& v : imp) v /= total;
        return imp;
    }

private:
    std::vector<DecisionTree> trees_;
    ForestHyper hyper_;
    std::size_t m_ = 0;
};

inline RandomForest train_forest(const Matrix& x, std::span<const double> y,
                                 const ForestHyper& hp, Rng rng) {
    std::size_t n = x.rows();
    std::vector<DecisionTree> trees(static_cast<std::size_t>(hp.n_trees));
    for (std::size_t t = 0; t < trees.size(); ++t) {
        Rng tree_rng = rng.child("tree", t);
        std::vector<std::size_t> boot(n);
        for (std::size_t i = 0; i < n; ++i) boot[i] = hp.bootstrap ? tree_rng.index(n) : i;
        trees[t].fit(x, y, std::move(boot), hp, tree_rng.child("grow"));
    }
    return RandomForest(std::move(trees), hp, x.cols());
}

// Grid search by k-fold CV on the training data (mean fold R^2), then a
// refit of the winning point on all of it. A single-point grid skips the
// fold loop entirely.
inline std::pair<RandomForest, TrainReport>
fit_forest(const DataSet& train, const std::vector<ForestHyper>& grid, int cv_folds, Rng rng,
           const DataSet* test = nullptr) {
    if (grid.empty()) throw std::invalid_argument("fit_forest: empty grid");
    std::size_t n = train.x.rows();
    if (n < 2 * static_cast<std::size_t>(std::max(cv_folds, 1)))
        throw std::invalid_argument("fit_forest: too few samples");
    if (variance(train.y) == 0.0)
        throw std::invalid_argument("fit_forest: target has zero variance");

    TrainReport report;
    std::size_t best = 0;
    if (grid.size() > 1) {
        std::vector<std::size_t> perm = rng.child("cvfolds").permutation(n);
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double score_sum = 0.0;
            int scored = 0;
            for (int fold = 0; fold < cv_folds; ++fold) {
                std::vector<std::size_t> tr, va;
                for (std::size_t i = 0; i < n; ++i)
                    ((static_cast<int>(i % static_cast<std::size_t>(cv_folds)) == fold) ? va : tr)
                        .push_back(perm[i]);
                if (va.size() < 2 || tr.empty()) continue;
                Matrix xtr = train.x.select_rows(tr);
                std::vector<double> ytr(tr.size());
                for (std::size_t i = 0; i < tr.size(); ++i) ytr[i] = train.y[tr[i]];
                Matrix xva = train.x.select_rows(va);
                std::vector<double> yva(va.size());
                for (std::size_t i = 0; i < va.size(); ++i) yva[i] = train.y[va[i]];
                if (variance(yva) == 0.0) continue;
                RandomForest f = train_forest(xtr, ytr, grid[g], rng.child("cv", g * 101 + static_cast<std::size_t>(fold)));
                score_sum += r_squared(yva, predict(f, xva));
                ++scored;
            }
            double mean_score = scored > 0 ? score_sum / scored : -std::numeric_limits<double>::infinity();
            report.cv_table.push_back({grid[g].describe(), mean_score});
            if (mean_score > best_score) {
                best_score = mean_score;
                best = g;
            }
        }
    } else {
        report.cv_table.push_back({grid[0].describe(), std::nan("")});
    }

    RandomForest model = train_forest(train.x, train.y, grid[best], rng.child("final"));
    report.r2_train = r_squared(train.y, predict(model, train.x));
    if (test && test->x.rows() >= 2 && variance(test->y) > 0.0)
        report.r2_test = r_squared(test->y, predict(model, test->x));
    return {std::move(model), std::move(report)};
}

} // namespace cimla
