#pragma once
// Ranking evaluation against a ground-truth differential edge set: AUROC
// (Mann-Whitney with half credit for ties), AUPRC (average-precision step
// rule, tied blocks processed whole), the class-size normalization, per-gene
// restriction, top-fraction set combination and F1, and TPR/FPR stratified
// by a delta-correlation cutoff.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cimla/tsv.hpp"

namespace cimla {

using EdgeKey = std::pair<std::string, std::string>;   // (tf, gene)

struct ScoredEdge {
    std::string tf;
    std::string gene;
    double score = 0.0;
};

struct RankedEdgeList {
    std::vector<ScoredEdge> edges;   // maintained in descending score order

    void sort_descending() {
        std::stable_sort(edges.begin(), edges.end(), [](const ScoredEdge& a, const ScoredEdge& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.tf != b.tf) return a.tf < b.tf;
            return a.gene < b.gene;
        });
    }

    void validate() const {
        std::set<EdgeKey> seen;
        for (const auto& e : edges) {
            if (!std::isfinite(e.score))
                throw std::invalid_argument("RankedEdgeList: non-finite score");
            if (!seen.insert({e.tf, e.gene}).second)
                throw std::invalid_argument("RankedEdgeList: duplicate pair " + e.tf + "->" + e.gene);
        }
    }
};

// Probability that a random positive outranks a random negative, ties
// counted half (the Mann-Whitney form, computed from midranks).
inline double auroc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auroc: size mismatch");
    std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? n_pos : n_neg) += 1;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auroc: needs at least one positive and one negative");
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));   // 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += midrank;
        i = j;
    }
    return (rank_sum_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

// Average precision, descending score, each tied block contributing the
// precision measured after the whole block is retrieved.
inline double auprc_from_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("auprc: size mismatch");
    std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double n_pos = 0;
    for (int l : labels) n_pos += l;
    if (n_pos == 0) throw std::invalid_argument("auprc: no positives");
    double ap = 0.0, tp = 0.0, seen = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double block_pos = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            block_pos += labels[order[j]];
            ++j;
        }
        tp += block_pos;
        seen += static_cast<double>(j - i);
        if (block_pos > 0) ap += (block_pos / n_pos) * (tp / seen);
        i = j;
    }
    return ap;
}

namespace detail {

// Aligns a ranking to a universe of pairs: unranked pairs share a score
// strictly below every ranked one.
inline void align_to_universe(const RankedEdgeList& ranking, const std::set<EdgeKey>& truth,
                              const std::vector<EdgeKey>& universe, std::vector<double>& scores,
                              std::vector<int>& labels) {
    std::map<EdgeKey, double> score_map;
    double min_score = 0.0;
    bool any = false;
    for (const auto& e : ranking.edges) {
        score_map[{e.tf, e.gene}] = e.score;
        if (!any || e.score < min_score) min_score = e.score;
        any = true;
    }
    double unranked = any ? min_score - 1.0 : 0.0;
    scores.clear();
    labels.clear();
    scores.reserve(universe.size());
    labels.reserve(universe.size());
    for (const auto& key : universe) {
        auto it = score_map.find(key);
        scores.push_back(it == score_map.end() ? unranked : it->second);
        labels.push_back(truth.count(key) ? 1 : 0);
    }
}

} // namespace detail

inline double auroc(const RankedEdgeList& ranking, const std::set<EdgeKey>& truth,
                    const std::vector<EdgeKey>& universe) {
    std::vector<double> scores;
    std::vector<int> labels;
    detail::align_to_universe(ranking, truth, universe, scores, labels);
    return auroc_from_scores(scores, labels);
}

struct AuprcResult {
    double auprc = 0.0;
    double normalized = 0.0;   // auprc / prevalence
};

inline AuprcResult auprc_normalized(const RankedEdgeList& ranking, const std::set<EdgeKey>& truth,
                                    const std::vector<EdgeKey>& universe) {
    std::vector<double> scores;
    std::vector<int> labels;
    detail::align_to_universe(ranking, truth, universe, scores, labels);
    double pos = 0;
    for (int l : labels) pos += l;
    if (pos == 0 || pos == static_cast<double>(labels.size()))
        throw std::invalid_argument("auprc_normalized: degenerate class split");
    AuprcResult r;
    r.auprc = auprc_from_scores(scores, labels);
    double prevalence = pos / static_cast<double>(labels.size());
    r.normalized = r.auprc / prevalence;
    return r;
}

struct PerGeneRow {
    std::string gene;
    double auroc = 0.0;
    double auprc = 0.0;
    double normalized_auprc = 0.0;
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    bool skipped = false;          // no negatives among the gene's candidates
};

// Restrict metrics to each gene's candidate TFs. Genes with no true
// differential regulator are excluded; genes with no negatives are flagged.
inline std::vector<PerGeneRow> per_gene_eval(const RankedEdgeList& ranking,
                                             const std::set<EdgeKey>& truth,
                                             const std::vector<EdgeKey>& universe) {
    std::map<std::string, std::vector<EdgeKey>> by_gene;
    for (const auto& key : universe) by_gene[key.second].push_back(key);
    std::vector<PerGeneRow> out;
    for (const auto& [gene, pairs] : by_gene) {
        std::size_t n_pos = 0;
        for (const auto& p : pairs) n_pos += truth.count(p);
        if (n_pos == 0) continue;
        PerGeneRow row;
        row.gene = gene;
        row.n_pos = n_pos;
        row.n_neg = pairs.size() - n_pos;
        if (row.n_neg == 0) {
            row.skipped = true;
            out.push_back(row);
            continue;
        }
        row.auroc = auroc(ranking, truth, pairs);
        AuprcResult pr = auprc_normalized(ranking, truth, pairs);
        row.auprc = pr.auprc;
        row.normalized_auprc = pr.normalized;
        out.push_back(row);
    }
    return out;
}

// Top round(fraction * n) pairs of a ranking, as a set.
inline std::set<EdgeKey> top_fraction_set(const RankedEdgeList& ranking, double fraction) {
    RankedEdgeList sorted = ranking;
    sorted.sort_descending();
    auto k = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(sorted.edges.size())));
    k = std::min(k, sorted.edges.size());
    std::set<EdgeKey> out;
    for (std::size_t i = 0; i < k; ++i) out.insert({sorted.edges[i].tf, sorted.edges[i].gene});
    return out;
}

enum class CombineMode { set_union, set_intersection };

inline std::set<EdgeKey> combine_rankings(const RankedEdgeList& a, const RankedEdgeList& b,
                                          double top_fraction, CombineMode mode) {
    std::set<EdgeKey> ta = top_fraction_set(a, top_fraction);
    std::set<EdgeKey> tb = top_fraction_set(b, top_fraction);
    std::set<EdgeKey> out;
    if (mode == CombineMode::set_union) {
        out = ta;
        out.insert(tb.begin(), tb.end());
    } else {
        for (const auto& k : ta)
            if (tb.count(k)) out.insert(k);
    }
    return out;
}

inline double f1_score(const std::set<EdgeKey>& predicted, const std::set<EdgeKey>& truth) {
    if (predicted.empty() || truth.empty()) return 0.0;
    std::size_t tp = 0;
    for (const auto& k : predicted) tp += truth.count(k);
    double precision = static_cast<double>(tp) / static_cast<double>(predicted.size());
    double recall = static_cast<double>(tp) / static_cast<double>(truth.size());
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

struct StratifiedRates {
    std::optional<double> tpr_low, fpr_low;     // dCorr <= cutoff stratum
    std::optional<double> tpr_high, fpr_high;   // dCorr > cutoff stratum
};

// TPR/FPR of the top-fraction prediction set, split by delta-correlation.
inline StratifiedRates stratified_rates(const RankedEdgeList& ranking, double top_fraction,
                                        const std::set<EdgeKey>& truth,
                                        const std::map<EdgeKey, double>& dcorr,
                                        const std::vector<EdgeKey>& universe,
                                        double cutoff = 0.16) {
    std::set<EdgeKey> predicted = top_fraction_set(ranking, top_fraction);
    double tp_low = 0, p_low = 0, fp_low = 0, n_low = 0;
    double tp_high = 0, p_high = 0, fp_high = 0, n_high = 0;
    for (const auto& key : universe) {
        auto it = dcorr.find(key);
        if (it == dcorr.end())
            throw std::invalid_argument("stratified_rates: missing dCorr for pair");
        bool low = it->second <= cutoff;
        bool pos = truth.count(key) > 0;
        bool pred = predicted.count(key) > 0;
        if (pos) {
            (low ? p_low : p_high) += 1;
            if (pred) (low ? tp_low : tp_high) += 1;
        } else {
            (low ? n_low : n_high) += 1;
            if (pred) (low ? fp_low : fp_high) += 1;
        }
    }
    StratifiedRates out;
    if (p_low > 0) out.tpr_low = tp_low / p_low;
    if (n_low > 0) out.fpr_low = fp_low / n_low;
    if (p_high > 0) out.tpr_high = tp_high / p_high;
    if (n_high > 0) out.fpr_high = fp_high / n_high;
    return out;
}

// ---- ranked list file format: tf <TAB> gene <TAB> score [<TAB> method] ----

inline void save_ranked_edges(const RankedEdgeList& list, const std::string& path,
                              const std::string& method = "") {
    TsvWriter w(path);
    w.field(std::string("tf")).field(std::string("gene")).field(std::string("score"));
    if (!method.empty()) w.field(std::string("method"));
    w.endrow();
    for (const auto& e : list.edges) {
        w.field(e.tf).field(e.gene).field(e.score);
        if (!method.empty()) w.field(method);
        w.endrow();
    }
}

inline RankedEdgeList load_ranked_edges(const std::string& path) {
    auto rows = read_tsv(path);
    RankedEdgeList list;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 0 && !rows[r].empty() && rows[r][0] == "tf") continue;
        if (rows[r].size() < 3) throw std::runtime_error("ranked edge list: short row in " + path);
        list.edges.push_back({rows[r][0], rows[r][1], parse_double(rows[r][2], path)});
    }
    return list;
}

} // namespace cimla
