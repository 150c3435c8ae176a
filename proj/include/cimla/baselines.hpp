#pragma once
// Reference differential-network methods: Fisher-z differential
// co-expression (Pearson and Spearman), raw delta-correlation, and the
// forest-importance difference adapted from GENIE3.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/evaluation.hpp"
#include "cimla/expression.hpp"
#include "cimla/matrix.hpp"

namespace cimla {

enum class CorrelationMethod { pearson, spearman };

struct CorrelationEntry {
    double r_case = 0.0;
    double r_control = 0.0;
    std::size_t n_case = 0;
    std::size_t n_control = 0;
    bool degenerate = false;   // zero-variance series, r recorded as 0
};

struct CorrelationTable {
    std::map<EdgeKey, CorrelationEntry> pairs;
};

namespace detail {

inline std::vector<double> midrank(std::span<const double> v) {
    std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && v[order[j]] == v[order[i]]) ++j;
        double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        i = j;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b, bool& degenerate) {
    double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        degenerate = true;
        return 0.0;
    }
    double r = sab / std::sqrt(saa * sbb);
    return std::clamp(r, -1.0, 1.0);
}

} // namespace detail

// Per-pair, per-condition correlation of TF row vs target row. Target genes
// default to every gene outside the TF list plus TFs acting as targets;
// callers pass the universe they care about.
inline CorrelationTable correlation_tables(const ExpressionMatrix& d_case,
                                           const ExpressionMatrix& d_control, const TfList& tfs,
                                           const std::vector<std::string>& target_genes,
                                           CorrelationMethod method) {
    if (d_case.n_cells() < 4 || d_control.n_cells() < 4)
        throw std::invalid_argument("correlation_tables: need >= 4 cells per condition");
    auto prep = [&](const ExpressionMatrix& m, const std::string& gene) {
        auto g = m.find_gene(gene);
        if (!g) throw std::invalid_argument("correlation_tables: unknown gene " + gene);
        std::span<const double> row = m.values.row(*g);
        std::vector<double> v(row.begin(), row.end());
        if (method == CorrelationMethod::spearman) v = detail::midrank(v);
        return v;
    };
    // cache per-gene series so each row is ranked once
    std::map<std::string, std::vector<double>> cache_case, cache_ctrl;
    auto get = [&](std::map<std::string, std::vector<double>>& cache, const ExpressionMatrix& m,
                   const std::string& gene) -> const std::vector<double>& {
        auto it = cache.find(gene);
        if (it == cache.end()) it = cache.emplace(gene, prep(m, gene)).first;
        return it->second;
    };
    CorrelationTable table;
    for (const auto& tf : tfs.names) {
        const auto& tf_case = get(cache_case, d_case, tf);
        const auto& tf_ctrl = get(cache_ctrl, d_control, tf);
        for (const auto& gene : target_genes) {
            if (gene == tf) continue;
            CorrelationEntry e;
            e.n_case = d_case.n_cells();
            e.n_control = d_control.n_cells();
            bool deg1 = false, deg0 = false;
            e.r_case = detail::pearson(tf_case, get(cache_case, d_case, gene), deg1);
            e.r_control = detail::pearson(tf_ctrl, get(cache_ctrl, d_control, gene), deg0);
            e.degenerate = deg1 || deg0;
            table.pairs[{tf, gene}] = e;
        }
    }
    return table;
}

// |atanh(r1) - atanh(r0)| / sqrt(1/(n1-3) + 1/(n0-3)); the classical
// Fisher-z statistic for a correlation difference. |r| = 1 is clamped.
inline double zscore_diff_value(double r_case, double r_control, std::size_t n_case,
                                std::size_t n_control, bool* clamped = nullptr) {
    if (n_case < 4 || n_control < 4)
        throw std::invalid_argument("zscore_diff: need n >= 4 per condition");
    auto clamp_r = [&](double r) {
        if (std::fabs(r) >= 1.0) {
            if (clamped) *clamped = true;
            return r > 0 ? 1.0 - 1e-12 : -1.0 + 1e-12;
        }
        return r;
    };
    double z1 = std::atanh(clamp_r(r_case));
    double z0 = std::atanh(clamp_r(r_control));
    double se = std::sqrt(1.0 / static_cast<double>(n_case - 3) +
                          1.0 / static_cast<double>(n_control - 3));
    return std::fabs(z1 - z0) / se;
}

inline RankedEdgeList zscore_diff(const CorrelationTable& table) {
    RankedEdgeList list;
    for (const auto& [key, e] : table.pairs)
        list.edges.push_back({key.first, key.second,
                              zscore_diff_value(e.r_case, e.r_control, e.n_case, e.n_control)});
    list.sort_descending();
    return list;
}

inline std::map<EdgeKey, double> delta_correlation(const CorrelationTable& table) {
    std::map<EdgeKey, double> out;
    for (const auto& [key, e] : table.pairs) out[key] = std::fabs(e.r_case - e.r_control);
    return out;
}

inline RankedEdgeList delta_correlation_ranking(const CorrelationTable& table) {
    RankedEdgeList list;
    for (const auto& [key, e] : table.pairs)
        list.edges.push_back({key.first, key.second, std::fabs(e.r_case - e.r_control)});
    list.sort_descending();
    return list;
}

// GENIE3-diff for one gene: |importance_case - importance_control| per TF.
// Both importance vectors must come from forests trained on the same TF order.
inline std::vector<double> genie3_diff_gene(const std::vector<double>& importance_case,
                                            const std::vector<double>& importance_control) {
    if (importance_case.size() != importance_control.size())
        throw std::invalid_argument("genie3_diff: TF order/length mismatch");
    std::vector<double> out(importance_case.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::fabs(importance_case[i] - importance_control[i]);
    return out;
}

} // namespace cimla
