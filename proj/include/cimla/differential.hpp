#pragma once
// The differential layer: per-sample attribution deltas between the two
// condition models, their root-mean-square aggregate (the per-TF score
// Lambda), and rank-derived edge scores.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/matrix.hpp"
#include "cimla/tsv.hpp"

namespace cimla {

// Delta_t(x) = phi_t(f_case, x) - phi_t(f_control, x), elementwise over the
// shared sample set (drawn from the case condition).
inline Matrix local_delta(const Matrix& attr_case, const Matrix& attr_control) {
    if (attr_case.rows() != attr_control.rows() || attr_case.cols() != attr_control.cols())
        throw std::invalid_argument("local_delta: attribution shapes differ");
    Matrix out(attr_case.rows(), attr_case.cols());
    for (std::size_t i = 0; i < out.data().size(); ++i)
        out.data()[i] = attr_case.data()[i] - attr_control.data()[i];
    return out;
}

// Lambda_t = sqrt(mean_x Delta_t(x)^2), one entry per TF column.
inline std::vector<double> aggregate_rms(const Matrix& deltas) {
    if (deltas.rows() == 0) throw std::invalid_argument("aggregate_rms: no samples");
    std::vector<double> out(deltas.cols(), 0.0);
    for (std::size_t r = 0; r < deltas.rows(); ++r) {
        std::span<const double> row = deltas.row(r);
        for (std::size_t c = 0; c < deltas.cols(); ++c) out[c] += row[c] * row[c];
    }
    for (double& v : out) v = std::sqrt(v / static_cast<double>(deltas.rows()));
    return out;
}

// mean |Delta_t(x)|; provided for comparison with the common aggregation.
inline std::vector<double> aggregate_mean_abs(const Matrix& deltas) {
    if (deltas.rows() == 0) throw std::invalid_argument("aggregate_mean_abs: no samples");
    std::vector<double> out(deltas.cols(), 0.0);
    for (std::size_t r = 0; r < deltas.rows(); ++r) {
        std::span<const double> row = deltas.row(r);
        for (std::size_t c = 0; c < deltas.cols(); ++c) out[c] += std::fabs(row[c]);
    }
    for (double& v : out) v /= static_cast<double>(deltas.rows());
    return out;
}

// -log(r / n_tfs), natural log; r is the edge's 1-based rank within its gene.
inline double dgrn_score(std::size_t rank, std::size_t n_tfs) {
    if (rank < 1 || rank > n_tfs) throw std::invalid_argument("dgrn_score: rank out of range");
    return -std::log(static_cast<double>(rank) / static_cast<double>(n_tfs));
}

struct CimlaScoreRow {
    std::string tf;
    std::string gene;
    double lambda = 0.0;
    std::optional<double> background_max;
    bool passes_threshold = false;
    std::size_t rank = 0;                    // 1-based within the gene
    std::optional<double> dgrn;              // present iff passes_threshold
};

struct CimlaScoreTable {
    std::vector<CimlaScoreRow> rows;
};

// Rows for one gene: rank by descending lambda, ties broken by TF id so the
// output is deterministic. An edge passes only if lambda strictly exceeds
// the background maximum. `total_tfs` is the global TF count used in the
// dGRN score (the same for every gene); it defaults to this gene's list.
inline std::vector<CimlaScoreRow> score_gene(const std::string& gene,
                                             const std::vector<std::string>& tf_names,
                                             const std::vector<double>& lambda,
                                             std::optional<double> background_max,
                                             std::size_t total_tfs = 0) {
    if (tf_names.size() != lambda.size())
        throw std::invalid_argument("score_gene: tf/lambda size mismatch");
    if (total_tfs == 0) total_tfs = tf_names.size();
    std::vector<std::size_t> order(tf_names.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (lambda[a] != lambda[b]) return lambda[a] > lambda[b];
        return tf_names[a] < tf_names[b];
    });
    std::vector<CimlaScoreRow> rows(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        CimlaScoreRow& row = rows[pos];
        row.tf = tf_names[order[pos]];
        row.gene = gene;
        row.lambda = lambda[order[pos]];
        row.background_max = background_max;
        row.rank = pos + 1;
        row.passes_threshold = background_max ? (row.lambda > *background_max) : false;
        if (row.passes_threshold) row.dgrn = dgrn_score(row.rank, total_tfs);
    }
    return rows;
}

inline void save_score_table(const CimlaScoreTable& table, const std::string& path) {
    TsvWriter w(path);
    w.field(std::string("tf")).field(std::string("gene")).field(std::string("lambda"))
        .field(std::string("background_max")).field(std::string("pass"))
        .field(std::string("rank")).field(std::string("dgrn_score"));
    w.endrow();
    for (const auto& r : table.rows) {
        w.field(r.tf).field(r.gene).field(r.lambda);
        w.field(r.background_max ? format_double(*r.background_max) : std::string("NA"));
        w.field(r.passes_threshold ? std::string("1") : std::string("0"));
        w.field(r.rank);
        w.field(r.dgrn ? format_double(*r.dgrn) : std::string("NA"));
        w.endrow();
    }
}

} // namespace cimla
