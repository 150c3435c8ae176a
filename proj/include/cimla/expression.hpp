#pragma once
// Expression data model and the dataset transforms shared by the whole
// pipeline: per-gene standardization, train/test splitting, self-feature
// decorrelation and condition-label shuffling.
//
// Matrix orientation is genes x cells everywhere on disk and in
// ExpressionMatrix; design matrices (samples x features) are built on
// demand by build_design().

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "cimla/matrix.hpp"
#include "cimla/model.hpp"
#include "cimla/rng.hpp"
#include "cimla/tsv.hpp"

namespace cimla {

struct ExpressionMatrix {
    std::vector<std::string> gene_ids;
    std::vector<std::string> cell_ids;
    Matrix values;   // genes x cells
    int condition = 0;

    std::size_t n_genes() const { return gene_ids.size(); }
    std::size_t n_cells() const { return cell_ids.size(); }

    std::optional<std::size_t> find_gene(const std::string& id) const {
        for (std::size_t i = 0; i < gene_ids.size(); ++i)
            if (gene_ids[i] == id) return i;
        return std::nullopt;
    }

    void validate() const {
        if (values.rows() != gene_ids.size() || values.cols() != cell_ids.size())
            throw std::invalid_argument("ExpressionMatrix: shape does not match id lists");
        if (condition != 0 && condition != 1)
            throw std::invalid_argument("ExpressionMatrix: condition must be 0 or 1");
        for (double v : values.data())
            if (!std::isfinite(v)) throw std::invalid_argument("ExpressionMatrix: non-finite value");
    }
};

struct TfList {
    std::vector<std::string> names;

    std::size_t size() const { return names.size(); }

    void validate_against(const ExpressionMatrix& m) const {
        std::unordered_map<std::string, int> seen;
        for (const auto& n : names) {
            if (++seen[n] > 1) throw std::invalid_argument("TfList: duplicate entry " + n);
            if (!m.find_gene(n)) throw std::invalid_argument("TfList: unknown gene " + n);
        }
    }
};

// Per-gene transform parameters, reusable on held-out data. Rows with zero
// variance are flagged and left untouched rather than rescaled.
struct StandardizeStats {
    std::vector<double> mean;
    std::vector<double> stddev;             // population std
    std::vector<std::uint8_t> flagged;      // 1 where std == 0
};

// Moments over a column subset (train cells). Empty subset means all cells.
inline StandardizeStats row_stats(const ExpressionMatrix& m,
                                  std::span<const std::size_t> cols = {}) {
    if (m.n_genes() == 0 || m.n_cells() == 0)
        throw std::invalid_argument("row_stats: empty matrix");
    std::vector<std::size_t> all;
    if (cols.empty()) {
        all.resize(m.n_cells());
        for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
        cols = all;
    }
    StandardizeStats st;
    st.mean.resize(m.n_genes());
    st.stddev.resize(m.n_genes());
    st.flagged.resize(m.n_genes());
    double n = static_cast<double>(cols.size());
    for (std::size_t g = 0; g < m.n_genes(); ++g) {
        std::span<const double> row = m.values.row(g);
        double s = 0.0;
        for (std::size_t c : cols) s += row[c];
        double mu = s / n;
        double q = 0.0;
        for (std::size_t c : cols) q += (row[c] - mu) * (row[c] - mu);
        double sd = std::sqrt(q / n);
        st.mean[g] = mu;
        st.stddev[g] = sd;
        st.flagged[g] = (sd == 0.0) ? 1 : 0;
    }
    return st;
}

inline ExpressionMatrix apply_standardize(const ExpressionMatrix& m, const StandardizeStats& st) {
    if (st.mean.size() != m.n_genes())
        throw std::invalid_argument("apply_standardize: stats/gene count mismatch");
    ExpressionMatrix out = m;
    for (std::size_t g = 0; g < m.n_genes(); ++g) {
        if (st.flagged[g]) continue;
        std::span<double> row = out.values.row(g);
        for (double& v : row) v = (v - st.mean[g]) / st.stddev[g];
    }
    return out;
}

// Zero-mean unit-variance transform per gene row (population std), with the
// parameters returned for reuse on held-out cells.
inline std::pair<ExpressionMatrix, StandardizeStats> standardize(const ExpressionMatrix& m) {
    StandardizeStats st = row_stats(m);
    return {apply_standardize(m, st), st};
}

inline ExpressionMatrix select_cells(const ExpressionMatrix& m, std::span<const std::size_t> idx) {
    ExpressionMatrix out;
    out.gene_ids = m.gene_ids;
    out.condition = m.condition;
    out.cell_ids.reserve(idx.size());
    for (std::size_t i : idx) out.cell_ids.push_back(m.cell_ids[i]);
    out.values = m.values.select_cols(idx);
    return out;
}

// Random disjoint column partition. Train size is round(fraction * n),
// clamped so both sides are non-empty.
inline std::pair<ExpressionMatrix, ExpressionMatrix>
split_train_test(const ExpressionMatrix& m, double train_fraction, Rng rng) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split_train_test: fraction must be in (0,1)");
    std::size_t n = m.n_cells();
    if (n < 2) throw std::invalid_argument("split_train_test: need at least 2 cells");
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    if (n_train < 1) n_train = 1;
    if (n_train > n - 1) n_train = n - 1;
    std::vector<std::size_t> perm = rng.permutation(n);
    std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> test_idx(perm.begin() + static_cast<long>(n_train), perm.end());
    return {select_cells(m, train_idx), select_cells(m, test_idx)};
}

// When the target gene is itself a candidate TF, permute that feature row
// across cells to decorrelate the outcome from its own column.
inline ExpressionMatrix decorrelate_self_feature(const ExpressionMatrix& m,
                                                 const std::string& target_gene,
                                                 const TfList& tfs, Rng rng) {
    bool in_list = false;
    for (const auto& n : tfs.names)
        if (n == target_gene) { in_list = true; break; }
    if (!in_list) return m;
    auto g = m.find_gene(target_gene);
    if (!g) return m;
    ExpressionMatrix out = m;
    std::vector<std::size_t> perm = rng.permutation(m.n_cells());
    std::span<const double> src = m.values.row(*g);
    std::span<double> dst = out.values.row(*g);
    for (std::size_t c = 0; c < perm.size(); ++c) dst[c] = src[perm[c]];
    return out;
}

// Pool the cells of both conditions and deal them back into two groups of
// the original sizes. Used to build null (no differential regulation) data.
inline std::pair<ExpressionMatrix, ExpressionMatrix>
shuffle_condition_labels(const ExpressionMatrix& d1, const ExpressionMatrix& d0, Rng rng) {
    if (d1.gene_ids != d0.gene_ids)
        throw std::invalid_argument("shuffle_condition_labels: gene lists differ");
    std::size_t n1 = d1.n_cells(), n0 = d0.n_cells();
    std::vector<std::size_t> perm = rng.permutation(n1 + n0);
    ExpressionMatrix pool;
    pool.gene_ids = d1.gene_ids;
    pool.cell_ids.reserve(n1 + n0);
    pool.values = Matrix(d1.n_genes(), n1 + n0);
    for (std::size_t c = 0; c < n1 + n0; ++c) {
        const ExpressionMatrix& src = (c < n1) ? d1 : d0;
        std::size_t sc = (c < n1) ? c : c - n1;
        pool.cell_ids.push_back(src.cell_ids[sc]);
        for (std::size_t g = 0; g < pool.n_genes(); ++g) pool.values(g, c) = src.values(g, sc);
    }
    std::vector<std::size_t> idx1(perm.begin(), perm.begin() + static_cast<long>(n1));
    std::vector<std::size_t> idx0(perm.begin() + static_cast<long>(n1), perm.end());
    ExpressionMatrix out1 = select_cells(pool, idx1);
    ExpressionMatrix out0 = select_cells(pool, idx0);
    out1.condition = d1.condition;
    out0.condition = d0.condition;
    return {out1, out0};
}

// cells x TFs design matrix with the target expression per cell
using Design = DataSet;

inline Design build_design(const ExpressionMatrix& m, const TfList& tfs,
                           const std::string& target_gene) {
    auto t = m.find_gene(target_gene);
    if (!t) throw std::invalid_argument("build_design: unknown target " + target_gene);
    Design d;
    d.x = Matrix(m.n_cells(), tfs.size());
    d.y.resize(m.n_cells());
    std::span<const double> target_row = m.values.row(*t);
    for (std::size_t c = 0; c < m.n_cells(); ++c) d.y[c] = target_row[c];
    for (std::size_t j = 0; j < tfs.size(); ++j) {
        auto g = m.find_gene(tfs.names[j]);
        if (!g) throw std::invalid_argument("build_design: unknown TF " + tfs.names[j]);
        std::span<const double> row = m.values.row(*g);
        for (std::size_t c = 0; c < m.n_cells(); ++c) d.x(c, j) = row[c];
    }
    return d;
}

// ---- file formats ----
// Expression TSV: header "gene<TAB>cell ids...", one gene row per line.
// TF list: one identifier per line.

inline void save_expression_tsv(const ExpressionMatrix& m, const std::string& path) {
    TsvWriter w(path);
    w.field(std::string("gene"));
    for (const auto& c : m.cell_ids) w.field(c);
    w.endrow();
    for (std::size_t g = 0; g < m.n_genes(); ++g) {
        w.field(m.gene_ids[g]);
        std::span<const double> row = m.values.row(g);
        for (double v : row) w.field(v);
        w.endrow();
    }
}

inline ExpressionMatrix load_expression_tsv(const std::string& path, int condition) {
    auto rows = read_tsv(path);
    if (rows.size() < 2) throw std::runtime_error("expression file too short: " + path);
    ExpressionMatrix m;
    m.condition = condition;
    m.cell_ids.assign(rows[0].begin() + 1, rows[0].end());
    std::size_t n_cells = m.cell_ids.size();
    m.values = Matrix(rows.size() - 1, n_cells);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != n_cells + 1)
            throw std::runtime_error("ragged row in " + path);
        m.gene_ids.push_back(rows[r][0]);
        for (std::size_t c = 0; c < n_cells; ++c)
            m.values(r - 1, c) = parse_double(rows[r][c + 1], path);
    }
    m.validate();
    return m;
}

inline void save_tf_list(const TfList& tfs, const std::string& path) {
    std::string body;
    for (const auto& n : tfs.names) { body += n; body += '\n'; }
    write_text_file(path, body);
}

inline TfList load_tf_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    TfList tfs;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) tfs.names.push_back(line);
    }
    return tfs;
}

} // namespace cimla
