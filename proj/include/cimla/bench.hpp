#pragma once
// Benchmark cells: one simulated dataset pair (GRN pair x confounding mode
// x dropout level x seed) evaluated by the requested dGRN methods. Used by
// the `bench` subcommand and by the acceptance suite.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cimla/baselines.hpp"
#include "cimla/config.hpp"
#include "cimla/evaluation.hpp"
#include "cimla/pipeline.hpp"
#include "cimla/simulate.hpp"

namespace cimla {

struct BenchData {
    Grn reference, grn_case, grn_control;
    DgrnTruth truth;
    ExpressionMatrix d_case, d_control;
    TfList tfs;
    std::vector<std::string> targets;      // non-MR genes
    std::vector<EdgeKey> universe;         // TF x target minus self-pairs
    std::set<EdgeKey> truth_set;
};

// Deterministic dataset for one benchmark cell. The GRN pair depends on
// (spec, fraction, seed); the expression data additionally on mode/dropout.
inline BenchData make_bench_data(const SimSpec& spec, double fraction, const std::string& mode,
                                 double dropout, std::uint64_t seed) {
    Rng root(seed);
    BenchData data;
    data.reference = random_grn(spec.grn, root.child("reference"));
    auto [g_case, g_control, truth] =
        subsample_grn_pair(data.reference, fraction, root.child("subsample"));
    data.grn_case = std::move(g_case);
    data.grn_control = std::move(g_control);
    data.truth = std::move(truth);

    const ConfoundingMode& cm = (mode == "high") ? spec.high : spec.low;
    auto [p_case, p_control] = generate_mr_profiles(cm, data.reference, root.child("profiles"));
    data.d_case = simulate_expression(data.grn_case, p_case, spec.cells, spec.noise_scale,
                                      root.child("sim-case"), spec.dynamics);
    data.d_control = simulate_expression(data.grn_control, p_control, spec.cells, spec.noise_scale,
                                         root.child("sim-control"), spec.dynamics);
    data.d_case.condition = 1;
    data.d_control.condition = 0;
    if (dropout > 0.0) {
        data.d_case = apply_dropout(data.d_case, dropout, spec.dropout_shape, root.child("drop-case"));
        data.d_control =
            apply_dropout(data.d_control, dropout, spec.dropout_shape, root.child("drop-control"));
    }

    data.tfs.names = data.reference.regulators();
    std::set<std::string> mrs(data.reference.master_regulators.begin(),
                              data.reference.master_regulators.end());
    for (const auto& g : data.reference.genes)
        if (!mrs.count(g)) data.targets.push_back(g);
    for (const auto& tf : data.tfs.names)
        for (const auto& t : data.targets)
            if (tf != t) data.universe.emplace_back(tf, t);
    data.truth_set.insert(data.truth.differential_edges.begin(),
                          data.truth.differential_edges.end());
    return data;
}

// Ranked list for one method on one cell. CIMLA methods receive their own
// RunOptions; correlation methods need none.
inline RankedEdgeList bench_ranking(const std::string& method, const BenchData& data,
                                    const RunOptions& forest_opts, const RunOptions& mlp_opts,
                                    std::uint64_t seed) {
    if (method == "cimla-forest" || method == "cimla-mlp") {
        RunOptions opts = (method == "cimla-mlp") ? mlp_opts : forest_opts;
        opts.model_kind = (method == "cimla-mlp") ? "mlp" : "forest";
        CimlaRun run = run_cimla(data.d_case, data.d_control, data.tfs, data.targets, opts, seed);
        return global_ranking(run.table);
    }
    if (method == "zscore-pearson" || method == "zscore-spearman" || method == "dcorr") {
        CorrelationMethod cm = (method == "zscore-spearman") ? CorrelationMethod::spearman
                                                             : CorrelationMethod::pearson;
        CorrelationTable table =
            correlation_tables(data.d_case, data.d_control, data.tfs, data.targets, cm);
        return method == "dcorr" ? delta_correlation_ranking(table) : zscore_diff(table);
    }
    if (method == "genie3-diff") {
        RankedEdgeList list;
        Rng root(seed);
        for (const auto& gene : data.targets) {
            Rng gr = root.child("gene:" + gene);
            bool flat_case = false, flat_control = false;
            auto case_data = pipeline_detail::prepare_condition(
                data.d_case, data.tfs, gene, forest_opts.train_fraction, gr.child("case"), flat_case);
            auto control_data =
                pipeline_detail::prepare_condition(data.d_control, data.tfs, gene,
                                                   forest_opts.train_fraction, gr.child("control"),
                                                   flat_control);
            if (flat_case || flat_control) continue;
            std::vector<ForestHyper> grid = forest_opts.forest_grid;
            for (auto& h : grid)
                if (h.max_features == -2)
                    h.max_features = std::max<int>(1, static_cast<int>(data.tfs.size()) / 3);
            auto [fc, rc] = fit_forest(case_data.train, grid, forest_opts.cv_folds,
                                       gr.child("case").child("fit"));
            auto [f0, r0] = fit_forest(control_data.train, grid, forest_opts.cv_folds,
                                       gr.child("control").child("fit"));
            std::vector<double> diff =
                genie3_diff_gene(fc.feature_importance(), f0.feature_importance());
            for (std::size_t j = 0; j < data.tfs.size(); ++j) {
                if (data.tfs.names[j] == gene) continue;
                list.edges.push_back({data.tfs.names[j], gene, diff[j]});
            }
        }
        list.sort_descending();
        return list;
    }
    throw std::runtime_error("unknown method: " + method);
}

struct MethodMetrics {
    std::string method;
    std::optional<double> auroc, auprc, normalized_auprc;
    std::optional<double> f1_top;
    std::optional<double> median_per_gene_auroc, median_per_gene_nauprc;
};

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline MethodMetrics evaluate_bench_ranking(const std::string& method, const RankedEdgeList& ranking,
                                            const BenchData& data, double top_fraction) {
    MethodMetrics m;
    m.method = method;
    m.auroc = auroc(ranking, data.truth_set, data.universe);
    AuprcResult pr = auprc_normalized(ranking, data.truth_set, data.universe);
    m.auprc = pr.auprc;
    m.normalized_auprc = pr.normalized;
    m.f1_top = f1_score(top_fraction_set(ranking, top_fraction), data.truth_set);
    std::vector<double> pg_auroc, pg_nauprc;
    for (const auto& row : per_gene_eval(ranking, data.truth_set, data.universe)) {
        if (row.skipped) continue;
        pg_auroc.push_back(row.auroc);
        pg_nauprc.push_back(row.normalized_auprc);
    }
    if (!pg_auroc.empty()) {
        m.median_per_gene_auroc = median_of(pg_auroc);
        m.median_per_gene_nauprc = median_of(pg_nauprc);
    }
    return m;
}

// F1-only metrics for the union/intersection combinations of two rankings.
inline MethodMetrics evaluate_bench_combo(const std::string& method, const RankedEdgeList& a,
                                          const RankedEdgeList& b, CombineMode mode,
                                          const BenchData& data, double top_fraction) {
    MethodMetrics m;
    m.method = method;
    m.f1_top = f1_score(combine_rankings(a, b, top_fraction, mode), data.truth_set);
    return m;
}

} // namespace cimla
