#pragma once
// End-to-end CIMLA runs. Per target gene: split each condition, standardize
// with train statistics, decorrelate the self feature, fit one model per
// condition, attribute the case samples under both models, take the
// per-sample delta and aggregate it to Lambda per TF. The background
// threshold reruns the same pipeline on label-shuffled data and keeps the
// per-gene maximum.
//
// Genes are independent units of work; every stochastic choice inside a
// gene derives from a seed labeled by (gene, condition), so results are
// identical for any worker count.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cimla/differential.hpp"
#include "cimla/evaluation.hpp"
#include "cimla/expression.hpp"
#include "cimla/forest.hpp"
#include "cimla/mlp.hpp"
#include "cimla/shapley.hpp"
#include "cimla/threading.hpp"

namespace cimla {

struct AttrOptions {
    std::string estimator = "sampled";     // "exact" | "sampled"
    int n_permutations = 64;
    int exact_limit = 15;
    std::size_t background_rows = 256;     // background = train split of the matching condition
    std::string sample_source = "train";   // "train" | "all" (samples always come from condition 1)
    std::size_t max_samples = 0;           // 0 = use every available sample
    bool batched = true;
};

struct RunOptions {
    std::string model_kind = "forest";     // "forest" | "mlp"
    std::vector<ForestHyper> forest_grid = default_forest_grid();
    int cv_folds = 3;
    MlpHyper mlp;
    double train_fraction = 0.8;
    AttrOptions attr;
    bool background_threshold = false;
    int n_shuffles = 1;
    bool reliable_filter = false;          // drop genes with train/test R^2 below the gate
    double reliable_r2 = 0.5;
    int workers = 1;

    static std::vector<ForestHyper> default_forest_grid() {
        // n_trees x max_depth x max_features; max_features resolved per gene
        std::vector<ForestHyper> grid;
        for (int trees : {100, 300})
            for (int depth : {8, 16, -1})
                for (int feat_mode : {0, 1}) {
                    ForestHyper h;
                    h.n_trees = trees;
                    h.max_depth = depth;
                    h.max_features = feat_mode == 0 ? -1 : -2;   // -1: sqrt(m), -2: m/3
                    grid.push_back(h);
                }
        return grid;
    }
};

struct GeneRunResult {
    std::string gene;
    std::vector<double> lambda;            // per TF, aligned with the TF list
    std::vector<double> mean_abs;          // comparison aggregation
    std::optional<double> background_max;
    TrainReport report_case, report_control;
    bool skipped = false;
    std::string skip_reason;
};

namespace pipeline_detail {

struct ConditionData {
    Design train;
    Design test;
    Design all;
};

// One condition's design matrices: split columns, standardize with the
// train statistics, decorrelate the self feature across all cells.
inline ConditionData prepare_condition(const ExpressionMatrix& raw, const TfList& tfs,
                                       const std::string& gene, double train_fraction, Rng rng,
                                       bool& target_flat) {
    auto [train_cells, test_cells] = split_train_test(raw, train_fraction, rng.child("split"));
    // indices of the train cells inside the full matrix
    std::map<std::string, std::size_t> pos;
    for (std::size_t c = 0; c < raw.n_cells(); ++c) pos[raw.cell_ids[c]] = c;
    std::vector<std::size_t> train_idx;
    train_idx.reserve(train_cells.n_cells());
    for (const auto& id : train_cells.cell_ids) train_idx.push_back(pos.at(id));

    StandardizeStats stats = row_stats(raw, train_idx);
    auto g = raw.find_gene(gene);
    target_flat = g && stats.flagged[*g];

    ExpressionMatrix standardized = apply_standardize(raw, stats);
    standardized = decorrelate_self_feature(standardized, gene, tfs, rng.child("decorrelate"));

    std::vector<std::size_t> test_idx;
    test_idx.reserve(test_cells.n_cells());
    for (const auto& id : test_cells.cell_ids) test_idx.push_back(pos.at(id));

    ConditionData out;
    out.all = build_design(standardized, tfs, gene);
    out.train.x = out.all.x.select_rows(train_idx);
    out.train.y.reserve(train_idx.size());
    for (std::size_t i : train_idx) out.train.y.push_back(out.all.y[i]);
    out.test.x = out.all.x.select_rows(test_idx);
    for (std::size_t i : test_idx) out.test.y.push_back(out.all.y[i]);
    return out;
}

inline BackgroundSet make_background(const Design& train, std::size_t max_rows, Rng rng) {
    if (max_rows == 0 || train.x.rows() <= max_rows) return BackgroundSet{train.x};
    std::vector<std::size_t> keep = rng.sample_without_replacement(train.x.rows(), max_rows);
    std::sort(keep.begin(), keep.end());
    return BackgroundSet{train.x.select_rows(keep)};
}

inline Matrix attribution_samples(const ConditionData& case_data, const AttrOptions& attr, Rng rng) {
    const Design& source = attr.sample_source == "all" ? case_data.all : case_data.train;
    if (attr.max_samples == 0 || source.x.rows() <= attr.max_samples) return source.x;
    std::vector<std::size_t> keep = rng.sample_without_replacement(source.x.rows(), attr.max_samples);
    std::sort(keep.begin(), keep.end());
    return source.x.select_rows(keep);
}

template <Predictor M>
Matrix attribute(const M& model, const Matrix& samples, const BackgroundSet& bg,
                 const AttrOptions& attr, Rng rng) {
    AttributionConfig cfg;
    cfg.estimator = attr.estimator == "exact" ? AttributionConfig::Estimator::exact
                                              : AttributionConfig::Estimator::sampled;
    cfg.n_permutations = attr.n_permutations;
    cfg.exact_limit = attr.exact_limit;
    cfg.batched = attr.batched;
    cfg.workers = 1;   // parallelism lives at the gene level
    return attribute_dataset(model, samples, bg, cfg, rng).first;
}

} // namespace pipeline_detail

// The per-gene unit of work shared by the real run and the shuffled
// background runs. `rng` must already be labeled with the run context.
inline GeneRunResult run_single_gene(const ExpressionMatrix& d_case,
                                     const ExpressionMatrix& d_control, const TfList& tfs,
                                     const std::string& gene, const RunOptions& opts, Rng rng) {
    GeneRunResult result;
    result.gene = gene;
    try {
        bool flat_case = false, flat_control = false;
        pipeline_detail::ConditionData case_data = pipeline_detail::prepare_condition(
            d_case, tfs, gene, opts.train_fraction, rng.child("case"), flat_case);
        pipeline_detail::ConditionData control_data = pipeline_detail::prepare_condition(
            d_control, tfs, gene, opts.train_fraction, rng.child("control"), flat_control);
        if (flat_case || flat_control) {
            result.skipped = true;
            result.skip_reason = "zero-variance target";
            return result;
        }

        Rng attr_rng = rng.child("attribution");   // shared by both conditions on purpose
        BackgroundSet bg_case = pipeline_detail::make_background(
            case_data.train, opts.attr.background_rows, rng.child("case").child("background"));
        BackgroundSet bg_control = pipeline_detail::make_background(
            control_data.train, opts.attr.background_rows, rng.child("control").child("background"));
        Matrix samples =
            pipeline_detail::attribution_samples(case_data, opts.attr, rng.child("samples"));

        Matrix attr_case, attr_control;
        if (opts.model_kind == "mlp") {
            auto [model_case, rep_case] =
                fit_mlp(case_data.train, opts.mlp, rng.child("case").child("fit"), &case_data.test);
            auto [model_control, rep_control] = fit_mlp(
                control_data.train, opts.mlp, rng.child("control").child("fit"), &control_data.test);
            result.report_case = rep_case;
            result.report_control = rep_control;
            attr_case = pipeline_detail::attribute(model_case, samples, bg_case, opts.attr, attr_rng);
            attr_control =
                pipeline_detail::attribute(model_control, samples, bg_control, opts.attr, attr_rng);
        } else {
            // resolve the m/3 feature-mode placeholder against this gene's m
            std::vector<ForestHyper> grid = opts.forest_grid;
            for (auto& h : grid)
                if (h.max_features == -2)
                    h.max_features = std::max<int>(1, static_cast<int>(tfs.size()) / 3);
            auto [model_case, rep_case] = fit_forest(case_data.train, grid, opts.cv_folds,
                                                     rng.child("case").child("fit"), &case_data.test);
            auto [model_control, rep_control] =
                fit_forest(control_data.train, grid, opts.cv_folds,
                           rng.child("control").child("fit"), &control_data.test);
            result.report_case = rep_case;
            result.report_control = rep_control;
            attr_case = pipeline_detail::attribute(model_case, samples, bg_case, opts.attr, attr_rng);
            attr_control =
                pipeline_detail::attribute(model_control, samples, bg_control, opts.attr, attr_rng);
        }

        if (opts.reliable_filter) {
            auto ok = [&](const TrainReport& r) {
                return r.r2_train >= opts.reliable_r2 && r.r2_test >= opts.reliable_r2;
            };
            if (!ok(result.report_case) || !ok(result.report_control)) {
                result.skipped = true;
                result.skip_reason = "below reliability gate";
                return result;
            }
        }

        Matrix delta = local_delta(attr_case, attr_control);
        result.lambda = aggregate_rms(delta);
        result.mean_abs = aggregate_mean_abs(delta);
    } catch (const std::exception& e) {
        result.skipped = true;
        result.skip_reason = e.what();
    }
    return result;
}

struct CimlaRun {
    CimlaScoreTable table;
    std::vector<GeneRunResult> genes;
    std::size_t n_skipped = 0;
};

// Full run over a target list, with the optional shuffle-based background
// threshold (max Lambda over TFs and shuffles, per gene).
inline CimlaRun run_cimla(const ExpressionMatrix& d_case, const ExpressionMatrix& d_control,
                          const TfList& tfs, const std::vector<std::string>& targets,
                          const RunOptions& opts, std::uint64_t seed) {
    tfs.validate_against(d_case);
    tfs.validate_against(d_control);
    Rng root(seed);
    CimlaRun run;
    run.genes.resize(targets.size());

    parallel_for(targets.size(), opts.workers, [&](std::size_t g) {
        run.genes[g] = run_single_gene(d_case, d_control, tfs, targets[g], opts,
                                       root.child("gene:" + targets[g]).child("real"));
    });

    std::vector<std::optional<double>> thresholds(targets.size());
    if (opts.background_threshold) {
        for (int s = 0; s < opts.n_shuffles; ++s) {
            auto [shuffled_case, shuffled_control] = shuffle_condition_labels(
                d_case, d_control, root.child("shuffle", static_cast<std::uint64_t>(s)));
            std::vector<GeneRunResult> null_results(targets.size());
            parallel_for(targets.size(), opts.workers, [&](std::size_t g) {
                null_results[g] = run_single_gene(
                    shuffled_case, shuffled_control, tfs, targets[g], opts,
                    root.child("gene:" + targets[g]).child("null", static_cast<std::uint64_t>(s)));
            });
            for (std::size_t g = 0; g < targets.size(); ++g) {
                if (null_results[g].skipped) continue;
                double max_lambda = 0.0;
                for (double v : null_results[g].lambda) max_lambda = std::max(max_lambda, v);
                if (!thresholds[g] || max_lambda > *thresholds[g]) thresholds[g] = max_lambda;
            }
        }
    }

    for (std::size_t g = 0; g < targets.size(); ++g) {
        GeneRunResult& r = run.genes[g];
        if (r.skipped) {
            ++run.n_skipped;
            continue;
        }
        r.background_max = thresholds[g];
        // the decorrelated self feature is meaningless by construction;
        // drop it from the scored pairs
        std::vector<std::string> names;
        std::vector<double> lambda;
        for (std::size_t j = 0; j < tfs.size(); ++j) {
            if (tfs.names[j] == r.gene) continue;
            names.push_back(tfs.names[j]);
            lambda.push_back(r.lambda[j]);
        }
        auto rows = score_gene(r.gene, names, lambda, r.background_max, tfs.size());
        run.table.rows.insert(run.table.rows.end(), rows.begin(), rows.end());
    }
    return run;
}

// Global ranking: every scored pair ordered by lambda. Per-gene ranking:
// ordered by within-gene rank (the -log(r/|TFs|) scale), lambda breaking
// ties across genes.
inline RankedEdgeList global_ranking(const CimlaScoreTable& table) {
    RankedEdgeList list;
    for (const auto& r : table.rows) list.edges.push_back({r.tf, r.gene, r.lambda});
    list.sort_descending();
    return list;
}

inline RankedEdgeList per_gene_ranking(const CimlaScoreTable& table, std::size_t n_tfs) {
    std::vector<const CimlaScoreRow*> rows;
    for (const auto& r : table.rows) rows.push_back(&r);
    std::sort(rows.begin(), rows.end(), [&](const CimlaScoreRow* a, const CimlaScoreRow* b) {
        if (a->rank != b->rank) return a->rank < b->rank;
        if (a->lambda != b->lambda) return a->lambda > b->lambda;
        if (a->tf != b->tf) return a->tf < b->tf;
        return a->gene < b->gene;
    });
    RankedEdgeList list;
    for (const CimlaScoreRow* r : rows)
        list.edges.push_back({r->tf, r->gene, dgrn_score(r->rank, n_tfs)});
    return list;
}

} // namespace cimla
