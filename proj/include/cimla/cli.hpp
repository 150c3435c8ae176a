#pragma once
// Batch command-line front end: simulate | run | baseline | eval | bench |
// oracle. Commands read a JSON config, never mutate their inputs, and leave
// a manifest describing the fully-resolved configuration next to every
// output bundle.

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cimla/bench.hpp"
#include "cimla/config.hpp"
#include "cimla/model_io.hpp"
#include "cimla/oracle.hpp"

namespace cimla::cli {

namespace fs = std::filesystem;

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> workers;
    std::optional<std::string> out;
    std::optional<std::string> model;
};

inline json load_config(const CommonFlags& flags) {
    json cfg = flags.config_path.empty() ? json::object() : load_json_file(flags.config_path);
    if (flags.seed) cfg["seed"] = *flags.seed;
    if (flags.workers) cfg["workers"] = *flags.workers;
    if (flags.out) cfg["out"] = *flags.out;
    if (flags.model) cfg["model"] = *flags.model;
    return cfg;
}

inline std::uint64_t require_seed(const json& cfg) {
    if (!cfg.contains("seed")) throw std::runtime_error("config: 'seed' is mandatory");
    return cfg.at("seed").get<std::uint64_t>();
}

inline std::string require_out(const json& cfg) {
    if (!cfg.contains("out")) throw std::runtime_error("config: 'out' directory is mandatory");
    std::string out = cfg.at("out").get<std::string>();
    fs::create_directories(out);
    return out;
}

inline void require_file(const json& cfg, const std::string& key) {
    if (!cfg.contains(key)) throw std::runtime_error("config: missing '" + key + "'");
    std::string path = cfg.at(key).get<std::string>();
    if (!fs::exists(path)) throw std::runtime_error("config: " + key + " file not found: " + path);
}

// Expression rows come out of the simulator in topological order; files are
// written in the reference gene order for stable diffs.
inline ExpressionMatrix reorder_genes(const ExpressionMatrix& m, const std::vector<std::string>& order) {
    std::vector<std::size_t> rows;
    rows.reserve(order.size());
    for (const auto& g : order) {
        auto idx = m.find_gene(g);
        if (!idx) throw std::runtime_error("reorder_genes: missing " + g);
        rows.push_back(*idx);
    }
    ExpressionMatrix out;
    out.gene_ids = order;
    out.cell_ids = m.cell_ids;
    out.condition = m.condition;
    out.values = m.values.select_rows(rows);
    return out;
}

// ---- simulate ----

inline int cmd_simulate(const json& cfg) {
    std::uint64_t seed = require_seed(cfg);
    std::string out = require_out(cfg);
    json resolved;
    SimSpec spec = sim_spec_from_json(cfg, resolved);
    resolved["seed"] = seed;
    resolved["out"] = out;

    BenchData data = make_bench_data(spec, spec.shared_fraction, spec.mode, spec.dropout, seed);
    save_expression_tsv(reorder_genes(data.d_case, data.reference.genes), out + "/case.tsv");
    save_expression_tsv(reorder_genes(data.d_control, data.reference.genes), out + "/control.tsv");
    save_grn_tsv(data.grn_case, out + "/grn_case.tsv");
    save_grn_tsv(data.grn_control, out + "/grn_control.tsv");
    save_truth_tsv(data.truth, out + "/truth.tsv");
    save_tf_list(data.tfs, out + "/tf_list.txt");
    TfList targets{data.targets};
    save_tf_list(targets, out + "/targets.txt");
    Rng root(seed);
    const ConfoundingMode& cm = (spec.mode == "high") ? spec.high : spec.low;
    auto [p_case, p_control] = generate_mr_profiles(cm, data.reference, root.child("profiles"));
    save_mr_profiles(p_case, out + "/mr_case.tsv");
    save_mr_profiles(p_control, out + "/mr_control.tsv");
    resolved["realized_shared_fraction"] = data.truth.shared_fraction;
    write_manifest(out, "simulate", seed, resolved,
                   {"case.tsv", "control.tsv", "grn_case.tsv", "grn_control.tsv", "truth.tsv",
                    "tf_list.txt", "targets.txt", "mr_case.tsv", "mr_control.tsv"});
    std::cout << "simulate: wrote dataset bundle to " << out << " (shared fraction "
              << format_double(data.truth.shared_fraction) << ")\n";
    return 0;
}

// ---- run ----

struct RunInputs {
    ExpressionMatrix d_case, d_control;
    TfList tfs;
    std::vector<std::string> targets;
};

inline RunInputs load_run_inputs(const json& cfg) {
    require_file(cfg, "case");
    require_file(cfg, "control");
    require_file(cfg, "tf_list");
    RunInputs in;
    in.d_case = load_expression_tsv(cfg.at("case").get<std::string>(), 1);
    in.d_control = load_expression_tsv(cfg.at("control").get<std::string>(), 0);
    in.tfs = load_tf_list(cfg.at("tf_list").get<std::string>());
    if (cfg.contains("targets")) {
        if (cfg.at("targets").is_array())
            in.targets = cfg.at("targets").get<std::vector<std::string>>();
        else {
            require_file(cfg, "targets");
            in.targets = load_tf_list(cfg.at("targets").get<std::string>()).names;
        }
    } else {
        in.targets = in.d_case.gene_ids;
    }
    return in;
}

inline int cmd_run(const json& cfg) {
    std::uint64_t seed = require_seed(cfg);
    std::string out = require_out(cfg);
    json resolved;
    RunOptions opts = run_options_from_json(cfg, resolved);
    RunInputs in = load_run_inputs(cfg);
    resolved["seed"] = seed;
    resolved["out"] = out;
    resolved["case"] = cfg.at("case");
    resolved["control"] = cfg.at("control");
    resolved["tf_list"] = cfg.at("tf_list");
    resolved["n_targets"] = in.targets.size();

    CimlaRun run = run_cimla(in.d_case, in.d_control, in.tfs, in.targets, opts, seed);

    save_score_table(run.table, out + "/scores.tsv");
    save_ranked_edges(global_ranking(run.table), out + "/ranked_global.tsv", "cimla-" + opts.model_kind);
    save_ranked_edges(per_gene_ranking(run.table, in.tfs.size()), out + "/ranked_per_gene.tsv",
                      "cimla-" + opts.model_kind);

    json summary;
    summary["n_targets"] = in.targets.size();
    summary["n_skipped"] = run.n_skipped;
    json skips = json::array();
    for (const auto& g : run.genes)
        if (g.skipped) skips.push_back({{"gene", g.gene}, {"reason", g.skip_reason}});
    summary["skipped"] = skips;
    write_text_file(out + "/summary.json", summary.dump(2) + "\n");
    write_manifest(out, "run", seed, resolved,
                   {"scores.tsv", "ranked_global.tsv", "ranked_per_gene.tsv", "summary.json"});

    for (const auto& g : run.genes)
        if (g.skipped)
            std::cerr << "run: skipped gene " << g.gene << " (" << g.skip_reason << ")\n";
    std::cout << "run: scored " << (in.targets.size() - run.n_skipped) << "/" << in.targets.size()
              << " genes -> " << out << "/scores.tsv\n";
    return run.n_skipped == in.targets.size() ? 1 : 0;
}

// ---- baseline ----

inline int cmd_baseline(const json& cfg, const std::string& method) {
    std::uint64_t seed = require_seed(cfg);
    std::string out = require_out(cfg);
    json resolved;
    RunOptions opts = run_options_from_json(cfg, resolved);
    RunInputs in = load_run_inputs(cfg);
    resolved["seed"] = seed;
    resolved["method"] = method;

    RankedEdgeList list;
    if (method == "zscore-pearson" || method == "zscore-spearman" || method == "dcorr") {
        CorrelationMethod cm = (method == "zscore-spearman") ? CorrelationMethod::spearman
                                                             : CorrelationMethod::pearson;
        CorrelationTable table =
            correlation_tables(in.d_case, in.d_control, in.tfs, in.targets, cm);
        list = (method == "dcorr") ? delta_correlation_ranking(table) : zscore_diff(table);
    } else if (method == "genie3-diff") {
        fs::create_directories(out + "/models");
        Rng root(seed);
        std::size_t cache_hits = 0;
        for (const auto& gene : in.targets) {
            Rng gr = root.child("gene:" + gene);
            std::vector<std::vector<double>> importance(2);
            for (int cond = 0; cond < 2; ++cond) {
                const ExpressionMatrix& d = cond ? in.d_case : in.d_control;
                std::string cache = out + "/models/" + gene + (cond ? "_case" : "_control") + ".forest";
                Rng cr = gr.child(cond ? "case" : "control");
                if (fs::exists(cache)) {
                    importance[cond] = load_forest(cache).feature_importance();
                    ++cache_hits;
                    continue;
                }
                bool flat = false;
                auto prepared = pipeline_detail::prepare_condition(d, in.tfs, gene,
                                                                   opts.train_fraction, cr, flat);
                if (flat) break;
                std::vector<ForestHyper> grid = opts.forest_grid;
                for (auto& h : grid)
                    if (h.max_features == -2)
                        h.max_features = std::max<int>(1, static_cast<int>(in.tfs.size()) / 3);
                auto [forest, report] =
                    fit_forest(prepared.train, grid, opts.cv_folds, cr.child("fit"));
                save_forest(forest, cache);
                importance[cond] = forest.feature_importance();
            }
            if (importance[0].empty() || importance[1].empty()) continue;
            std::vector<double> diff = genie3_diff_gene(importance[1], importance[0]);
            for (std::size_t j = 0; j < in.tfs.size(); ++j) {
                if (in.tfs.names[j] == gene) continue;
                list.edges.push_back({in.tfs.names[j], gene, diff[j]});
            }
        }
        list.sort_descending();
        resolved["cache_hits"] = cache_hits;
        std::cerr << "baseline: genie3-diff reused " << cache_hits << " cached forests\n";
    } else {
        std::cerr << "baseline: unknown method '" << method << "'\n";
        return 2;
    }
    std::string file = "ranked_" + method + ".tsv";
    save_ranked_edges(list, out + "/" + file, method);
    write_manifest(out, "baseline", seed, resolved, {file});
    std::cout << "baseline: " << method << " -> " << out << "/" << file << "\n";
    return 0;
}

// ---- eval ----

struct EvalFlags {
    std::string ranking_path;
    std::string truth_path;
    std::string universe_path;   // optional two-column TSV
    std::string dcorr_path;      // optional tf/gene/dcorr TSV
    std::string out = ".";
    double cutoff = 0.16;
    double top_fraction = 0.10;
    double strata_fraction = 0.05;
    bool per_gene = false;
    bool plots = false;
};

inline void write_curve_svg(const std::string& path, const std::vector<std::pair<double, double>>& pts,
                            const std::string& x_label, const std::string& y_label) {
    const int w = 420, h = 420, margin = 40;
    std::string svg = "<svg xmlns='http://www.w3.org/2000/svg' width='" + std::to_string(w) +
                      "' height='" + std::to_string(h) + "'>\n";
    svg += "<rect width='100%' height='100%' fill='white'/>\n";
    auto sx = [&](double x) { return margin + x * (w - 2 * margin); };
    auto sy = [&](double y) { return h - margin - y * (h - 2 * margin); };
    svg += "<line x1='" + std::to_string(sx(0)) + "' y1='" + std::to_string(sy(0)) + "' x2='" +
           std::to_string(sx(1)) + "' y2='" + std::to_string(sy(0)) + "' stroke='black'/>\n";
    svg += "<line x1='" + std::to_string(sx(0)) + "' y1='" + std::to_string(sy(0)) + "' x2='" +
           std::to_string(sx(0)) + "' y2='" + std::to_string(sy(1)) + "' stroke='black'/>\n";
    svg += "<polyline fill='none' stroke='#3366cc' stroke-width='1.5' points='";
    for (const auto& [x, y] : pts) svg += std::to_string(sx(x)) + "," + std::to_string(sy(y)) + " ";
    svg += "'/>\n";
    svg += "<text x='" + std::to_string(w / 2) + "' y='" + std::to_string(h - 8) + "'>" + x_label +
           "</text>\n";
    svg += "<text x='12' y='" + std::to_string(h / 2) + "' transform='rotate(-90 12 " +
           std::to_string(h / 2) + ")'>" + y_label + "</text>\n</svg>\n";
    write_text_file(path, svg);
}

inline int cmd_eval(const EvalFlags& flags) {
    RankedEdgeList ranking = load_ranked_edges(flags.ranking_path);
    ranking.validate();
    DgrnTruth truth = load_truth_tsv(flags.truth_path);
    std::set<EdgeKey> truth_set(truth.differential_edges.begin(), truth.differential_edges.end());
    std::vector<EdgeKey> universe;
    if (!flags.universe_path.empty()) {
        for (const auto& [reg, tgt] : load_truth_tsv(flags.universe_path).differential_edges)
            universe.emplace_back(reg, tgt);
    } else {
        for (const auto& e : ranking.edges) universe.emplace_back(e.tf, e.gene);
    }
    fs::create_directories(flags.out);

    double roc = auroc(ranking, truth_set, universe);
    AuprcResult pr = auprc_normalized(ranking, truth_set, universe);
    double f1 = f1_score(top_fraction_set(ranking, flags.top_fraction), truth_set);

    std::string report;
    report += "auroc\t" + format_double(roc) + "\n";
    report += "auprc\t" + format_double(pr.auprc) + "\n";
    report += "normalized_auprc\t" + format_double(pr.normalized) + "\n";
    report += "f1_at_fraction\t" + format_double(f1) + "\n";
    report += "top_fraction\t" + format_double(flags.top_fraction) + "\n";
    report += "n_universe\t" + std::to_string(universe.size()) + "\n";
    report += "n_truth\t" + std::to_string(truth_set.size()) + "\n";

    if (!flags.dcorr_path.empty()) {
        std::map<EdgeKey, double> dcorr;
        for (const auto& row : read_tsv(flags.dcorr_path)) {
            if (row.size() < 3 || row[0] == "tf") continue;
            dcorr[{row[0], row[1]}] = parse_double(row[2], flags.dcorr_path);
        }
        StratifiedRates strata = stratified_rates(ranking, flags.strata_fraction, truth_set, dcorr,
                                                  universe, flags.cutoff);
        auto emit = [&](const char* name, const std::optional<double>& v) {
            report += std::string(name) + "\t" + (v ? format_double(*v) : std::string("NA")) + "\n";
        };
        emit("tpr_low_dcorr", strata.tpr_low);
        emit("fpr_low_dcorr", strata.fpr_low);
        emit("tpr_high_dcorr", strata.tpr_high);
        emit("fpr_high_dcorr", strata.fpr_high);
        report += "dcorr_cutoff\t" + format_double(flags.cutoff) + "\n";
    }
    write_text_file(flags.out + "/report.txt", report);

    if (flags.per_gene) {
        TsvWriter w(flags.out + "/per_gene.tsv");
        w.field(std::string("gene")).field(std::string("auroc")).field(std::string("auprc"))
            .field(std::string("normalized_auprc")).field(std::string("n_pos"))
            .field(std::string("n_neg")).field(std::string("skipped"));
        w.endrow();
        for (const auto& row : per_gene_eval(ranking, truth_set, universe)) {
            w.field(row.gene);
            if (row.skipped)
                w.field(std::string("NA")).field(std::string("NA")).field(std::string("NA"));
            else
                w.field(row.auroc).field(row.auprc).field(row.normalized_auprc);
            w.field(row.n_pos).field(row.n_neg).field(row.skipped ? std::string("1") : std::string("0"));
            w.endrow();
        }
    }

    if (flags.plots) {
        // assemble ROC / PR curves from the aligned universe
        std::vector<std::pair<double, int>> scored;
        std::map<EdgeKey, double> score_map;
        double min_score = 0.0;
        for (const auto& e : ranking.edges) {
            score_map[{e.tf, e.gene}] = e.score;
            min_score = std::min(min_score, e.score);
        }
        for (const auto& key : universe) {
            auto it = score_map.find(key);
            scored.emplace_back(it == score_map.end() ? min_score - 1.0 : it->second,
                                truth_set.count(key) ? 1 : 0);
        }
        std::sort(scored.begin(), scored.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });
        double pos = 0, neg = 0;
        for (const auto& [s, l] : scored) (l ? pos : neg) += 1;
        std::vector<std::pair<double, double>> roc_pts{{0, 0}}, pr_pts;
        double tp = 0, fp = 0;
        for (const auto& [s, l] : scored) {
            (l ? tp : fp) += 1;
            roc_pts.emplace_back(fp / neg, tp / pos);
            pr_pts.emplace_back(tp / pos, tp / (tp + fp));
        }
        write_curve_svg(flags.out + "/roc.svg", roc_pts, "FPR", "TPR");
        write_curve_svg(flags.out + "/pr.svg", pr_pts, "recall", "precision");
    }
    std::cout << read_text_file(flags.out + "/report.txt");
    return 0;
}

// ---- bench ----

inline std::string bench_cell_key(double fraction, const std::string& mode, double dropout,
                                  std::uint64_t seed, const std::string& method) {
    return "f" + format_double(fraction) + "_" + mode + "_d" + format_double(dropout) + "_s" +
           std::to_string(seed) + "_" + method;
}

inline void write_bench_row(TsvWriter& w, double fraction, const std::string& mode, double dropout,
                            std::uint64_t seed, const MethodMetrics& m) {
    auto opt = [&](const std::optional<double>& v) {
        return v && std::isfinite(*v) ? format_double(*v) : std::string("NA");
    };
    w.field(fraction).field(mode).field(dropout).field(std::to_string(seed)).field(m.method);
    w.field(opt(m.auroc)).field(opt(m.auprc)).field(opt(m.normalized_auprc)).field(opt(m.f1_top));
    w.field(opt(m.median_per_gene_auroc)).field(opt(m.median_per_gene_nauprc));
    w.endrow();
}

inline const char* kBenchHeader[] = {"fraction", "mode",      "dropout",       "seed",
                                     "method",   "auroc",     "auprc",         "normalized_auprc",
                                     "f1_top",   "median_pg_auroc", "median_pg_nauprc"};

inline int cmd_bench(const json& cfg) {
    std::uint64_t base_seed = require_seed(cfg);
    std::string out = require_out(cfg);
    fs::create_directories(out + "/cells");

    json resolved;
    json sim_resolved;
    SimSpec spec =
        sim_spec_from_json(cfg.contains("sim") ? cfg.at("sim") : json::object(), sim_resolved);
    resolved["sim"] = sim_resolved;
    auto fractions = cfg.contains("fractions") ? cfg.at("fractions").get<std::vector<double>>()
                                               : std::vector<double>{0.8};
    auto modes = cfg.contains("modes") ? cfg.at("modes").get<std::vector<std::string>>()
                                       : std::vector<std::string>{"low", "high"};
    auto dropouts = cfg.contains("dropout_levels") ? cfg.at("dropout_levels").get<std::vector<double>>()
                                                   : std::vector<double>{0.0};
    auto seeds = cfg.contains("seeds") ? cfg.at("seeds").get<std::vector<std::uint64_t>>()
                                       : std::vector<std::uint64_t>{1, 2, 3};
    auto methods = cfg.contains("methods") ? cfg.at("methods").get<std::vector<std::string>>()
                                           : std::vector<std::string>{"cimla-forest", "zscore-pearson"};
    double top_fraction = cfg.contains("top_fraction") ? cfg.at("top_fraction").get<double>() : 0.10;

    json run_resolved, mlp_resolved;
    RunOptions forest_opts = run_options_from_json(cfg.contains("run") ? cfg.at("run") : json::object(),
                                                   run_resolved);
    RunOptions mlp_opts = run_options_from_json(cfg.contains("run_mlp") ? cfg.at("run_mlp")
                                                : cfg.contains("run") ? cfg.at("run")
                                                                      : json::object(),
                                                mlp_resolved);
    resolved["run"] = run_resolved;
    resolved["run_mlp"] = mlp_resolved;
    resolved["fractions"] = fractions;
    resolved["modes"] = modes;
    resolved["dropout_levels"] = dropouts;
    resolved["seeds"] = seeds;
    resolved["methods"] = methods;
    resolved["top_fraction"] = top_fraction;
    resolved["seed"] = base_seed;

    bool wants_union = false, wants_intersection = false;
    std::vector<std::string> base_methods;
    for (const auto& m : methods) {
        if (m == "cimla-union") wants_union = true;
        else if (m == "cimla-intersection") wants_intersection = true;
        else base_methods.push_back(m);
    }
    if (wants_union || wants_intersection) {
        for (const char* required : {"cimla-forest", "cimla-mlp"})
            if (std::find(base_methods.begin(), base_methods.end(), required) == base_methods.end())
                base_methods.emplace_back(required);
    }

    std::size_t computed = 0, skipped_cells = 0;
    for (double fraction : fractions)
        for (const auto& mode : modes)
            for (double dropout : dropouts)
                for (std::uint64_t seed : seeds) {
                    std::uint64_t cell_seed = Rng(base_seed)
                                                  .child("cell")
                                                  .child(mode, static_cast<std::uint64_t>(fraction * 1000))
                                                  .child("seed", seed)
                                                  .seed();
                    // resumability: one file per (cell, method)
                    std::vector<std::string> todo;
                    bool combos_missing =
                        (wants_union &&
                         !fs::exists(out + "/cells/" +
                                     bench_cell_key(fraction, mode, dropout, seed, "cimla-union") + ".tsv")) ||
                        (wants_intersection &&
                         !fs::exists(out + "/cells/" +
                                     bench_cell_key(fraction, mode, dropout, seed, "cimla-intersection") +
                                     ".tsv"));
                    for (const auto& method : base_methods) {
                        std::string path = out + "/cells/" +
                                           bench_cell_key(fraction, mode, dropout, seed, method) + ".tsv";
                        bool needed_for_combo = combos_missing && (method == "cimla-forest" ||
                                                                   method == "cimla-mlp");
                        if (!fs::exists(path) || needed_for_combo) todo.push_back(method);
                        else ++skipped_cells;
                    }
                    if (todo.empty() && !combos_missing) continue;

                    BenchData data = make_bench_data(spec, fraction, mode, dropout, cell_seed);
                    std::map<std::string, RankedEdgeList> rankings;
                    for (const auto& method : todo) {
                        RankedEdgeList ranking =
                            bench_ranking(method, data, forest_opts, mlp_opts, cell_seed);
                        rankings[method] = ranking;
                        MethodMetrics metrics =
                            evaluate_bench_ranking(method, ranking, data, top_fraction);
                        std::string path = out + "/cells/" +
                                           bench_cell_key(fraction, mode, dropout, seed, method) + ".tsv";
                        TsvWriter w(path);
                        write_bench_row(w, fraction, mode, dropout, seed, metrics);
                        ++computed;
                        std::cerr << "bench: " << bench_cell_key(fraction, mode, dropout, seed, method)
                                  << " done\n";
                    }
                    if (combos_missing) {
                        auto get_ranking = [&](const std::string& m) {
                            auto it = rankings.find(m);
                            if (it != rankings.end()) return it->second;
                            return bench_ranking(m, data, forest_opts, mlp_opts, cell_seed);
                        };
                        RankedEdgeList rf = get_ranking("cimla-forest");
                        RankedEdgeList nn = get_ranking("cimla-mlp");
                        for (const auto& [name, cmode] :
                             std::vector<std::pair<std::string, CombineMode>>{
                                 {"cimla-union", CombineMode::set_union},
                                 {"cimla-intersection", CombineMode::set_intersection}}) {
                            if (name == "cimla-union" && !wants_union) continue;
                            if (name == "cimla-intersection" && !wants_intersection) continue;
                            MethodMetrics metrics =
                                evaluate_bench_combo(name, rf, nn, cmode, data, top_fraction);
                            std::string path = out + "/cells/" +
                                               bench_cell_key(fraction, mode, dropout, seed, name) + ".tsv";
                            TsvWriter w(path);
                            write_bench_row(w, fraction, mode, dropout, seed, metrics);
                            ++computed;
                        }
                    }
                }

    // assemble the long-format table from the per-cell files
    {
        TsvWriter w(out + "/results.tsv");
        for (const char* col : kBenchHeader) w.field(std::string(col));
        w.endrow();
    }
    std::vector<std::string> cell_files;
    for (const auto& entry : fs::directory_iterator(out + "/cells"))
        if (entry.path().extension() == ".tsv") cell_files.push_back(entry.path().string());
    std::sort(cell_files.begin(), cell_files.end());
    {
        std::ofstream results(out + "/results.tsv", std::ios::app);
        for (const auto& f : cell_files) results << read_text_file(f);
    }
    write_manifest(out, "bench", base_seed, resolved, {"results.tsv"});
    std::cout << "bench: " << computed << " cells computed, " << skipped_cells
              << " reused -> " << out << "/results.tsv\n";
    return 0;
}

// ---- oracle ----

inline int cmd_oracle(int n_random, int n_equiv, std::uint64_t seed, const std::string& fixtures_dir) {
    std::vector<std::string> fixture_paths;
    if (!fixtures_dir.empty() && fs::exists(fixtures_dir)) {
        for (const auto& entry : fs::directory_iterator(fixtures_dir))
            if (entry.path().extension() == ".scm") fixture_paths.push_back(entry.path().string());
        std::sort(fixture_paths.begin(), fixture_paths.end());
    }
    OracleReport report = run_oracle_suite(n_random, n_equiv, seed, fixture_paths);
    std::cout << "oracle: lemma1 " << report.lemma1_as_expected << "/" << report.lemma1_checked
              << " as expected\n";
    std::cout << "oracle: lemma2 " << report.lemma2_as_expected << "/" << report.lemma2_checked
              << " as expected\n";
    std::cout << "oracle: max conforming lemma deviation "
              << format_double(report.lemma_max_conforming_deviation) << "\n";
    std::cout << "oracle: equivalence " << report.equivalence_passed << "/"
              << report.equivalence_checked << " fixtures, max deviation "
              << format_double(report.equivalence_max_deviation) << "\n";
    for (const auto& f : report.failures) std::cout << "oracle: FAILURE " << f << "\n";
    return report.all_ok() ? 0 : 1;
}

// ---- dispatch ----

inline int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"cimla: condition-dependent causal feature attribution toolkit"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string method;
    EvalFlags eval_flags;
    int oracle_random = 50, oracle_equiv = 20;
    std::uint64_t oracle_seed = 7;
    std::string fixtures_dir = "share/scm_fixtures";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "JSON config file");
        cmd->add_option("--seed", flags.seed, "seed override");
        cmd->add_option("--workers", flags.workers, "worker count override");
        cmd->add_option("--out", flags.out, "output directory override");
        cmd->add_option("--model", flags.model, "model kind override (forest|mlp)");
    };

    CLI::App* sim = app.add_subcommand("simulate", "generate a case/control dataset bundle");
    add_common(sim);
    CLI::App* run = app.add_subcommand("run", "run the CIMLA pipeline");
    add_common(run);
    CLI::App* baseline = app.add_subcommand("baseline", "run a reference dGRN method");
    add_common(baseline);
    baseline->add_option("--method", method, "zscore-pearson|zscore-spearman|dcorr|genie3-diff")
        ->required();
    CLI::App* bench = app.add_subcommand("bench", "multi-seed benchmark grid");
    add_common(bench);

    CLI::App* eval = app.add_subcommand("eval", "score a ranking against ground truth");
    eval->add_option("--ranking", eval_flags.ranking_path, "ranked edge TSV")->required();
    eval->add_option("--truth", eval_flags.truth_path, "truth TSV")->required();
    eval->add_option("--universe", eval_flags.universe_path, "universe TSV (default: ranking pairs)");
    eval->add_option("--dcorr", eval_flags.dcorr_path, "delta-correlation TSV for stratified rates");
    eval->add_option("--cutoff", eval_flags.cutoff, "delta-correlation cutoff");
    eval->add_option("--top-fraction", eval_flags.top_fraction, "fraction for the F1 set");
    eval->add_option("--out", eval_flags.out, "output directory");
    eval->add_flag("--per-gene", eval_flags.per_gene, "emit per-gene metric table");
    eval->add_flag("--plots", eval_flags.plots, "emit ROC/PR SVG plots");

    CLI::App* oracle = app.add_subcommand("oracle", "do-calculus verification suite");
    CLI::App* verify = oracle->add_subcommand("verify", "run the lemma and equivalence corpus");
    verify->add_option("--fixtures", fixtures_dir, "directory of .scm fixture files");
    verify->add_option("--n-random", oracle_random, "random conforming SCMs per lemma");
    verify->add_option("--n-equiv", oracle_equiv, "equivalence fixtures");
    verify->add_option("--seed", oracle_seed, "corpus seed");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (sim->parsed()) return cmd_simulate(load_config(flags));
        if (run->parsed()) return cmd_run(load_config(flags));
        if (baseline->parsed()) return cmd_baseline(load_config(flags), method);
        if (bench->parsed()) return cmd_bench(load_config(flags));
        if (eval->parsed()) return cmd_eval(eval_flags);
        if (oracle->parsed()) return cmd_oracle(oracle_random, oracle_equiv, oracle_seed, fixtures_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace cimla::cli
