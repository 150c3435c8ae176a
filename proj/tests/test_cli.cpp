#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "cimla/cli.hpp"

using namespace cimla;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) {
        path = fs::temp_directory_path() / name;
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2);
}

json tiny_sim_config(const std::string& out, std::uint64_t seed) {
    json cfg;
    cfg["genes"] = 18;
    cfg["mrs"] = 4;
    cfg["regulators"] = 6;
    cfg["edges"] = 40;
    cfg["shared_fraction"] = 0.8;
    cfg["mode"] = "low";
    cfg["cells"] = 120;
    cfg["noise_scale"] = 0.4;
    cfg["seed"] = seed;
    cfg["out"] = out;
    return cfg;
}

json tiny_run_config(const std::string& data_dir, const std::string& out, std::uint64_t seed) {
    json cfg;
    cfg["case"] = data_dir + "/case.tsv";
    cfg["control"] = data_dir + "/control.tsv";
    cfg["tf_list"] = data_dir + "/tf_list.txt";
    cfg["targets"] = data_dir + "/targets.txt";
    cfg["out"] = out;
    cfg["seed"] = seed;
    cfg["forest_grid"] = json::array({{{"n_trees", 10}, {"max_depth", 5}, {"max_features", 6}}});
    cfg["attribution"] = {{"estimator", "exact"}, {"background_rows", 16}, {"max_samples", 40}};
    return cfg;
}

} // namespace

TEST_CASE("simulate writes the dataset bundle and manifest", "[cli]") {
    TempDir dir("cimla_cli_sim");
    json cfg = tiny_sim_config(dir.str() + "/data", 5);
    write_json(dir.str() + "/sim.json", cfg);
    REQUIRE(cli::dispatch({"simulate", "--config", dir.str() + "/sim.json"}) == 0);
    for (const char* f : {"case.tsv", "control.tsv", "grn_case.tsv", "grn_control.tsv",
                          "truth.tsv", "tf_list.txt", "targets.txt", "mr_case.tsv",
                          "mr_control.tsv", "manifest.json"})
        REQUIRE(fs::exists(dir.path / "data" / f));
    json manifest = load_json_file(dir.str() + "/data/manifest.json");
    REQUIRE(manifest["command"] == "simulate");
    REQUIRE(manifest["seed"] == 5);
    REQUIRE(manifest["config"].contains("realized_shared_fraction"));
}

TEST_CASE("simulate at fraction 1 emits an empty truth file", "[cli]") {
    TempDir dir("cimla_cli_sim1");
    json cfg = tiny_sim_config(dir.str() + "/data", 7);
    cfg["shared_fraction"] = 1.0;
    write_json(dir.str() + "/sim.json", cfg);
    REQUIRE(cli::dispatch({"simulate", "--config", dir.str() + "/sim.json"}) == 0);
    DgrnTruth truth = load_truth_tsv(dir.str() + "/data/truth.tsv");
    REQUIRE(truth.differential_edges.empty());
}

TEST_CASE("simulate is byte-identical under a repeated seed", "[cli]") {
    TempDir dir("cimla_cli_simrep");
    for (const char* sub : {"a", "b"}) {
        json cfg = tiny_sim_config(dir.str() + "/" + sub, 11);
        write_json(dir.str() + "/sim.json", cfg);
        REQUIRE(cli::dispatch({"simulate", "--config", dir.str() + "/sim.json"}) == 0);
    }
    for (const char* f : {"case.tsv", "control.tsv", "grn_case.tsv", "truth.tsv"})
        REQUIRE(read_text_file(dir.str() + "/a/" + f) == read_text_file(dir.str() + "/b/" + f));
}

TEST_CASE("run produces score tables, rankings and a summary", "[cli]") {
    TempDir dir("cimla_cli_run");
    write_json(dir.str() + "/sim.json", tiny_sim_config(dir.str() + "/data", 13));
    REQUIRE(cli::dispatch({"simulate", "--config", dir.str() + "/sim.json"}) == 0);
    write_json(dir.str() + "/run.json", tiny_run_config(dir.str() + "/data", dir.str() + "/out", 17));
    REQUIRE(cli::dispatch({"run", "--config", dir.str() + "/run.json"}) == 0);
    REQUIRE(fs::exists(dir.path / "out/scores.tsv"));
    REQUIRE(fs::exists(dir.path / "out/ranked_global.tsv"));
    REQUIRE(fs::exists(dir.path / "out/ranked_per_gene.tsv"));
    REQUIRE(fs::exists(dir.path / "out/summary.json"));
    REQUIRE(fs::exists(dir.path / "out/manifest.json"));

    // 6 TFs x 14 non-MR targets, minus self-pairs for TFs that are targets
    // and minus any genes skipped as flat
    auto rows = read_tsv(dir.str() + "/out/scores.tsv");
    TfList tfs = load_tf_list(dir.str() + "/data/tf_list.txt");
    TfList targets = load_tf_list(dir.str() + "/data/targets.txt");
    json summary = load_json_file(dir.str() + "/out/summary.json");
    std::set<std::string> skipped;
    for (const auto& s : summary["skipped"]) skipped.insert(s["gene"].get<std::string>());
    std::size_t expected = 0;
    for (const auto& t : targets.names) {
        if (skipped.count(t)) continue;
        for (const auto& tf : tfs.names) expected += (tf != t);
    }
    REQUIRE(rows.size() == expected + 1);   // header
}

TEST_CASE("run is byte-deterministic across runs and worker counts", "[cli]") {
    TempDir dir("cimla_cli_det");
    write_json(dir.str() + "/sim.json", tiny_sim_config(dir.str() + "/data", 19));
    REQUIRE(cli::dispatch({"simulate", "--config", dir.str() + "/sim.json"}) == 0);
    json base = tiny_run_config(dir.str() + "/data", dir.str() + "/o1", 23);
    write_json(dir.str() + "/r1.json", base);
    base["out"] = dir.str() + "/o2";
    base["workers"] = 4;
    write_json(dir.str() + "/r2.json", base);
    REQUIRE(cli::dispatch({"run", "--config", dir.str() + "/r1.json"}) == 0);
    REQUIRE(cli::dispatch({"run", "--config", dir.str() + "/r2.json"}) == 0);
    REQUIRE(read_text_file(dir.str() + "/o1/scores.tsv") ==
            read_text_file(dir.str() + "/o2/scores.tsv"));
}

TEST_CASE("baseline methods produce full rankings; genie3 reuses its cache", "[cli]") {
    TempDir dir("cimla_cli_base");
    write_json(dir.str() + "/sim.json", tiny_sim_config(dir.str() + "/data", 29));
    REQUIRE(cli::dispatch({"simulate", "--config", dir.str() + "/sim.json"}) == 0);
    json cfg = tiny_run_config(dir.str() + "/data", dir.str() + "/out", 31);
    write_json(dir.str() + "/run.json", cfg);

    REQUIRE(cli::dispatch({"baseline", "--config", dir.str() + "/run.json", "--method",
                           "zscore-pearson"}) == 0);
    RankedEdgeList z = load_ranked_edges(dir.str() + "/out/ranked_zscore-pearson.tsv");
    TfList tfs = load_tf_list(dir.str() + "/data/tf_list.txt");
    TfList targets = load_tf_list(dir.str() + "/data/targets.txt");
    std::size_t expected = 0;
    for (const auto& t : targets.names)
        for (const auto& tf : tfs.names) expected += (tf != t);
    REQUIRE(z.edges.size() == expected);

    REQUIRE(cli::dispatch({"baseline", "--config", dir.str() + "/run.json", "--method",
                           "genie3-diff"}) == 0);
    auto first = load_ranked_edges(dir.str() + "/out/ranked_genie3-diff.tsv");
    json manifest1 = load_json_file(dir.str() + "/out/manifest.json");
    REQUIRE(manifest1["config"]["cache_hits"] == 0);
    // second invocation hits the forest cache and reproduces the ranking
    REQUIRE(cli::dispatch({"baseline", "--config", dir.str() + "/run.json", "--method",
                           "genie3-diff"}) == 0);
    json manifest2 = load_json_file(dir.str() + "/out/manifest.json");
    REQUIRE(manifest2["config"]["cache_hits"] > 0);
    auto second = load_ranked_edges(dir.str() + "/out/ranked_genie3-diff.tsv");
    REQUIRE(first.edges.size() == second.edges.size());
    for (std::size_t i = 0; i < first.edges.size(); ++i)
        REQUIRE(first.edges[i].score == second.edges[i].score);

    REQUIRE(cli::dispatch({"baseline", "--config", dir.str() + "/run.json", "--method",
                           "nonsense"}) == 2);
}

TEST_CASE("eval scores a perfect ranking at auroc 1", "[cli]") {
    TempDir dir("cimla_cli_eval");
    // hand-made universe of 6 pairs, 2 positives ranked on top
    RankedEdgeList ranking;
    for (int i = 0; i < 6; ++i)
        ranking.edges.push_back({"TF" + std::to_string(i), "G", 6.0 - i});
    save_ranked_edges(ranking, dir.str() + "/ranking.tsv", "test");
    DgrnTruth truth;
    truth.differential_edges = {{"TF0", "G"}, {"TF1", "G"}};
    save_truth_tsv(truth, dir.str() + "/truth.tsv");
    REQUIRE(cli::dispatch({"eval", "--ranking", dir.str() + "/ranking.tsv", "--truth",
                           dir.str() + "/truth.tsv", "--out", dir.str() + "/report",
                           "--per-gene", "--plots"}) == 0);
    std::string report = read_text_file(dir.str() + "/report/report.txt");
    REQUIRE(report.find("auroc\t1") != std::string::npos);
    REQUIRE(fs::exists(dir.path / "report/per_gene.tsv"));
    REQUIRE(fs::exists(dir.path / "report/roc.svg"));
    REQUIRE(fs::exists(dir.path / "report/pr.svg"));

    REQUIRE(cli::dispatch({"eval", "--ranking", dir.str() + "/ranking.tsv", "--truth",
                           dir.str() + "/missing.tsv"}) == 1);
}

TEST_CASE("bench emits one row per cell and resumes from finished cells", "[cli]") {
    TempDir dir("cimla_cli_bench");
    json cfg;
    cfg["seed"] = 37;
    cfg["out"] = dir.str() + "/bench";
    cfg["sim"] = {{"genes", 16},    {"mrs", 4},        {"regulators", 6}, {"edges", 34},
                  {"cells", 90},    {"noise_scale", 0.4}};
    cfg["fractions"] = {0.7, 0.9};
    cfg["modes"] = {"low", "high"};
    cfg["dropout_levels"] = {0.0};
    cfg["seeds"] = {1, 2, 3};
    cfg["methods"] = {"dcorr", "zscore-spearman"};
    cfg["run"] = {{"forest_grid", json::array({{{"n_trees", 8}, {"max_depth", 4}}})},
                  {"attribution",
                   {{"estimator", "exact"}, {"background_rows", 8}, {"max_samples", 20}}}};
    write_json(dir.str() + "/bench.json", cfg);
    REQUIRE(cli::dispatch({"bench", "--config", dir.str() + "/bench.json"}) == 0);
    auto rows = read_tsv(dir.str() + "/bench/results.tsv");
    REQUIRE(rows.size() == 1 + 2 * 2 * 3 * 2);   // header + fractions x modes x seeds x methods

    // rerun: all cells cached, results identical
    std::string before = read_text_file(dir.str() + "/bench/results.tsv");
    REQUIRE(cli::dispatch({"bench", "--config", dir.str() + "/bench.json"}) == 0);
    REQUIRE(read_text_file(dir.str() + "/bench/results.tsv") == before);
}

TEST_CASE("oracle verify exits zero on the healthy corpus", "[cli]") {
    REQUIRE(cli::dispatch({"oracle", "verify", "--n-random", "5", "--n-equiv", "2", "--seed",
                           "3", "--fixtures", "share/scm_fixtures"}) == 0);
}

TEST_CASE("run config without mandatory seed fails cleanly", "[cli]") {
    TempDir dir("cimla_cli_noseed");
    json cfg;
    cfg["out"] = dir.str();
    write_json(dir.str() + "/bad.json", cfg);
    REQUIRE(cli::dispatch({"run", "--config", dir.str() + "/bad.json"}) == 1);
}
