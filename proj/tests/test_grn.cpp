#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "cimla/grn.hpp"

using namespace cimla;

namespace {

std::set<std::pair<std::string, std::string>> edge_set(const Grn& g) {
    std::set<std::pair<std::string, std::string>> s;
    for (const auto& e : g.edges) s.insert({e.regulator, e.target});
    return s;
}

} // namespace

TEST_CASE("random_grn produces a valid network of the requested shape", "[grn]") {
    RandomGrnSpec spec;
    spec.n_genes = 50;
    spec.n_mrs = 10;
    spec.n_regulators = 15;
    spec.n_edges = 150;
    Grn g = random_grn(spec, Rng(1));
    REQUIRE(g.genes.size() == 50);
    REQUIRE(g.master_regulators.size() == 10);
    REQUIRE(g.edges.size() == 150);
    REQUIRE(g.regulators().size() <= 15);
    REQUIRE_NOTHROW(g.validate());

    // determinism
    Grn g2 = random_grn(spec, Rng(1));
    REQUIRE(edge_set(g) == edge_set(g2));
}

TEST_CASE("random_grn scales to the reference-network size", "[grn]") {
    RandomGrnSpec spec;
    spec.n_genes = 400;
    spec.n_mrs = 20;
    spec.n_regulators = 37;
    spec.n_edges = 1155;
    Grn g = random_grn(spec, Rng(2));
    REQUIRE_NOTHROW(g.validate());
    REQUIRE(g.edges.size() == 1155);
}

TEST_CASE("fraction 1.0 yields identical subnetworks and an empty truth", "[grn]") {
    RandomGrnSpec spec;
    Grn ref = random_grn(spec, Rng(3));
    auto [g_case, g_control, truth] = subsample_grn_pair(ref, 1.0, Rng(4));
    REQUIRE(edge_set(g_case) == edge_set(ref));
    REQUIRE(edge_set(g_control) == edge_set(ref));
    REQUIRE(truth.differential_edges.empty());
    REQUIRE(truth.shared_fraction == 1.0);
}

TEST_CASE("paper-range fractions are achievable on the reference-size network", "[grn]") {
    RandomGrnSpec spec;
    spec.n_genes = 400;
    spec.n_mrs = 20;
    spec.n_regulators = 37;
    spec.n_edges = 1155;
    Grn ref = random_grn(spec, Rng(5));
    for (double fraction : {0.43, 0.94}) {
        auto [g_case, g_control, truth] = subsample_grn_pair(ref, fraction, Rng(6));
        REQUIRE(std::fabs(truth.shared_fraction - fraction) <= 0.02);
        REQUIRE_NOTHROW(g_case.validate());
        REQUIRE_NOTHROW(g_control.validate());
        // subsets of the reference
        auto ref_edges = edge_set(ref);
        for (const auto& e : edge_set(g_case)) REQUIRE(ref_edges.count(e));
        for (const auto& e : edge_set(g_control)) REQUIRE(ref_edges.count(e));
    }
}

TEST_CASE("truth equals the symmetric difference computed independently", "[grn]") {
    RandomGrnSpec spec;
    spec.n_genes = 60;
    spec.n_mrs = 8;
    spec.n_regulators = 14;
    spec.n_edges = 160;
    Grn ref = random_grn(spec, Rng(7));
    auto [g_case, g_control, truth] = subsample_grn_pair(ref, 0.7, Rng(8));

    // independent set-algebra oracle
    auto ce = edge_set(g_case), ke = edge_set(g_control);
    std::set<std::pair<std::string, std::string>> sym;
    for (const auto& e : ce)
        if (!ke.count(e)) sym.insert(e);
    for (const auto& e : ke)
        if (!ce.count(e)) sym.insert(e);
    std::set<std::pair<std::string, std::string>> reported(truth.differential_edges.begin(),
                                                           truth.differential_edges.end());
    REQUIRE(reported == sym);

    // differential + shared = union of both edge sets (exact identity)
    std::set<std::pair<std::string, std::string>> shared;
    for (const auto& e : ce)
        if (ke.count(e)) shared.insert(e);
    std::set<std::pair<std::string, std::string>> rebuilt = reported;
    rebuilt.insert(shared.begin(), shared.end());
    std::set<std::pair<std::string, std::string>> u = ce;
    u.insert(ke.begin(), ke.end());
    REQUIRE(rebuilt == u);
}

TEST_CASE("every non-MR keeps a regulator in both subnetworks", "[grn]") {
    RandomGrnSpec spec;
    spec.n_genes = 40;
    spec.n_mrs = 6;
    spec.n_regulators = 10;
    spec.n_edges = 90;
    Grn ref = random_grn(spec, Rng(9));
    auto [g_case, g_control, truth] = subsample_grn_pair(ref, 0.5, Rng(10));
    std::set<std::string> mrs(ref.master_regulators.begin(), ref.master_regulators.end());
    for (const Grn* g : {&g_case, &g_control}) {
        auto deg = g->in_degree();
        for (const auto& gene : g->genes)
            if (!mrs.count(gene)) REQUIRE(deg[gene] >= 1);
    }
}

TEST_CASE("infeasible fraction raises a constraint error naming genes", "[grn]") {
    // every non-MR has in-degree exactly 1, so survival forces every edge
    // to be shared; a small target fraction cannot be reached
    RandomGrnSpec spec;
    spec.n_genes = 30;
    spec.n_mrs = 5;
    spec.n_regulators = 8;
    spec.n_edges = 25;   // exactly one in-edge per non-MR
    Grn ref = random_grn(spec, Rng(11));
    REQUIRE_THROWS_WITH(subsample_grn_pair(ref, 0.4, Rng(12)),
                        Catch::Matchers::ContainsSubstring("single-regulator genes"));
}

TEST_CASE("grn cycle and orphan validation", "[grn]") {
    Grn g;
    g.genes = {"A", "B"};
    g.master_regulators = {"A"};
    g.edges.push_back({"A", "B", 1.0, 2.0});
    REQUIRE_NOTHROW(g.validate());

    Grn cyclic = g;
    cyclic.edges.push_back({"B", "A", 1.0, 2.0});
    REQUIRE_THROWS(cyclic.validate());   // MR with incoming edges / cycle

    Grn orphan;
    orphan.genes = {"A", "B", "C"};
    orphan.master_regulators = {"A"};
    orphan.edges.push_back({"A", "B", 1.0, 2.0});
    REQUIRE_THROWS_AS(orphan.validate(), std::invalid_argument);
}

TEST_CASE("grn and truth files round trip", "[grn]") {
    RandomGrnSpec spec;
    spec.n_genes = 25;
    spec.n_mrs = 5;
    spec.n_regulators = 8;
    spec.n_edges = 60;
    Grn ref = random_grn(spec, Rng(13));
    auto dir = std::filesystem::temp_directory_path();
    std::string gpath = dir / "cimla_grn_test.tsv";
    save_grn_tsv(ref, gpath);
    Grn back = load_grn_tsv(gpath);
    REQUIRE(edge_set(back) == edge_set(ref));
    std::set<std::string> mrs_a(ref.master_regulators.begin(), ref.master_regulators.end());
    std::set<std::string> mrs_b(back.master_regulators.begin(), back.master_regulators.end());
    REQUIRE(mrs_a == mrs_b);
    std::filesystem::remove(gpath);

    auto [g_case, g_control, truth] = subsample_grn_pair(ref, 0.8, Rng(14));
    std::string tpath = dir / "cimla_truth_test.tsv";
    save_truth_tsv(truth, tpath);
    DgrnTruth tback = load_truth_tsv(tpath);
    REQUIRE(tback.differential_edges == truth.differential_edges);
    std::filesystem::remove(tpath);
}
