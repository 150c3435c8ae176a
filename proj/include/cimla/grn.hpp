#pragma once
// Gene regulatory networks: directed weighted edge lists with designated
// master regulators, a random-DAG generator for benchmark references, and
// the paired-subnetwork sampler that controls the shared-edge fraction
// while keeping every non-MR gene regulated in both subnetworks.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cimla/rng.hpp"
#include "cimla/tsv.hpp"

namespace cimla {

struct GrnEdge {
    std::string regulator;
    std::string target;
    double strength = 0.0;       // signed; negative = repression
    double hill_coeff = 2.0;

    bool operator==(const GrnEdge& o) const {
        return regulator == o.regulator && target == o.target && strength == o.strength &&
               hill_coeff == o.hill_coeff;
    }
};

struct Grn {
    std::vector<std::string> genes;
    std::vector<GrnEdge> edges;
    std::vector<std::string> master_regulators;

    std::vector<std::string> regulators() const {
        std::set<std::string> seen;
        std::vector<std::string> out;
        for (const auto& e : edges)
            if (seen.insert(e.regulator).second) out.push_back(e.regulator);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::map<std::string, std::size_t> in_degree() const {
        std::map<std::string, std::size_t> deg;
        for (const auto& g : genes) deg[g] = 0;
        for (const auto& e : edges) ++deg[e.target];
        return deg;
    }

    // Topological order (MRs first); throws if the edge set has a cycle.
    std::vector<std::string> topo_order() const {
        std::map<std::string, std::size_t> deg = in_degree();
        std::map<std::string, std::vector<std::string>> out_edges;
        for (const auto& e : edges) out_edges[e.regulator].push_back(e.target);
        std::vector<std::string> queue;
        for (const auto& g : genes)
            if (deg[g] == 0) queue.push_back(g);
        std::vector<std::string> order;
        while (!queue.empty()) {
            std::string g = queue.front();
            queue.erase(queue.begin());
            order.push_back(g);
            for (const auto& t : out_edges[g])
                if (--deg[t] == 0) queue.push_back(t);
        }
        if (order.size() != genes.size()) throw std::invalid_argument("Grn: cycle detected");
        return order;
    }

    void validate() const {
        std::set<std::string> gene_set(genes.begin(), genes.end());
        if (gene_set.size() != genes.size()) throw std::invalid_argument("Grn: duplicate gene ids");
        for (const auto& e : edges) {
            if (!gene_set.count(e.regulator) || !gene_set.count(e.target))
                throw std::invalid_argument("Grn: edge references unknown gene");
            if (!(e.hill_coeff > 0)) throw std::invalid_argument("Grn: hill coefficient must be > 0");
        }
        std::map<std::string, std::size_t> deg = in_degree();
        std::set<std::string> mrs(master_regulators.begin(), master_regulators.end());
        for (const auto& mr : mrs) {
            if (!gene_set.count(mr)) throw std::invalid_argument("Grn: unknown master regulator");
            if (deg[mr] != 0)
                throw std::invalid_argument("Grn: master regulator " + mr + " has incoming edges");
        }
        for (const auto& g : genes)
            if (!mrs.count(g) && deg[g] == 0)
                throw std::invalid_argument("Grn: non-MR gene " + g + " has no regulator");
        topo_order();   // throws on cycles
    }
};

struct DgrnTruth {
    std::vector<std::pair<std::string, std::string>> differential_edges;   // (regulator, target)
    double shared_fraction = 1.0;
};

struct RandomGrnSpec {
    int n_genes = 50;
    int n_mrs = 10;
    int n_regulators = 15;         // includes the MRs
    int n_edges = 150;
    double activator_fraction = 0.7;
    double strength_min = 1.0;
    double strength_max = 4.0;
    double hill_coeff = 2.0;
};

// Random regulator-first DAG: the first n_regulators genes (in topological
// position) may carry out-edges, the first n_mrs of those take no in-edges.
// Every non-MR gene gets at least one regulator from strictly earlier
// positions, then extra edges are sprinkled until the budget is met.
inline Grn random_grn(const RandomGrnSpec& spec, Rng rng) {
    if (spec.n_mrs < 1 || spec.n_regulators < spec.n_mrs || spec.n_genes <= spec.n_regulators)
        throw std::invalid_argument("random_grn: need n_mrs <= n_regulators < n_genes");
    int min_edges = spec.n_genes - spec.n_mrs;
    if (spec.n_edges < min_edges)
        throw std::invalid_argument("random_grn: edge budget below one edge per non-MR gene");

    Grn g;
    for (int i = 0; i < spec.n_genes; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "G%03d", i);
        g.genes.emplace_back(buf);
    }
    for (int i = 0; i < spec.n_mrs; ++i) g.master_regulators.push_back(g.genes[static_cast<std::size_t>(i)]);

    auto draw_strength = [&](Rng& r) {
        double mag = r.uniform(spec.strength_min, spec.strength_max);
        return r.bernoulli(spec.activator_fraction) ? mag : -mag;
    };

    std::set<std::pair<int, int>> used;
    auto add_edge = [&](int reg, int tgt, Rng& r) {
        g.edges.push_back({g.genes[static_cast<std::size_t>(reg)], g.genes[static_cast<std::size_t>(tgt)],
                           draw_strength(r), spec.hill_coeff});
        used.insert({reg, tgt});
    };

    // guaranteed coverage: each non-MR gets one regulator from earlier positions
    for (int t = spec.n_mrs; t < spec.n_genes; ++t) {
        int max_reg = std::min(t, spec.n_regulators);   // regulators strictly before t
        int reg = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_reg)));
        add_edge(reg, t, rng);
    }
    // fill the budget with distinct extra edges
    int guard = 0;
    while (static_cast<int>(g.edges.size()) < spec.n_edges) {
        int reg = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_regulators)));
        int lo = std::max(reg + 1, spec.n_mrs);
        if (lo >= spec.n_genes) continue;
        int tgt = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.n_genes - lo)));
        if (used.count({reg, tgt})) {
            if (++guard > 100 * spec.n_edges)
                throw std::invalid_argument("random_grn: edge budget too dense for the gene count");
            continue;
        }
        add_edge(reg, tgt, rng);
    }
    g.validate();
    return g;
}

// Removes reference edges at random to produce a case/control pair sharing
// approximately the target fraction of their edge union. Every non-MR gene
// keeps at least one in-edge on both sides; edges promoted to shared for
// coverage may pull the realized fraction off target, which is an error
// beyond two percentage points.
inline std::tuple<Grn, Grn, DgrnTruth>
subsample_grn_pair(const Grn& reference, double target_shared_fraction, Rng rng) {
    if (!(target_shared_fraction > 0.0 && target_shared_fraction <= 1.0))
        throw std::invalid_argument("subsample_grn_pair: fraction must be in (0, 1]");
    reference.validate();
    std::size_t n_e = reference.edges.size();

    if (target_shared_fraction == 1.0) {
        DgrnTruth truth;
        truth.shared_fraction = 1.0;
        return {reference, reference, truth};
    }

    auto n_shared = static_cast<std::size_t>(
        std::llround(target_shared_fraction * static_cast<double>(n_e)));

    std::set<std::string> mrs(reference.master_regulators.begin(), reference.master_regulators.end());
    std::map<std::string, std::vector<std::size_t>> in_edges;
    for (std::size_t i = 0; i < n_e; ++i) in_edges[reference.edges[i].target].push_back(i);

    // phase 1: the sole in-edge of a single-in-degree gene must stay shared
    // assignment: 0 = shared, 1 = case only, 2 = control only, -1 = undecided
    std::vector<int> side(n_e, -1);
    std::vector<std::string> forced_genes;
    std::size_t forced = 0;
    for (const auto& gene : reference.genes) {
        if (mrs.count(gene)) continue;
        const auto& ins = in_edges[gene];
        if (ins.size() == 1) {
            side[ins.front()] = 0;
            ++forced;
            forced_genes.push_back(gene);
        }
    }
    if (forced > n_shared) {
        std::string genes;
        for (const auto& gname : forced_genes) genes += " " + gname;
        throw std::runtime_error(
            "subsample_grn_pair: cannot reach shared fraction " +
            format_double(target_shared_fraction) + " while keeping genes regulated; " +
            std::to_string(forced) + " edges are forced shared by single-regulator genes:" + genes);
    }

    // phase 2: fill the shared quota from the undecided edges at random
    std::vector<std::size_t> undecided;
    for (std::size_t i = 0; i < n_e; ++i)
        if (side[i] < 0) undecided.push_back(i);
    rng.shuffle(undecided);
    for (std::size_t k = 0; k < n_shared - forced; ++k) side[undecided[k]] = 0;

    // phase 3: split the remainder between the two sides; a gene with no
    // shared in-edge pins its first two private edges to opposite sides
    for (const auto& gene : reference.genes) {
        if (mrs.count(gene)) continue;
        const auto& ins = in_edges[gene];
        bool has_shared = false;
        for (std::size_t i : ins) has_shared |= (side[i] == 0);
        if (has_shared) continue;
        bool first_to_case = rng.bernoulli(0.5);
        side[ins[0]] = first_to_case ? 1 : 2;
        side[ins[1]] = first_to_case ? 2 : 1;
    }
    for (std::size_t i = 0; i < n_e; ++i)
        if (side[i] < 0) side[i] = rng.bernoulli(0.5) ? 1 : 2;

    std::size_t realized_shared = 0;
    for (int s : side) realized_shared += (s == 0);
    double realized = static_cast<double>(realized_shared) / static_cast<double>(n_e);
    if (std::fabs(realized - target_shared_fraction) > 0.02)
        throw std::runtime_error("subsample_grn_pair: realized shared fraction " +
                                 format_double(realized) + " misses the target " +
                                 format_double(target_shared_fraction));

    Grn g_case, g_control;
    g_case.genes = g_control.genes = reference.genes;
    g_case.master_regulators = g_control.master_regulators = reference.master_regulators;
    DgrnTruth truth;
    truth.shared_fraction = realized;
    for (std::size_t i = 0; i < n_e; ++i) {
        const GrnEdge& e = reference.edges[i];
        if (side[i] == 0 || side[i] == 1) g_case.edges.push_back(e);
        if (side[i] == 0 || side[i] == 2) g_control.edges.push_back(e);
        if (side[i] != 0) truth.differential_edges.emplace_back(e.regulator, e.target);
    }
    std::sort(truth.differential_edges.begin(), truth.differential_edges.end());
    g_case.validate();
    g_control.validate();
    return {std::move(g_case), std::move(g_control), std::move(truth)};
}

// ---- files: GRN TSV `regulator target strength hill_coeff`,
//      truth TSV `regulator target`, one differential edge per line ----

inline void save_grn_tsv(const Grn& g, const std::string& path) {
    TsvWriter w(path);
    w.field(std::string("regulator")).field(std::string("target"))
        .field(std::string("strength")).field(std::string("hill_coeff"));
    w.endrow();
    for (const auto& e : g.edges) {
        w.field(e.regulator).field(e.target).field(e.strength).field(e.hill_coeff);
        w.endrow();
    }
}

// A GRN file does not carry the isolated-gene list, so genes and MRs are
// reconstructed from the edges: MRs are regulators with no in-edges.
inline Grn load_grn_tsv(const std::string& path) {
    auto rows = read_tsv(path);
    Grn g;
    std::set<std::string> gene_set;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 0 && !rows[r].empty() && rows[r][0] == "regulator") continue;
        if (rows[r].size() != 4) throw std::runtime_error("grn file: expected 4 columns in " + path);
        GrnEdge e{rows[r][0], rows[r][1], parse_double(rows[r][2], path), parse_double(rows[r][3], path)};
        gene_set.insert(e.regulator);
        gene_set.insert(e.target);
        g.edges.push_back(std::move(e));
    }
    g.genes.assign(gene_set.begin(), gene_set.end());
    std::map<std::string, std::size_t> deg = g.in_degree();
    std::set<std::string> regs;
    for (const auto& e : g.edges) regs.insert(e.regulator);
    for (const auto& gene : g.genes)
        if (regs.count(gene) && deg[gene] == 0) g.master_regulators.push_back(gene);
    g.validate();
    return g;
}

inline void save_truth_tsv(const DgrnTruth& truth, const std::string& path) {
    TsvWriter w(path);
    w.field(std::string("regulator")).field(std::string("target"));
    w.endrow();
    for (const auto& [reg, tgt] : truth.differential_edges) {
        w.field(reg).field(tgt);
        w.endrow();
    }
}

inline DgrnTruth load_truth_tsv(const std::string& path) {
    auto rows = read_tsv(path);
    DgrnTruth truth;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 0 && !rows[r].empty() && rows[r][0] == "regulator") continue;
        if (rows[r].size() < 2) throw std::runtime_error("truth file: short row in " + path);
        truth.differential_edges.emplace_back(rows[r][0], rows[r][1]);
    }
    std::sort(truth.differential_edges.begin(), truth.differential_edges.end());
    return truth;
}

} // namespace cimla
