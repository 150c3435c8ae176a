#pragma once
// Steady-state single-cell expression simulator. Transcription of each
// non-MR gene is an additive Hill function of its regulators (clipped at
// zero) with unit linear decay; master regulators produce at their
// cell-type profile rate. Cells are sampled from independent
// Euler-Maruyama trajectories around the deterministic fixed point, with
// multiplicative chemical-Langevin-style noise reflected at zero, followed
// by an optional expression-dependent dropout pass.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/expression.hpp"
#include "cimla/grn.hpp"
#include "cimla/matrix.hpp"
#include "cimla/rng.hpp"

namespace cimla {

struct MrProfileSet {
    int n_cell_types = 1;
    std::vector<std::string> mr_ids;
    Matrix rates;    // n_cell_types x mrs, all entries > 0

    void validate() const {
        if (n_cell_types < 1) throw std::invalid_argument("MrProfileSet: need >= 1 cell type");
        if (rates.rows() != static_cast<std::size_t>(n_cell_types) || rates.cols() != mr_ids.size())
            throw std::invalid_argument("MrProfileSet: shape mismatch");
        for (double v : rates.data())
            if (!(v > 0)) throw std::invalid_argument("MrProfileSet: rates must be positive");
    }
};

struct ConfoundingMode {
    enum class Kind { low, high };
    Kind kind = Kind::low;
    int n_cell_types = 1;
    double case_lo = 1.0, case_hi = 4.0;
    double control_lo = 1.0, control_hi = 4.0;

    // Low confounding: one cell type, one shared sampling range; the same
    // realized profile is reused for both conditions so the two groups
    // differ only through their GRNs.
    static ConfoundingMode low_confounding(double lo = 1.0, double hi = 4.0) {
        ConfoundingMode m;
        m.kind = Kind::low;
        m.n_cell_types = 1;
        m.case_lo = m.control_lo = lo;
        m.case_hi = m.control_hi = hi;
        return m;
    }

    // High confounding: ten cell types whose MR rates come from distinct
    // ranges in case and control, mimicking an unobserved confounder.
    static ConfoundingMode high_confounding(double case_lo = 0.5, double case_hi = 2.5,
                                            double control_lo = 3.0, double control_hi = 6.0) {
        ConfoundingMode m;
        m.kind = Kind::high;
        m.n_cell_types = 10;
        m.case_lo = case_lo;
        m.case_hi = case_hi;
        m.control_lo = control_lo;
        m.control_hi = control_hi;
        return m;
    }

    void validate() const {
        if (kind == Kind::low && n_cell_types != 1)
            throw std::invalid_argument("ConfoundingMode: low confounding requires 1 cell type");
        if (kind == Kind::high && n_cell_types < 2)
            throw std::invalid_argument("ConfoundingMode: high confounding requires several cell types");
        if (!(case_lo > 0 && case_hi > case_lo && control_lo > 0 && control_hi > control_lo))
            throw std::invalid_argument("ConfoundingMode: bad sampling ranges");
    }
};

inline std::pair<MrProfileSet, MrProfileSet>
generate_mr_profiles(const ConfoundingMode& mode, const Grn& grn, Rng rng) {
    mode.validate();
    MrProfileSet p_case, p_control;
    p_case.n_cell_types = p_control.n_cell_types = mode.n_cell_types;
    p_case.mr_ids = p_control.mr_ids = grn.master_regulators;
    std::size_t m = grn.master_regulators.size();
    p_case.rates = Matrix(static_cast<std::size_t>(mode.n_cell_types), m);
    p_control.rates = Matrix(static_cast<std::size_t>(mode.n_cell_types), m);
    Rng rc = rng.child("case"), rk = rng.child("control");
    for (std::size_t t = 0; t < static_cast<std::size_t>(mode.n_cell_types); ++t)
        for (std::size_t j = 0; j < m; ++j) {
            double v = rc.uniform(mode.case_lo, mode.case_hi);
            p_case.rates(t, j) = v;
            p_control.rates(t, j) = mode.kind == ConfoundingMode::Kind::low
                                        ? v
                                        : rk.uniform(mode.control_lo, mode.control_hi);
        }
    p_case.validate();
    p_control.validate();
    return {p_case, p_control};
}

struct SimOptions {
    double dt = 0.01;
    double convergence_tol = 1e-4;    // per-step max change ending the burn-in
    int max_burnin_steps = 100000;
    int noise_steps = 1000;           // noisy equilibration before the sample is taken
};

namespace detail {

inline double hill(double x, double half_max, double coeff) {
    if (x <= 0.0) return 0.0;
    double xn = std::pow(x, coeff);
    double kn = std::pow(half_max, coeff);
    return xn / (kn + xn);
}

struct CompiledGrn {
    std::vector<std::string> genes;                    // topological order
    std::vector<int> mr_profile_col;                   // >=0 for MRs
    struct Edge {
        std::size_t regulator;                          // index in topo order
        double strength;
        double hill_coeff;
        double half_max;
    };
    std::vector<std::vector<Edge>> in_edges;            // per gene
    Matrix steady;                                      // n_cell_types x genes
};

// Deterministic fixed point per cell type, computed in topological order;
// each edge's half-max is half the regulator's mean steady state across
// cell types (so the Hill functions operate in their dynamic range).
inline CompiledGrn compile_grn(const Grn& grn, const MrProfileSet& profiles) {
    CompiledGrn cg;
    cg.genes = grn.topo_order();
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < cg.genes.size(); ++i) pos[cg.genes[i]] = i;
    std::map<std::string, int> mr_col;
    for (std::size_t j = 0; j < profiles.mr_ids.size(); ++j)
        mr_col[profiles.mr_ids[j]] = static_cast<int>(j);
    cg.mr_profile_col.assign(cg.genes.size(), -1);
    for (std::size_t i = 0; i < cg.genes.size(); ++i) {
        auto it = mr_col.find(cg.genes[i]);
        if (it != mr_col.end()) cg.mr_profile_col[i] = it->second;
    }
    for (const auto& mr : grn.master_regulators)
        if (!mr_col.count(mr))
            throw std::invalid_argument("simulate: profile missing master regulator " + mr);

    std::map<std::string, std::vector<GrnEdge>> by_target;
    for (const auto& e : grn.edges) by_target[e.target].push_back(e);

    std::size_t n_types = profiles.rates.rows();
    cg.steady = Matrix(n_types, cg.genes.size());
    cg.in_edges.resize(cg.genes.size());
    for (std::size_t i = 0; i < cg.genes.size(); ++i) {
        int col = cg.mr_profile_col[i];
        if (col >= 0) {
            for (std::size_t t = 0; t < n_types; ++t)
                cg.steady(t, i) = profiles.rates(t, static_cast<std::size_t>(col));
            continue;
        }
        for (const auto& e : by_target[cg.genes[i]]) {
            std::size_t r = pos.at(e.regulator);
            double mean_steady = 0.0;
            for (std::size_t t = 0; t < n_types; ++t) mean_steady += cg.steady(t, r);
            mean_steady /= static_cast<double>(n_types);
            double half = std::max(0.5 * mean_steady, 1e-6);
            cg.in_edges[i].push_back({r, e.strength, e.hill_coeff, half});
        }
        for (std::size_t t = 0; t < n_types; ++t) {
            double prod = 0.0;
            for (const auto& e : cg.in_edges[i])
                prod += e.strength * hill(cg.steady(t, e.regulator), e.half_max, e.hill_coeff);
            cg.steady(t, i) = std::max(prod, 0.0);   // decay rate is 1
        }
    }
    return cg;
}

inline double production(const CompiledGrn& cg, std::size_t gene, std::size_t cell_type,
                         const std::vector<double>& x, const MrProfileSet& profiles) {
    int col = cg.mr_profile_col[gene];
    if (col >= 0) return profiles.rates(cell_type, static_cast<std::size_t>(col));
    double prod = 0.0;
    for (const auto& e : cg.in_edges[gene])
        prod += e.strength * hill(x[e.regulator], e.half_max, e.hill_coeff);
    return std::max(prod, 0.0);
}

} // namespace detail

// One steady-state sample per cell from an independent trajectory. Cells are
// assigned to cell types round-robin. noise_scale = 0 returns the exact
// deterministic fixed point.
inline ExpressionMatrix simulate_expression(const Grn& grn, const MrProfileSet& profiles,
                                            std::size_t n_cells, double noise_scale, Rng rng,
                                            const SimOptions& opt = {}) {
    if (n_cells < 1) throw std::invalid_argument("simulate_expression: need >= 1 cell");
    if (noise_scale < 0) throw std::invalid_argument("simulate_expression: negative noise");
    grn.validate();
    profiles.validate();
    detail::CompiledGrn cg = detail::compile_grn(grn, profiles);
    std::size_t n_genes = cg.genes.size();
    std::size_t n_types = profiles.rates.rows();

    // Deterministic burn-in from the analytic fixed point; normally exits on
    // the first step, but clipped production can require a few iterations.
    Matrix start = cg.steady;
    for (std::size_t t = 0; t < n_types; ++t) {
        std::vector<double> x(start.row(t).begin(), start.row(t).end());
        int step = 0;
        for (; step < opt.max_burnin_steps; ++step) {
            double max_change = 0.0;
            for (std::size_t g = 0; g < n_genes; ++g) {
                double dx = (detail::production(cg, g, t, x, profiles) - x[g]) * opt.dt;
                x[g] = std::max(x[g] + dx, 0.0);
                max_change = std::max(max_change, std::fabs(dx));
            }
            if (max_change < opt.convergence_tol) break;
        }
        if (step >= opt.max_burnin_steps) {
            std::string worst = cg.genes[0];
            throw std::runtime_error("simulate_expression: burn-in did not converge (cell type " +
                                     std::to_string(t) + ", check gene " + worst + ")");
        }
        for (std::size_t g = 0; g < n_genes; ++g) start(t, g) = x[g];
    }

    ExpressionMatrix out;
    out.gene_ids = cg.genes;
    out.values = Matrix(n_genes, n_cells);
    out.cell_ids.reserve(n_cells);
    double sqrt_dt = std::sqrt(opt.dt);
    std::vector<double> x(n_genes);
    for (std::size_t c = 0; c < n_cells; ++c) {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "c%05zu", c);
        out.cell_ids.emplace_back(buf);
        std::size_t t = c % n_types;
        for (std::size_t g = 0; g < n_genes; ++g) x[g] = start(t, g);
        if (noise_scale > 0.0) {
            Rng cr = rng.child("cell", c);
            for (int step = 0; step < opt.noise_steps; ++step) {
                for (std::size_t g = 0; g < n_genes; ++g) {
                    double prod = detail::production(cg, g, t, x, profiles);
                    double drift = (prod - x[g]) * opt.dt;
                    double diffusion =
                        noise_scale * std::sqrt(std::max(prod + x[g], 0.0)) * cr.next_normal() * sqrt_dt;
                    x[g] = std::fabs(x[g] + drift + diffusion);   // reflect at zero
                }
            }
        }
        for (std::size_t g = 0; g < n_genes; ++g) out.values(g, c) = x[g];
    }
    return out;
}

// Zero-inflation with expression-dependent survival. Entry e is zeroed with
// probability sigmoid(shape * (q - percentile(e))); the offset q is found by
// bisection so the mean dropout probability hits the requested level.
inline ExpressionMatrix apply_dropout(const ExpressionMatrix& m, double level, double shape_param,
                                      Rng rng) {
    if (level < 0.0 || level > 0.95) throw std::invalid_argument("apply_dropout: level in [0, 0.95]");
    if (level == 0.0) return m;
    const std::vector<double>& vals = m.values.data();
    std::size_t n = vals.size();

    // midrank percentile of each entry over the whole matrix
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<double> pct(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && vals[order[j]] == vals[order[i]]) ++j;
        double p = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j)) / static_cast<double>(n);
        for (std::size_t k = i; k < j; ++k) pct[order[k]] = p;
        i = j;
    }

    auto mean_prob = [&](double q) {
        double s = 0.0;
        for (double p : pct) s += 1.0 / (1.0 + std::exp(-shape_param * (q - p)));
        return s / static_cast<double>(n);
    };
    double lo = -2.0, hi = 3.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        (mean_prob(mid) < level ? lo : hi) = mid;
    }
    double q = 0.5 * (lo + hi);

    ExpressionMatrix out = m;
    for (std::size_t k = 0; k < n; ++k) {
        double p = 1.0 / (1.0 + std::exp(-shape_param * (q - pct[k])));
        if (rng.bernoulli(p)) out.values.data()[k] = 0.0;
    }
    return out;
}

// ---- MR profile file: `cell_type mr_id rate` ----

inline void save_mr_profiles(const MrProfileSet& p, const std::string& path) {
    TsvWriter w(path);
    w.field(std::string("cell_type")).field(std::string("mr_id")).field(std::string("rate"));
    w.endrow();
    for (std::size_t t = 0; t < p.rates.rows(); ++t)
        for (std::size_t j = 0; j < p.mr_ids.size(); ++j) {
            w.field(t).field(p.mr_ids[j]).field(p.rates(t, j));
            w.endrow();
        }
}

inline MrProfileSet load_mr_profiles(const std::string& path) {
    auto rows = read_tsv(path);
    MrProfileSet p;
    std::map<std::pair<std::size_t, std::string>, double> cells;
    std::size_t max_type = 0;
    std::vector<std::string> mr_order;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (r == 0 && !rows[r].empty() && rows[r][0] == "cell_type") continue;
        if (rows[r].size() != 3) throw std::runtime_error("mr profile file: expected 3 columns");
        auto t = static_cast<std::size_t>(std::stoull(rows[r][0]));
        max_type = std::max(max_type, t);
        if (seen.insert(rows[r][1]).second) mr_order.push_back(rows[r][1]);
        cells[{t, rows[r][1]}] = parse_double(rows[r][2], path);
    }
    p.n_cell_types = static_cast<int>(max_type + 1);
    p.mr_ids = mr_order;
    p.rates = Matrix(max_type + 1, mr_order.size());
    for (std::size_t t = 0; t <= max_type; ++t)
        for (std::size_t j = 0; j < mr_order.size(); ++j) {
            auto it = cells.find({t, mr_order[j]});
            if (it == cells.end()) throw std::runtime_error("mr profile file: missing cell");
            p.rates(t, j) = it->second;
        }
    p.validate();
    return p;
}

} // namespace cimla
