#pragma once
// Discrete structural-causal-model engine. Everything is computed by exact
// enumeration of the joint table, so interventional identities (the two
// do-calculus lemmas, the ATE/LTE definitions, and the equivalence between
// the structure-averaged local effect and the interventional Shapley value)
// can be checked to machine precision on small fixtures.
//
// The mutilated-model semantics of do(.) is truncated factorization: each
// intervened variable's CPT is replaced by a point mass and its incoming
// edges are ignored.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/matrix.hpp"
#include "cimla/rng.hpp"
#include "cimla/shapley.hpp"

namespace cimla {

struct ScmVariable {
    std::string name;
    std::vector<double> domain;        // numeric values, used for expectations
    std::vector<int> parents;          // indices into DiscreteScm::variables
    Matrix cpt;                        // rows: parent assignments (mixed radix, first parent slowest)
};

struct InterventionSpec {
    std::map<int, int> assignments;    // variable index -> domain value index

    void set(int var, int value_index) {
        if (assignments.count(var)) throw std::invalid_argument("InterventionSpec: duplicate variable");
        assignments[var] = value_index;
    }
};

class DiscreteScm {
public:
    std::vector<ScmVariable> variables;
    int outcome = -1;                  // index of Y
    int z_prime = -1;                  // optional latent confounder; never a parent of Y

    std::size_t n_vars() const { return variables.size(); }

    std::size_t state_space() const {
        std::size_t total = 1;
        for (const auto& v : variables) {
            if (total > (std::size_t{10000000} / v.domain.size()) + 1)
                return std::size_t{10000001};
            total *= v.domain.size();
        }
        return total;
    }

    void validate() const {
        if (outcome < 0 || outcome >= static_cast<int>(n_vars()))
            throw std::invalid_argument("DiscreteScm: outcome index out of range");
        for (const auto& v : variables) {
            if (v.domain.empty()) throw std::invalid_argument("DiscreteScm: empty domain");
            std::size_t parent_states = 1;
            for (int p : v.parents) {
                if (p < 0 || p >= static_cast<int>(n_vars()))
                    throw std::invalid_argument("DiscreteScm: parent index out of range");
                parent_states *= variables[static_cast<std::size_t>(p)].domain.size();
            }
            if (v.cpt.rows() != parent_states || v.cpt.cols() != v.domain.size())
                throw std::invalid_argument("DiscreteScm: CPT shape mismatch for " + v.name);
            for (std::size_t r = 0; r < v.cpt.rows(); ++r) {
                double s = 0.0;
                for (std::size_t c = 0; c < v.cpt.cols(); ++c) {
                    if (v.cpt(r, c) < 0) throw std::invalid_argument("DiscreteScm: negative probability");
                    s += v.cpt(r, c);
                }
                if (std::fabs(s - 1.0) > 1e-12)
                    throw std::invalid_argument("DiscreteScm: CPT row of " + v.name + " does not sum to 1");
            }
        }
        if (z_prime >= 0)
            for (int p : variables[static_cast<std::size_t>(outcome)].parents)
                if (p == z_prime)
                    throw std::invalid_argument("DiscreteScm: Z' must not be a parent of the outcome");
        topo_order();   // throws on cycles
    }

    std::vector<int> topo_order() const {
        std::vector<int> in_deg(n_vars(), 0);
        for (const auto& v : variables) in_deg.resize(n_vars());
        std::vector<std::vector<int>> children(n_vars());
        for (std::size_t i = 0; i < n_vars(); ++i)
            for (int p : variables[i].parents) {
                children[static_cast<std::size_t>(p)].push_back(static_cast<int>(i));
                ++in_deg[i];
            }
        std::vector<int> queue, order;
        for (std::size_t i = 0; i < n_vars(); ++i)
            if (in_deg[i] == 0) queue.push_back(static_cast<int>(i));
        while (!queue.empty()) {
            int v = queue.front();
            queue.erase(queue.begin());
            order.push_back(v);
            for (int c : children[static_cast<std::size_t>(v)])
                if (--in_deg[static_cast<std::size_t>(c)] == 0) queue.push_back(c);
        }
        if (order.size() != n_vars()) throw std::invalid_argument("DiscreteScm: cycle detected");
        return order;
    }
};

namespace scm_detail {

// Mixed-radix walker over full assignments (value indices per variable).
inline bool next_assignment(std::vector<int>& a, const DiscreteScm& scm) {
    for (std::size_t i = a.size(); i-- > 0;) {
        if (++a[i] < static_cast<int>(scm.variables[i].domain.size())) return true;
        a[i] = 0;
    }
    return false;
}

inline std::size_t parent_row(const DiscreteScm& scm, std::size_t var, const std::vector<int>& a) {
    std::size_t row = 0;
    for (int p : scm.variables[var].parents)
        row = row * scm.variables[static_cast<std::size_t>(p)].domain.size() +
              static_cast<std::size_t>(a[static_cast<std::size_t>(p)]);
    return row;
}

} // namespace scm_detail

struct JointTable {
    std::vector<std::vector<int>> assignments;   // value indices per variable
    std::vector<double> prob;
};

// Full joint by factorization; optionally under an intervention (truncated
// factorization: intervened variables become point masses).
inline JointTable joint_distribution(const DiscreteScm& scm,
                                     const InterventionSpec& spec = InterventionSpec{}) {
    if (scm.state_space() > 10000000)
        throw std::length_error("joint_distribution: state space exceeds 10^7");
    for (const auto& [var, val] : spec.assignments) {
        if (var < 0 || var >= static_cast<int>(scm.n_vars()))
            throw std::invalid_argument("joint_distribution: bad intervention variable");
        if (val < 0 || val >= static_cast<int>(scm.variables[static_cast<std::size_t>(var)].domain.size()))
            throw std::invalid_argument("joint_distribution: intervention value out of domain");
    }
    JointTable table;
    std::vector<int> a(scm.n_vars(), 0);
    do {
        double p = 1.0;
        for (std::size_t i = 0; i < scm.n_vars() && p > 0.0; ++i) {
            auto it = spec.assignments.find(static_cast<int>(i));
            if (it != spec.assignments.end()) {
                if (a[i] != it->second) p = 0.0;
                continue;   // point mass contributes factor 1 at the pinned value
            }
            p *= scm.variables[i].cpt(scm_detail::parent_row(scm, i, a), static_cast<std::size_t>(a[i]));
        }
        if (p > 0.0) {
            table.assignments.push_back(a);
            table.prob.push_back(p);
        }
    } while (scm_detail::next_assignment(a, scm));
    return table;
}

inline double expectation_under_do(const DiscreteScm& scm, const InterventionSpec& spec,
                                   int outcome_var = -1) {
    if (outcome_var < 0) outcome_var = scm.outcome;
    JointTable t = joint_distribution(scm, spec);
    double e = 0.0;
    const auto& domain = scm.variables[static_cast<std::size_t>(outcome_var)].domain;
    for (std::size_t k = 0; k < t.prob.size(); ++k)
        e += t.prob[k] * domain[static_cast<std::size_t>(t.assignments[k][static_cast<std::size_t>(outcome_var)])];
    return e;
}

// Observational conditional E[Y | evidence]; evidence with zero probability
// is an error (the caller guards).
inline double conditional_expectation(const DiscreteScm& scm, const std::map<int, int>& evidence,
                                      int outcome_var = -1) {
    if (outcome_var < 0) outcome_var = scm.outcome;
    JointTable t = joint_distribution(scm);
    double mass = 0.0, e = 0.0;
    const auto& domain = scm.variables[static_cast<std::size_t>(outcome_var)].domain;
    for (std::size_t k = 0; k < t.prob.size(); ++k) {
        bool match = true;
        for (const auto& [var, val] : evidence)
            if (t.assignments[k][static_cast<std::size_t>(var)] != val) { match = false; break; }
        if (!match) continue;
        mass += t.prob[k];
        e += t.prob[k] * domain[static_cast<std::size_t>(t.assignments[k][static_cast<std::size_t>(outcome_var)])];
    }
    if (mass <= 0.0) throw std::invalid_argument("conditional_expectation: zero-probability evidence");
    return e / mass;
}

// ATE for a binary treatment: E[Y|do(T=domain[1])] - E[Y|do(T=domain[0])].
inline double ate(const DiscreteScm& scm, int treatment_var) {
    if (scm.variables[static_cast<std::size_t>(treatment_var)].domain.size() != 2)
        throw std::invalid_argument("ate: treatment must be binary");
    InterventionSpec hi, lo;
    hi.set(treatment_var, 1);
    lo.set(treatment_var, 0);
    return expectation_under_do(scm, hi) - expectation_under_do(scm, lo);
}

// LTE_i(x, x_hat_i): all covariates intervened; covariates = all non-outcome,
// non-Z' variables.
inline double lte_exact(const DiscreteScm& scm, const std::map<int, int>& covariate_values, int i,
                        int baseline_value_index) {
    InterventionSpec at_x, at_baseline;
    for (const auto& [var, val] : covariate_values) {
        at_x.set(var, val);
        at_baseline.set(var, var == i ? baseline_value_index : val);
    }
    return expectation_under_do(scm, at_x) - expectation_under_do(scm, at_baseline);
}

struct LemmaCheck {
    bool holds = false;
    double max_deviation = 0.0;
};

// Lemma 1: with the outcome's parents confined to A u {i}, additionally
// intervening on the NA covariates does not move E[Y | do(X_{A u i})].
// `in_set` is the full A u {i}; checked over every combination of values.
inline LemmaCheck verify_lemma1(const DiscreteScm& scm, const std::vector<int>& in_set,
                                const std::vector<int>& na_set) {
    LemmaCheck result;
    std::vector<int> in(in_set);
    std::sort(in.begin(), in.end());
    auto enumerate_values = [&](const std::vector<int>& vars, auto&& fn) {
        std::vector<int> vals(vars.size(), 0);
        for (;;) {
            fn(vals);
            std::size_t k = vars.size();
            while (k-- > 0) {
                if (++vals[k] <
                    static_cast<int>(scm.variables[static_cast<std::size_t>(vars[k])].domain.size()))
                    break;
                vals[k] = 0;
                if (k == 0) return;
            }
            if (vars.empty()) return;
        }
    };
    enumerate_values(in, [&](const std::vector<int>& in_vals) {
        InterventionSpec base;
        for (std::size_t k = 0; k < in.size(); ++k) base.set(in[k], in_vals[k]);
        double lhs_ref = expectation_under_do(scm, base);
        enumerate_values(na_set, [&](const std::vector<int>& na_vals) {
            InterventionSpec both = base;
            for (std::size_t k = 0; k < na_set.size(); ++k) both.set(na_set[k], na_vals[k]);
            double lhs = expectation_under_do(scm, both);
            result.max_deviation = std::max(result.max_deviation, std::fabs(lhs - lhs_ref));
        });
    });
    result.holds = result.max_deviation < 1e-12;
    return result;
}

// Lemma 2: E[Y | do(X_{A u i})] equals the observational conditional
// E[Y | X_{A u i}] on the Fig-S5A topology (checked wherever the
// conditioning event has positive probability).
inline LemmaCheck verify_lemma2(const DiscreteScm& scm, const std::vector<int>& in_set) {
    LemmaCheck result;
    std::vector<int> vars(in_set);
    std::sort(vars.begin(), vars.end());
    std::vector<int> vals(vars.size(), 0);
    JointTable joint = joint_distribution(scm);
    for (;;) {
        InterventionSpec spec;
        std::map<int, int> evidence;
        for (std::size_t k = 0; k < vars.size(); ++k) {
            spec.set(vars[k], vals[k]);
            evidence[vars[k]] = vals[k];
        }
        double mass = 0.0;
        for (std::size_t k = 0; k < joint.prob.size(); ++k) {
            bool match = true;
            for (const auto& [var, val] : evidence)
                if (joint.assignments[k][static_cast<std::size_t>(var)] != val) { match = false; break; }
            if (match) mass += joint.prob[k];
        }
        if (mass > 1e-12) {
            double do_side = expectation_under_do(scm, spec);
            double cond_side = conditional_expectation(scm, evidence);
            result.max_deviation = std::max(result.max_deviation, std::fabs(do_side - cond_side));
        }
        std::size_t k = vars.size();
        bool done = vars.empty();
        while (k-- > 0) {
            if (++vals[k] < static_cast<int>(scm.variables[static_cast<std::size_t>(vars[k])].domain.size()))
                break;
            vals[k] = 0;
            if (k == 0) done = true;
        }
        if (done) break;
    }
    result.holds = result.max_deviation < 1e-12;
    return result;
}

// ---- d-separation (moralized ancestral graph), used to classify fixtures ----

inline bool d_separated(const DiscreteScm& scm, const std::set<int>& xs, const std::set<int>& ys,
                        const std::set<int>& zs) {
    std::size_t n = scm.n_vars();
    // ancestors of X u Y u Z
    std::set<int> relevant;
    std::vector<int> stack;
    for (const auto& s : {xs, ys, zs})
        for (int v : s) stack.push_back(v);
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (!relevant.insert(v).second) continue;
        for (int p : scm.variables[static_cast<std::size_t>(v)].parents) stack.push_back(p);
    }
    // moralize: undirected edges parent-child and parent-parent
    std::vector<std::set<int>> adj(n);
    for (int v : relevant) {
        const auto& parents = scm.variables[static_cast<std::size_t>(v)].parents;
        for (int p : parents) {
            if (!relevant.count(p)) continue;
            adj[static_cast<std::size_t>(v)].insert(p);
            adj[static_cast<std::size_t>(p)].insert(v);
            for (int q : parents)
                if (q != p && relevant.count(q)) adj[static_cast<std::size_t>(p)].insert(q);
        }
    }
    // reachability avoiding Z
    std::set<int> seen;
    for (int v : xs)
        if (!zs.count(v)) stack.push_back(v);
    while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (zs.count(v) || !seen.insert(v).second) continue;
        if (ys.count(v)) return false;
        for (int w : adj[static_cast<std::size_t>(v)])
            if (!seen.count(w) && !zs.count(w)) stack.push_back(w);
    }
    return true;
}

} // namespace cimla
