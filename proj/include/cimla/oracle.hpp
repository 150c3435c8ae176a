#pragma once
// Oracle corpus on top of the SCM engine: random conforming fixtures for
// the two do-calculus lemmas, assumption-violating fixtures that must fail,
// the discrete-linear equivalence check between the structure-averaged
// local treatment effect and the interventional Shapley value, and the
// fixture file format.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cimla/model.hpp"
#include "cimla/scm.hpp"
#include "cimla/shapley.hpp"

namespace cimla {

// Linear predictor used where the true structural function stands in for a
// trained model (oracle assumption 1 holds by construction).
struct LinearModel {
    std::vector<double> w;
    double bias = 0.0;

    std::size_t feature_count() const { return w.size(); }
    double predict_one(std::span<const double> x) const {
        double s = bias;
        for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
        return s;
    }
};

struct ScmPartition {
    int i = -1;                 // the probed covariate (variable index)
    std::vector<int> a_set;     // covariates associated with Y
    std::vector<int> na_set;    // covariates not associated with Y
};

struct ScmFixture {
    DiscreteScm scm;
    ScmPartition partition;
    // expected lemma outcomes; missing key = not applicable
    std::map<std::string, bool> expect_pass;
    std::string name;
};

// Random binary SCM matching the Fig-S5A topology: Z' feeds every
// covariate, covariates may feed later covariates, Y's parents are exactly
// A u {i}. CPT probabilities stay inside (0.1, 0.9) so every conditioning
// event has positive mass.
inline ScmFixture random_conforming_scm(int n_covariates, Rng rng, bool violate_na_edge = false) {
    ScmFixture fx;
    DiscreteScm& scm = fx.scm;
    int zp = 0;
    scm.z_prime = zp;
    auto add_var = [&](const std::string& name, std::vector<int> parents) {
        ScmVariable v;
        v.name = name;
        v.domain = {0.0, 1.0};
        v.parents = std::move(parents);
        std::size_t rows = 1;
        for (int p : v.parents) rows *= scm.variables[static_cast<std::size_t>(p)].domain.size();
        v.cpt = Matrix(rows, 2);
        for (std::size_t r = 0; r < rows; ++r) {
            double p1 = rng.uniform(0.1, 0.9);
            v.cpt(r, 0) = 1.0 - p1;
            v.cpt(r, 1) = p1;
        }
        scm.variables.push_back(std::move(v));
        return static_cast<int>(scm.variables.size() - 1);
    };

    add_var("Z", {});
    std::vector<int> covariates;
    for (int j = 0; j < n_covariates; ++j) {
        std::vector<int> parents = {zp};
        for (int prev : covariates)
            if (rng.bernoulli(0.3)) parents.push_back(prev);
        covariates.push_back(add_var("X" + std::to_string(j + 1), parents));
    }

    // partition: one probed covariate, the rest split between A and NA;
    // a violating fixture needs at least one NA covariate to misuse
    std::vector<std::size_t> perm = rng.permutation(covariates.size());
    fx.partition.i = covariates[perm[0]];
    std::size_t n_a = covariates.size() > 1 ? 1 + rng.index(covariates.size() - 1) : 0;
    if (violate_na_edge && n_a + 1 >= covariates.size() && covariates.size() > 1)
        n_a = covariates.size() - 2;
    for (std::size_t k = 1; k < perm.size(); ++k)
        (k <= n_a ? fx.partition.a_set : fx.partition.na_set).push_back(covariates[perm[k]]);

    std::vector<int> y_parents = fx.partition.a_set;
    y_parents.push_back(fx.partition.i);
    if (violate_na_edge && !fx.partition.na_set.empty())
        y_parents.push_back(fx.partition.na_set.front());   // breaks the Fig-S5A topology
    std::sort(y_parents.begin(), y_parents.end());
    scm.outcome = add_var("Y", y_parents);
    scm.validate();
    fx.expect_pass["lemma1"] = !violate_na_edge || fx.partition.na_set.empty();
    fx.expect_pass["lemma2"] = !violate_na_edge || fx.partition.na_set.empty();
    fx.name = violate_na_edge ? "random-violating" : "random-conforming";
    return fx;
}

inline std::vector<int> lemma_in_set(const ScmPartition& p) {
    std::vector<int> in = p.a_set;
    in.push_back(p.i);
    std::sort(in.begin(), in.end());
    return in;
}

// ---- LTE <-> Shapley equivalence on discrete linear fixtures ----
//
// Covariates take values a_j * z + e_j on small uniform grids, so the joint
// distribution is uniform over an enumerable support multiset. The Shapley
// path marginalizes over exactly that multiset as its background; the
// independent path enumerates every causal structure, evaluating
//   E_{X_NA}[f(x_i, x_A, X_NA)] - E_{X_i|X_NA} E_{X_NA}[f(X_i, x_A, X_NA)]
// with marginals and conditionals read off the joint table.

struct LinearScmFixture {
    std::vector<double> weights;       // f(x) = w . x + bias
    double bias = 0.0;
    std::vector<double> z_values;      // uniform latent confounder grid
    std::vector<double> noise_values;  // uniform per-covariate noise grid
    std::vector<double> loadings;      // covariate j = loadings[j] * z + noise
};

inline LinearScmFixture random_linear_scm(int m, Rng rng, bool confounded) {
    LinearScmFixture fx;
    for (int j = 0; j < m; ++j) {
        fx.weights.push_back(rng.uniform(-2.0, 2.0));
        fx.loadings.push_back(confounded ? rng.uniform(0.3, 1.2) : 0.0);
    }
    fx.bias = rng.uniform(-1.0, 1.0);
    fx.z_values = {-1.5, -0.5, 0.5, 1.5};
    fx.noise_values = {-1.0, 0.0, 1.0};
    return fx;
}

// Enumerates the covariate support multiset (every (z, e_1..e_m) combo is
// equally likely by construction).
inline Matrix linear_scm_support(const LinearScmFixture& fx) {
    std::size_t m = fx.weights.size();
    std::size_t rows = fx.z_values.size();
    for (std::size_t j = 0; j < m; ++j) rows *= fx.noise_values.size();
    Matrix support(rows, m);
    std::vector<std::size_t> idx(m + 1, 0);   // [z, e_1..e_m]
    for (std::size_t r = 0; r < rows; ++r) {
        double z = fx.z_values[idx[0]];
        for (std::size_t j = 0; j < m; ++j)
            support(r, j) = fx.loadings[j] * z + fx.noise_values[idx[j + 1]];
        for (std::size_t k = idx.size(); k-- > 0;) {
            std::size_t radix = (k == 0) ? fx.z_values.size() : fx.noise_values.size();
            if (++idx[k] < radix) break;
            idx[k] = 0;
        }
    }
    return support;
}

struct EquivalenceRecord {
    std::vector<double> shapley;       // attribution-module path
    std::vector<double> structure_avg; // independent Eq. 8-12 enumeration
    double max_deviation = 0.0;
};

inline EquivalenceRecord lte_marginal_vs_shapley(const LinearScmFixture& fx,
                                                 std::span<const double> x) {
    std::size_t m = fx.weights.size();
    if (x.size() != m) throw std::invalid_argument("lte_marginal_vs_shapley: sample size mismatch");
    LinearModel model{fx.weights, fx.bias};

    Matrix support = linear_scm_support(fx);
    BackgroundSet background{support};
    EquivalenceRecord rec;
    rec.shapley = shap_exact(model, x, background, 15);

    // joint table over covariate values (uniform over the support rows)
    double row_p = 1.0 / static_cast<double>(support.rows());

    // marginal over a coordinate subset: projected tuple -> probability
    auto marginal = [&](const std::vector<std::size_t>& coords) {
        std::map<std::vector<double>, double> table;
        for (std::size_t r = 0; r < support.rows(); ++r) {
            std::vector<double> key;
            key.reserve(coords.size());
            for (std::size_t c : coords) key.push_back(support(r, c));
            table[key] += row_p;
        }
        return table;
    };

    rec.structure_avg.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<std::size_t> others;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) others.push_back(j);
        std::size_t n_subsets = std::size_t{1} << others.size();
        double alpha = 0.0;
        for (std::size_t mask = 0; mask < n_subsets; ++mask) {
            std::vector<std::size_t> a_coords, na_coords;
            for (std::size_t k = 0; k < others.size(); ++k)
                ((mask >> k) & 1u ? a_coords : na_coords).push_back(others[k]);
            double weight = shapley_subset_weight(static_cast<int>(m),
                                                  static_cast<int>(a_coords.size()));

            std::vector<double> probe(x.begin(), x.end());
            // term 1: E over X_NA of f(x_i, x_A, X_NA)
            double term1 = 0.0;
            for (const auto& [na_vals, p_na] : marginal(na_coords)) {
                for (std::size_t k = 0; k < na_coords.size(); ++k) probe[na_coords[k]] = na_vals[k];
                probe[i] = x[i];
                term1 += p_na * model.predict_one(probe);
            }
            // term 2: E over x_hat_i ~ P(X_i | X_NA) of E over X_NA of f
            double term2 = 0.0;
            std::vector<std::size_t> i_and_na = na_coords;
            i_and_na.insert(i_and_na.begin(), i);
            auto joint_i_na = marginal(i_and_na);
            auto p_na_table = marginal(na_coords);
            for (const auto& [vals, p_joint] : joint_i_na) {
                std::vector<double> na_vals(vals.begin() + 1, vals.end());
                double p_na = p_na_table.at(na_vals);
                double conditional = p_joint / p_na;
                probe[i] = vals[0];
                for (std::size_t k = 0; k < na_coords.size(); ++k) probe[na_coords[k]] = na_vals[k];
                term2 += conditional * p_na * model.predict_one(probe);
            }
            alpha += weight * (term1 - term2);
        }
        rec.structure_avg[i] = alpha;
        rec.max_deviation = std::max(rec.max_deviation, std::fabs(alpha - rec.shapley[i]));
    }
    return rec;
}

// ---- fixture files ----
// Line format:
//   scm v1
//   var NAME v1 v2 ...
//   parents NAME [P1 P2 ...]
//   cpt NAME p11 p12 ... (rows concatenated, first parent slowest)
//   outcome NAME
//   zprime NAME
//   partition i=NAME a=N1,N2 na=N3,N4
//   expect lemma1 pass|fail
//   expect lemma2 pass|fail

inline ScmFixture load_scm_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    ScmFixture fx;
    fx.name = path;
    std::map<std::string, int> index;
    std::string line;
    bool tagged = false;
    auto var_index = [&](const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw std::runtime_error(path + ": unknown variable " + name);
        return it->second;
    };
    auto split_names = [](const std::string& csv) {
        std::vector<std::string> out;
        std::stringstream ss(csv);
        std::string tok;
        while (std::getline(ss, tok, ','))
            if (!tok.empty()) out.push_back(tok);
        return out;
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "scm") {
            std::string version;
            ss >> version;
            if (version != "v1") throw std::runtime_error(path + ": unsupported version " + version);
            tagged = true;
        } else if (key == "var") {
            ScmVariable v;
            ss >> v.name;
            double d;
            while (ss >> d) v.domain.push_back(d);
            index[v.name] = static_cast<int>(fx.scm.variables.size());
            fx.scm.variables.push_back(std::move(v));
        } else if (key == "parents") {
            std::string name, p;
            ss >> name;
            auto& v = fx.scm.variables[static_cast<std::size_t>(var_index(name))];
            while (ss >> p) v.parents.push_back(var_index(p));
        } else if (key == "cpt") {
            std::string name;
            ss >> name;
            auto& v = fx.scm.variables[static_cast<std::size_t>(var_index(name))];
            std::size_t rows = 1;
            for (int p : v.parents)
                rows *= fx.scm.variables[static_cast<std::size_t>(p)].domain.size();
            v.cpt = Matrix(rows, v.domain.size());
            for (double& cell : v.cpt.data())
                if (!(ss >> cell)) throw std::runtime_error(path + ": short CPT for " + name);
        } else if (key == "outcome") {
            std::string name;
            ss >> name;
            fx.scm.outcome = var_index(name);
        } else if (key == "zprime") {
            std::string name;
            ss >> name;
            fx.scm.z_prime = var_index(name);
        } else if (key == "partition") {
            std::string field;
            while (ss >> field) {
                auto eq = field.find('=');
                if (eq == std::string::npos) throw std::runtime_error(path + ": bad partition field");
                std::string tag = field.substr(0, eq), body = field.substr(eq + 1);
                if (tag == "i") fx.partition.i = var_index(body);
                else if (tag == "a")
                    for (const auto& n : split_names(body)) fx.partition.a_set.push_back(var_index(n));
                else if (tag == "na")
                    for (const auto& n : split_names(body)) fx.partition.na_set.push_back(var_index(n));
                else throw std::runtime_error(path + ": bad partition tag " + tag);
            }
        } else if (key == "expect") {
            std::string lemma, verdict;
            ss >> lemma >> verdict;
            fx.expect_pass[lemma] = (verdict == "pass");
        } else {
            throw std::runtime_error(path + ": unknown directive " + key);
        }
    }
    if (!tagged) throw std::runtime_error(path + ": missing 'scm v1' header");
    fx.scm.validate();
    return fx;
}

struct OracleReport {
    int lemma1_checked = 0, lemma1_as_expected = 0;
    int lemma2_checked = 0, lemma2_as_expected = 0;
    double lemma_max_conforming_deviation = 0.0;
    int equivalence_checked = 0, equivalence_passed = 0;
    double equivalence_max_deviation = 0.0;
    std::vector<std::string> failures;

    bool all_ok() const { return failures.empty(); }
};

inline void oracle_check_fixture(const ScmFixture& fx, OracleReport& report) {
    std::vector<int> in = lemma_in_set(fx.partition);
    auto l1 = verify_lemma1(fx.scm, in, fx.partition.na_set);
    auto l2 = verify_lemma2(fx.scm, in);
    auto record = [&](const std::string& lemma, const LemmaCheck& check, int& checked, int& ok) {
        auto it = fx.expect_pass.find(lemma);
        if (it == fx.expect_pass.end()) return;
        ++checked;
        if (check.holds == it->second) {
            ++ok;
            if (it->second)
                report.lemma_max_conforming_deviation =
                    std::max(report.lemma_max_conforming_deviation, check.max_deviation);
        } else {
            report.failures.push_back(fx.name + ": " + lemma + " expected " +
                                      (it->second ? "pass" : "fail") + ", deviation " +
                                      std::to_string(check.max_deviation));
        }
    };
    record("lemma1", l1, report.lemma1_checked, report.lemma1_as_expected);
    record("lemma2", l2, report.lemma2_checked, report.lemma2_as_expected);
}

// Full corpus: random conforming/violating SCMs for both lemmas, any
// on-disk fixtures, and the equivalence fixtures.
inline OracleReport run_oracle_suite(int n_random, int n_equivalence, std::uint64_t seed,
                                     const std::vector<std::string>& fixture_paths = {}) {
    OracleReport report;
    Rng root(seed);
    for (int k = 0; k < n_random; ++k) {
        int m = 3 + static_cast<int>(root.child("size", static_cast<std::uint64_t>(k)).index(2));
        ScmFixture fx =
            random_conforming_scm(m, root.child("conforming", static_cast<std::uint64_t>(k)));
        fx.name += "#" + std::to_string(k);
        oracle_check_fixture(fx, report);
    }
    // violating corpus is smaller; every fixture must fail both lemmas
    for (int k = 0; k < std::max(5, n_random / 10); ++k) {
        ScmFixture fx =
            random_conforming_scm(3, root.child("violating", static_cast<std::uint64_t>(k)), true);
        fx.name += "#" + std::to_string(k);
        oracle_check_fixture(fx, report);
    }
    for (const auto& path : fixture_paths) oracle_check_fixture(load_scm_fixture(path), report);

    for (int k = 0; k < n_equivalence; ++k) {
        Rng fr = root.child("equiv", static_cast<std::uint64_t>(k));
        int m = 2 + static_cast<int>(fr.index(2));
        LinearScmFixture fx = random_linear_scm(m, fr, k % 2 == 0);
        Matrix support = linear_scm_support(fx);
        std::size_t row = fr.index(support.rows());
        EquivalenceRecord rec = lte_marginal_vs_shapley(fx, support.row(row));
        ++report.equivalence_checked;
        report.equivalence_max_deviation =
            std::max(report.equivalence_max_deviation, rec.max_deviation);
        if (rec.max_deviation < 1e-6)
            ++report.equivalence_passed;
        else
            report.failures.push_back("equivalence#" + std::to_string(k) + ": deviation " +
                                      std::to_string(rec.max_deviation));
    }
    return report;
}

} // namespace cimla
