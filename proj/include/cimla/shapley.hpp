#pragma once
// Interventional Shapley values. The coalition value of a feature set S is
// the model output with S pinned to the sample and the complement
// marginalized over an explicit background sample set:
//
//   v(S) = mean_{b in B} f(x_S, b_{~S})
//
// phi is computed either exactly, by enumerating every subset of the other
// features with weight 1/(m * C(m-1, |S|)), or by averaging marginal
// contributions over uniformly random feature permutations (an unbiased
// Monte-Carlo estimate of the same sum, with per-feature standard errors).
//
// The subset weights are assembled in exact integer arithmetic first; they
// are shared with the causal-oracle module, which re-derives the same
// quantity from the structure prior over causal graphs.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/matrix.hpp"
#include "cimla/model.hpp"
#include "cimla/rng.hpp"
#include "cimla/threading.hpp"
#include "cimla/tsv.hpp"

namespace cimla {

inline std::uint64_t binomial_u64(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    std::uint64_t result = 1;
    for (int i = 1; i <= k; ++i) {
        // multiply first, divide exactly; guard against 64-bit overflow
        std::uint64_t next = result * static_cast<std::uint64_t>(n - k + i);
        if (result != 0 && next / result != static_cast<std::uint64_t>(n - k + i))
            throw std::overflow_error("binomial_u64: overflow");
        result = next / static_cast<std::uint64_t>(i);
    }
    return result;
}

// P(psi) for one causal structure with |A| = subset_size features (besides i)
// associated with the outcome: 1 / (m * C(m-1, subset_size)).
inline double shapley_subset_weight(int m, int subset_size) {
    if (m < 1 || subset_size < 0 || subset_size > m - 1)
        throw std::invalid_argument("shapley_subset_weight: bad arguments");
    std::uint64_t c = binomial_u64(m - 1, subset_size);
    std::uint64_t denom = static_cast<std::uint64_t>(m) * c;
    if (denom / static_cast<std::uint64_t>(m) != c)
        throw std::overflow_error("shapley_subset_weight: overflow");
    return 1.0 / static_cast<double>(denom);
}

struct BackgroundSet {
    Matrix rows;   // samples x m, drawn from the same condition's data

    std::size_t size() const { return rows.rows(); }
    std::size_t feature_count() const { return rows.cols(); }

    void validate(std::size_t m) const {
        if (rows.rows() == 0) throw std::invalid_argument("BackgroundSet: empty");
        if (rows.cols() != m) throw std::invalid_argument("BackgroundSet: feature count mismatch");
    }
};

struct AttributionConfig {
    enum class Estimator { exact, sampled };
    Estimator estimator = Estimator::exact;
    int n_permutations = 128;      // sampled estimator only
    int exact_limit = 15;          // refuse exact enumeration beyond this m
    bool batched = true;           // false: scalar predict path (differential testing)
    int workers = 1;
};

struct AttributionMeta {
    std::string estimator;
    int n_permutations = 0;
    std::size_t background_rows = 0;
    std::uint64_t seed = 0;
};

namespace detail {

// Evaluates v(S) given composite rows already assembled in `buffer`
// (|B| rows: x on in-features, background elsewhere). Batched and scalar
// paths accumulate in the same order and agree bitwise.
template <Predictor M>
double mean_prediction(const M& model, const Matrix& buffer, bool batched,
                       std::vector<double>& pred_scratch) {
    double sum = 0.0;
    if (batched) {
        if constexpr (requires(const M& mm) { mm.predict_batch(buffer, pred_scratch); })
            model.predict_batch(buffer, pred_scratch);
        else
            predict_batch_fallback(model, buffer, pred_scratch);
        for (double v : pred_scratch) sum += v;
    } else {
        for (std::size_t r = 0; r < buffer.rows(); ++r) sum += model.predict_one(buffer.row(r));
    }
    return sum / static_cast<double>(buffer.rows());
}

} // namespace detail

// v(in_features) for one sample. in_features lists feature indices pinned to x.
template <Predictor M>
double coalition_value(const M& model, std::span<const double> x,
                       std::span<const std::size_t> in_features, const BackgroundSet& background,
                       bool batched = true) {
    std::size_t m = model.feature_count();
    background.validate(m);
    if (x.size() != m) throw std::invalid_argument("coalition_value: sample size mismatch");
    Matrix buffer = background.rows;
    for (std::size_t f : in_features) {
        if (f >= m) throw std::invalid_argument("coalition_value: feature index out of range");
        for (std::size_t r = 0; r < buffer.rows(); ++r) buffer(r, f) = x[f];
    }
    std::vector<double> scratch;
    return detail::mean_prediction(model, buffer, batched, scratch);
}

// Exact enumeration over all 2^m coalitions (m <= exact_limit).
template <Predictor M>
std::vector<double> shap_exact(const M& model, std::span<const double> x,
                               const BackgroundSet& background, int exact_limit = 15,
                               bool batched = true) {
    std::size_t m = model.feature_count();
    background.validate(m);
    if (x.size() != m) throw std::invalid_argument("shap_exact: sample size mismatch");
    if (m > static_cast<std::size_t>(exact_limit) || m >= 63)
        throw std::length_error("shap_exact: feature count " + std::to_string(m) +
                                " exceeds exact_limit " + std::to_string(exact_limit) +
                                "; use shap_sampled");

    std::size_t n_masks = std::size_t{1} << m;
    std::vector<double> v(n_masks);
    Matrix buffer(background.rows.rows(), m);
    std::vector<double> scratch;
    for (std::size_t mask = 0; mask < n_masks; ++mask) {
        for (std::size_t r = 0; r < buffer.rows(); ++r) {
            std::span<const double> bg = background.rows.row(r);
            std::span<double> row = buffer.row(r);
            for (std::size_t f = 0; f < m; ++f)
                row[f] = (mask >> f) & 1u ? x[f] : bg[f];
        }
        v[mask] = detail::mean_prediction(model, buffer, batched, scratch);
    }

    std::vector<double> weight(m);
    for (std::size_t k = 0; k < m; ++k)
        weight[k] = shapley_subset_weight(static_cast<int>(m), static_cast<int>(k));

    std::vector<double> phi(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t bit = std::size_t{1} << i;
        std::size_t rest = (n_masks - 1) ^ bit;
        // iterate all submasks of `rest`, including the empty set
        std::size_t sub = rest;
        for (;;) {
            phi[i] += weight[static_cast<std::size_t>(std::popcount(sub))] * (v[sub | bit] - v[sub]);
            if (sub == 0) break;
            sub = (sub - 1) & rest;
        }
    }
    return phi;
}

struct SampledShap {
    std::vector<double> phi;
    std::vector<double> se;   // zero when n_permutations == 1
};

// Monte-Carlo permutation estimator: for each uniformly random feature
// order, the marginal contribution of feature i is v(prefix + i) - v(prefix).
template <Predictor M>
SampledShap shap_sampled(const M& model, std::span<const double> x,
                         const BackgroundSet& background, int n_permutations, Rng rng,
                         bool batched = true) {
    std::size_t m = model.feature_count();
    background.validate(m);
    if (x.size() != m) throw std::invalid_argument("shap_sampled: sample size mismatch");
    if (n_permutations < 1) throw std::invalid_argument("shap_sampled: need n_permutations >= 1");

    Matrix buffer(background.rows.rows(), m);
    std::vector<double> scratch;
    std::vector<double> sum(m, 0.0), sum_sq(m, 0.0);
    std::vector<std::size_t> perm(m);

    // v(empty) and v(full) are permutation-independent; evaluate once.
    buffer = background.rows;
    double v_empty = detail::mean_prediction(model, buffer, batched, scratch);
    for (std::size_t r = 0; r < buffer.rows(); ++r) {
        std::span<double> row = buffer.row(r);
        for (std::size_t f = 0; f < m; ++f) row[f] = x[f];
    }
    double v_full = detail::mean_prediction(model, buffer, batched, scratch);

    for (int p = 0; p < n_permutations; ++p) {
        Rng pr = rng.child("perm", static_cast<std::uint64_t>(p));
        for (std::size_t i = 0; i < m; ++i) perm[i] = i;
        pr.shuffle(perm);
        buffer = background.rows;
        double v_prev = v_empty;
        for (std::size_t step = 0; step < m; ++step) {
            std::size_t f = perm[step];
            for (std::size_t r = 0; r < buffer.rows(); ++r) buffer(r, f) = x[f];
            double v_cur = (step + 1 == m) ? v_full
                                           : detail::mean_prediction(model, buffer, batched, scratch);
            double contrib = v_cur - v_prev;
            sum[f] += contrib;
            sum_sq[f] += contrib * contrib;
            v_prev = v_cur;
        }
    }

    SampledShap out;
    out.phi.resize(m);
    out.se.assign(m, 0.0);
    double n = static_cast<double>(n_permutations);
    for (std::size_t f = 0; f < m; ++f) {
        out.phi[f] = sum[f] / n;
        if (n_permutations > 1) {
            double var = (sum_sq[f] - sum[f] * sum[f] / n) / (n - 1.0);
            out.se[f] = std::sqrt(std::max(var, 0.0) / n);
        }
    }
    return out;
}

// Attribute every row of `samples`. Rows are independent units; per-row
// child seeds keep the result identical for any worker count.
template <Predictor M>
std::pair<Matrix, AttributionMeta> attribute_dataset(const M& model, const Matrix& samples,
                                                     const BackgroundSet& background,
                                                     const AttributionConfig& cfg, Rng rng) {
    std::size_t m = model.feature_count();
    if (samples.cols() != m) throw std::invalid_argument("attribute_dataset: feature count mismatch");
    background.validate(m);
    Matrix out(samples.rows(), m);
    bool exact = cfg.estimator == AttributionConfig::Estimator::exact;
    parallel_for(samples.rows(), cfg.workers, [&](std::size_t r) {
        if (exact) {
            std::vector<double> phi = shap_exact(model, samples.row(r), background, cfg.exact_limit,
                                                 cfg.batched);
            for (std::size_t f = 0; f < m; ++f) out(r, f) = phi[f];
        } else {
            SampledShap s = shap_sampled(model, samples.row(r), background, cfg.n_permutations,
                                         rng.child("sample", r), cfg.batched);
            for (std::size_t f = 0; f < m; ++f) out(r, f) = s.phi[f];
        }
    });
    AttributionMeta meta;
    meta.estimator = exact ? "exact" : "sampled";
    meta.n_permutations = exact ? 0 : cfg.n_permutations;
    meta.background_rows = background.size();
    meta.seed = rng.seed();
    return {std::move(out), meta};
}

// TSV export (sample id rows, feature columns) plus a key/value sidecar
// holding the estimator settings.
inline void save_attribution_tsv(const Matrix& attributions,
                                 const std::vector<std::string>& sample_ids,
                                 const std::vector<std::string>& feature_names,
                                 const AttributionMeta& meta, const std::string& path) {
    if (attributions.rows() != sample_ids.size() || attributions.cols() != feature_names.size())
        throw std::invalid_argument("save_attribution_tsv: shape/name mismatch");
    TsvWriter w(path);
    w.field(std::string("sample"));
    for (const auto& f : feature_names) w.field(f);
    w.endrow();
    for (std::size_t r = 0; r < attributions.rows(); ++r) {
        w.field(sample_ids[r]);
        for (double v : attributions.row(r)) w.field(v);
        w.endrow();
    }
    std::string sidecar = "estimator\t" + meta.estimator + "\n";
    sidecar += "n_permutations\t" + std::to_string(meta.n_permutations) + "\n";
    sidecar += "background_rows\t" + std::to_string(meta.background_rows) + "\n";
    sidecar += "seed\t" + std::to_string(meta.seed) + "\n";
    write_text_file(path + ".meta", sidecar);
}

} // namespace cimla
