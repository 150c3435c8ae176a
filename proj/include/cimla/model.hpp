#pragma once
// Shared regression-model surface. Both learners satisfy Predictor, which
// is all the attribution code needs.

#include <cmath>
#include <concepts>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/matrix.hpp"

namespace cimla {

template <typename M>
concept Predictor = requires(const M& m, std::span<const double> x) {
    { m.feature_count() } -> std::convertible_to<std::size_t>;
    { m.predict_one(x) } -> std::convertible_to<double>;
};

// Scalar fallback; models may provide a faster predict_batch of their own.
template <Predictor M>
void predict_batch_fallback(const M& model, const Matrix& x, std::vector<double>& out) {
    out.resize(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.predict_one(x.row(r));
}

template <Predictor M>
std::vector<double> predict(const M& model, const Matrix& x) {
    if (x.cols() != model.feature_count())
        throw std::invalid_argument("predict: feature count mismatch");
    std::vector<double> out;
    if constexpr (requires(const M& m) { m.predict_batch(x, out); })
        model.predict_batch(x, out);
    else
        predict_batch_fallback(model, x, out);
    return out;
}

// Coefficient of determination, 1 - SS_res/SS_tot. Negative when the
// prediction is worse than the mean.
inline double r_squared(std::span<const double> y_true, std::span<const double> y_pred) {
    if (y_true.size() != y_pred.size() || y_true.size() < 2)
        throw std::invalid_argument("r_squared: need equal lengths >= 2");
    double mu = mean(y_true);
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        ss_tot += (y_true[i] - mu) * (y_true[i] - mu);
        ss_res += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
    }
    if (ss_tot == 0.0) throw std::invalid_argument("r_squared: zero-variance y_true");
    return 1.0 - ss_res / ss_tot;
}

struct CvEntry {
    std::string hyperparams;
    double mean_score = 0.0;
};

struct TrainReport {
    double r2_train = std::nan("");
    double r2_test = std::nan("");
    std::vector<CvEntry> cv_table;
    std::vector<double> loss_history;   // per-epoch training MSE (MLP only)
};

struct DataSet {
    Matrix x;                   // samples x features
    std::vector<double> y;
};

} // namespace cimla
