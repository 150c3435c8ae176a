#pragma once
// Fully connected regression MLP: 2-3 ReLU hidden layers, linear output,
// MSE loss, Adam, mini-batches of 128, optional dropout after the input
// layer (training only) and early stopping on a validation slice of the
// training data. Everything is hand-rolled double precision so the
// gradient can be checked against finite differences.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cimla/matrix.hpp"
#include "cimla/model.hpp"
#include "cimla/rng.hpp"

namespace cimla {

struct MlpHyper {
    std::vector<int> hidden = {64, 32};    // 2 or 3 hidden layers
    double input_dropout_p = 0.0;
    int batch_size = 128;
    int max_epochs = 200;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double val_fraction = 0.1;             // early-stopping slice of the training data
    int patience = 10;
};

class Mlp {
public:
    // weights[l] is (out x in) row-major, biases[l] length out.
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    double input_dropout_p = 0.0;

    std::size_t feature_count() const { return weights.empty() ? 0 : weights.front().cols(); }
    std::size_t n_layers() const { return weights.size(); }

    void validate() const {
        if (weights.size() < 3 || weights.size() > 4)
            throw std::invalid_argument("Mlp: expected 2 or 3 hidden layers");
        for (std::size_t l = 0; l + 1 < weights.size(); ++l)
            if (weights[l + 1].cols() != weights[l].rows())
                throw std::invalid_argument("Mlp: layer dimension mismatch");
        if (weights.back().rows() != 1)
            throw std::invalid_argument("Mlp: output layer must be scalar");
    }

    // Inference path; dropout is never applied here.
    double predict_one(std::span<const double> x) const {
        std::vector<double> a(x.begin(), x.end());
        std::vector<double> next;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            const Matrix& w = weights[l];
            next.assign(w.rows(), 0.0);
            for (std::size_t r = 0; r < w.rows(); ++r) {
                double s = biases[l][r];
                std::span<const double> wr = w.row(r);
                for (std::size_t c = 0; c < w.cols(); ++c) s += wr[c] * a[c];
                next[r] = (l + 1 < weights.size() && s < 0.0) ? 0.0 : s;   // ReLU on hidden
            }
            a.swap(next);
        }
        return a[0];
    }
};

namespace mlp_detail {

struct Workspace {
    std::vector<std::vector<double>> activations;   // per layer, post-nonlinearity
    std::vector<std::vector<double>> deltas;
};

// Forward pass storing activations; optional dropout mask on the input.
inline double forward(const Mlp& net, std::span<const double> x, Workspace& ws,
                      const std::vector<double>* input_scale = nullptr) {
    std::size_t layers = net.weights.size();
    ws.activations.resize(layers + 1);
    ws.activations[0].assign(x.begin(), x.end());
    if (input_scale)
        for (std::size_t i = 0; i < x.size(); ++i) ws.activations[0][i] *= (*input_scale)[i];
    for (std::size_t l = 0; l < layers; ++l) {
        const Matrix& w = net.weights[l];
        auto& out = ws.activations[l + 1];
        out.assign(w.rows(), 0.0);
        const auto& in = ws.activations[l];
        for (std::size_t r = 0; r < w.rows(); ++r) {
            double s = net.biases[l][r];
            std::span<const double> wr = w.row(r);
            for (std::size_t c = 0; c < w.cols(); ++c) s += wr[c] * in[c];
            out[r] = (l + 1 < layers && s < 0.0) ? 0.0 : s;
        }
    }
    return ws.activations[layers][0];
}

// Accumulates d(squared error)/d(params) for one sample into grad_* (same
// shapes as the network parameters).
inline void backward(const Mlp& net, Workspace& ws, double residual_grad,
                     std::vector<Matrix>& grad_w, std::vector<std::vector<double>>& grad_b) {
    std::size_t layers = net.weights.size();
    ws.deltas.resize(layers);
    ws.deltas[layers - 1].assign(1, residual_grad);
    for (std::size_t l = layers; l-- > 0;) {
        const auto& delta = ws.deltas[l];
        const auto& in = ws.activations[l];
        Matrix& gw = grad_w[l];
        for (std::size_t r = 0; r < net.weights[l].rows(); ++r) {
            grad_b[l][r] += delta[r];
            std::span<double> gr = gw.row(r);
            for (std::size_t c = 0; c < net.weights[l].cols(); ++c) gr[c] += delta[r] * in[c];
        }
        if (l == 0) break;
        auto& prev = ws.deltas[l - 1];
        prev.assign(net.weights[l].cols(), 0.0);
        for (std::size_t r = 0; r < net.weights[l].rows(); ++r) {
            std::span<const double> wr = net.weights[l].row(r);
            for (std::size_t c = 0; c < net.weights[l].cols(); ++c) prev[c] += wr[c] * delta[r];
        }
        // ReLU gate: activation zero means the unit was clamped.
        for (std::size_t c = 0; c < prev.size(); ++c)
            if (ws.activations[l][c] <= 0.0) prev[c] = 0.0;
    }
}

inline double mse(const Mlp& net, const Matrix& x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double d = net.predict_one(x.row(r)) - y[r];
        s += d * d;
    }
    return s / static_cast<double>(x.rows());
}

// Full-batch MSE gradient (no dropout); used by the finite-difference test.
inline void mse_gradient(const Mlp& net, const Matrix& x, std::span<const double> y,
                         std::vector<Matrix>& grad_w, std::vector<std::vector<double>>& grad_b) {
    grad_w.clear();
    grad_b.clear();
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        grad_w.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        grad_b.emplace_back(net.biases[l].size(), 0.0);
    }
    Workspace ws;
    double scale = 2.0 / static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double pred = forward(net, x.row(r), ws);
        backward(net, ws, scale * (pred - y[r]), grad_w, grad_b);
    }
}

} // namespace mlp_detail

inline Mlp make_mlp(std::size_t n_features, const MlpHyper& hp, Rng rng) {
    if (hp.hidden.size() < 2 || hp.hidden.size() > 3)
        throw std::invalid_argument("make_mlp: 2 or 3 hidden layers required");
    Mlp net;
    net.input_dropout_p = hp.input_dropout_p;
    std::vector<std::size_t> dims;
    dims.push_back(n_features);
    for (int h : hp.hidden) dims.push_back(static_cast<std::size_t>(h));
    dims.push_back(1);
    Rng wr = rng.child("init");
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l + 1], dims[l]);
        double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));   // He init for ReLU
        for (double& v : w.data()) v = scale * wr.next_normal();
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(dims[l + 1], 0.0);
    }
    return net;
}

inline std::pair<Mlp, TrainReport> fit_mlp(const DataSet& train, const MlpHyper& hp, Rng rng,
                                           const DataSet* test = nullptr) {
    std::size_t n = train.x.rows();
    if (n < 4) throw std::invalid_argument("fit_mlp: too few samples");
    if (variance(train.y) == 0.0) throw std::invalid_argument("fit_mlp: target has zero variance");

    Mlp net = make_mlp(train.x.cols(), hp, rng);

    // Hold out the early-stopping slice.
    std::vector<std::size_t> perm = rng.child("valsplit").permutation(n);
    auto n_val = static_cast<std::size_t>(std::llround(hp.val_fraction * static_cast<double>(n)));
    if (n_val >= n) n_val = n - 1;
    std::vector<std::size_t> fit_idx(perm.begin(), perm.end() - static_cast<long>(n_val));
    std::vector<std::size_t> val_idx(perm.end() - static_cast<long>(n_val), perm.end());
    Matrix xfit = train.x.select_rows(fit_idx);
    std::vector<double> yfit(fit_idx.size());
    for (std::size_t i = 0; i < fit_idx.size(); ++i) yfit[i] = train.y[fit_idx[i]];
    Matrix xval = n_val ? train.x.select_rows(val_idx) : Matrix();
    std::vector<double> yval(val_idx.size());
    for (std::size_t i = 0; i < val_idx.size(); ++i) yval[i] = train.y[val_idx[i]];

    // Adam state.
    std::vector<Matrix> mw, vw, gw;
    std::vector<std::vector<double>> mb, vb, gb;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        mw.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        vw.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        gw.emplace_back(net.weights[l].rows(), net.weights[l].cols());
        mb.emplace_back(net.biases[l].size(), 0.0);
        vb.emplace_back(net.biases[l].size(), 0.0);
        gb.emplace_back(net.biases[l].size(), 0.0);
    }

    TrainReport report;
    Rng epoch_rng = rng.child("epochs");
    mlp_detail::Workspace ws;
    std::vector<double> dropout_scale(train.x.cols(), 1.0);
    Mlp best_net = net;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    long long step = 0;

    std::vector<std::size_t> order(xfit.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
        Rng er = epoch_rng.child("epoch", static_cast<std::uint64_t>(epoch));
        er.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
            std::size_t bsz = end - start;
            for (std::size_t l = 0; l < gw.size(); ++l) {
                std::fill(gw[l].data().begin(), gw[l].data().end(), 0.0);
                std::fill(gb[l].begin(), gb[l].end(), 0.0);
            }
            double scale = 2.0 / static_cast<double>(bsz);
            for (std::size_t k = start; k < end; ++k) {
                std::size_t i = order[k];
                const std::vector<double>* mask = nullptr;
                if (hp.input_dropout_p > 0.0) {
                    double keep = 1.0 - hp.input_dropout_p;
                    for (double& v : dropout_scale)
                        v = er.bernoulli(hp.input_dropout_p) ? 0.0 : 1.0 / keep;   // inverted dropout
                    mask = &dropout_scale;
                }
                double pred = mlp_detail::forward(net, xfit.row(i), ws, mask);
                mlp_detail::backward(net, ws, scale * (pred - yfit[i]), gw, gb);
            }
            ++step;
            double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
            double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
            for (std::size_t l = 0; l < net.weights.size(); ++l) {
                auto& w = net.weights[l].data();
                auto& g = gw[l].data();
                auto& m1 = mw[l].data();
                auto& m2 = vw[l].data();
                for (std::size_t i = 0; i < w.size(); ++i) {
                    m1[i] = hp.beta1 * m1[i] + (1.0 - hp.beta1) * g[i];
                    m2[i] = hp.beta2 * m2[i] + (1.0 - hp.beta2) * g[i] * g[i];
                    w[i] -= hp.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + hp.adam_eps);
                }
                for (std::size_t i = 0; i < net.biases[l].size(); ++i) {
                    mb[l][i] = hp.beta1 * mb[l][i] + (1.0 - hp.beta1) * gb[l][i];
                    vb[l][i] = hp.beta2 * vb[l][i] + (1.0 - hp.beta2) * gb[l][i] * gb[l][i];
                    net.biases[l][i] -= hp.learning_rate * (mb[l][i] / bc1) / (std::sqrt(vb[l][i] / bc2) + hp.adam_eps);
                }
            }
        }
        double train_loss = mlp_detail::mse(net, xfit, yfit);
        if (!std::isfinite(train_loss))
            throw std::runtime_error("fit_mlp: training diverged (non-finite loss)");
        report.loss_history.push_back(train_loss);
        double val_loss = n_val ? mlp_detail::mse(net, xval, yval) : train_loss;
        if (val_loss < best_val) {
            best_val = val_loss;
            best_net = net;
            since_best = 0;
        } else if (++since_best >= hp.patience) {
            break;
        }
    }
    net = best_net;

    report.r2_train = r_squared(train.y, predict(net, train.x));
    if (test && test->x.rows() >= 2 && variance(test->y) > 0.0)
        report.r2_test = r_squared(test->y, predict(net, test->x));
    return {std::move(net), std::move(report)};
}

} // namespace cimla
