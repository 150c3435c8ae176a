#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "cimla/mlp.hpp"
#include "cimla/model_io.hpp"

using namespace cimla;

namespace {

DataSet make_data(std::size_t n, std::size_t m, std::uint64_t seed,
                  double (*f)(std::span<const double>), double noise = 0.0) {
    DataSet d;
    d.x = Matrix(n, m);
    d.y.resize(n);
    Rng r(seed);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) d.x(i, j) = r.uniform(-3.0, 3.0);
        d.y[i] = f(d.x.row(i)) + noise * r.next_normal();
    }
    return d;
}

double linear_fn(std::span<const double> x) { return 2.0 * x[0] - 1.5 * x[1] + 0.5; }
double sine_fn(std::span<const double> x) { return std::sin(x[0]); }

} // namespace

TEST_CASE("mlp fits a linear target", "[mlp]") {
    DataSet train = make_data(2000, 3, 7, linear_fn);
    DataSet test = make_data(400, 3, 8, linear_fn);
    MlpHyper hp;
    hp.hidden = {32, 16};
    hp.max_epochs = 120;
    auto [net, report] = fit_mlp(train, hp, Rng(1), &test);
    REQUIRE(report.r2_test > 0.95);
}

TEST_CASE("mlp fits sin(x) on [-3,3]", "[mlp]") {
    DataSet train = make_data(5000, 1, 17, sine_fn);
    DataSet test = make_data(500, 1, 18, sine_fn);
    MlpHyper hp;
    hp.hidden = {64, 32};
    hp.max_epochs = 200;
    auto [net, report] = fit_mlp(train, hp, Rng(2), &test);
    REQUIRE(report.r2_test > 0.8);
}

TEST_CASE("analytic gradient matches central finite differences", "[mlp]") {
    DataSet data = make_data(40, 3, 27, linear_fn, 0.3);
    MlpHyper hp;
    hp.hidden = {8, 6};
    Mlp net = make_mlp(3, hp, Rng(3));

    std::vector<Matrix> grad_w;
    std::vector<std::vector<double>> grad_b;
    mlp_detail::mse_gradient(net, data.x, data.y, grad_w, grad_b);

    Rng pick(4);
    for (int k = 0; k < 20; ++k) {
        std::size_t layer = pick.index(net.weights.size());
        std::size_t idx = pick.index(net.weights[layer].data().size());
        double h = 1e-6;
        double saved = net.weights[layer].data()[idx];
        net.weights[layer].data()[idx] = saved + h;
        double up = mlp_detail::mse(net, data.x, data.y);
        net.weights[layer].data()[idx] = saved - h;
        double down = mlp_detail::mse(net, data.x, data.y);
        net.weights[layer].data()[idx] = saved;
        double numeric = (up - down) / (2 * h);
        double analytic = grad_w[layer].data()[idx];
        double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
        REQUIRE(std::fabs(numeric - analytic) / denom < 1e-4);
    }
}

TEST_CASE("training loss decreases on a 5-epoch moving average", "[mlp]") {
    DataSet train = make_data(1000, 2, 37, linear_fn, 0.1);
    MlpHyper hp;
    hp.hidden = {16, 8};
    hp.max_epochs = 60;
    hp.patience = 60;   // no early exit; observe the full curve
    auto [net, report] = fit_mlp(train, hp, Rng(5));
    const auto& loss = report.loss_history;
    REQUIRE(loss.size() >= 10);
    auto avg = [&](std::size_t start) {
        double s = 0;
        for (std::size_t i = start; i < start + 5; ++i) s += loss[i];
        return s / 5.0;
    };
    double first = avg(0);
    double last = avg(loss.size() - 5);
    REQUIRE(last < first);
}

TEST_CASE("mlp with zero weights predicts the bias", "[mlp]") {
    MlpHyper hp;
    hp.hidden = {4, 3};
    Mlp net = make_mlp(2, hp, Rng(6));
    for (auto& w : net.weights) std::fill(w.data().begin(), w.data().end(), 0.0);
    for (auto& b : net.biases) std::fill(b.begin(), b.end(), 0.0);
    net.biases.back()[0] = 3.25;
    std::vector<double> x = {1.0, -2.0};
    REQUIRE(net.predict_one(x) == 3.25);
}

TEST_CASE("dropout is training-only: prediction is deterministic", "[mlp]") {
    DataSet train = make_data(600, 3, 47, linear_fn, 0.1);
    MlpHyper hp;
    hp.hidden = {16, 8};
    hp.input_dropout_p = 0.5;
    hp.max_epochs = 30;
    auto [net, report] = fit_mlp(train, hp, Rng(7));
    std::vector<double> x = {0.5, -1.0, 2.0};
    double first = net.predict_one(x);
    for (int k = 0; k < 10; ++k) REQUIRE(net.predict_one(x) == first);
}

TEST_CASE("fixed seed gives bit-identical training", "[mlp]") {
    DataSet train = make_data(500, 2, 57, linear_fn, 0.2);
    MlpHyper hp;
    hp.hidden = {12, 6};
    hp.max_epochs = 25;
    auto [a, ra] = fit_mlp(train, hp, Rng(8));
    auto [b, rb] = fit_mlp(train, hp, Rng(8));
    for (std::size_t l = 0; l < a.weights.size(); ++l)
        REQUIRE(a.weights[l].data() == b.weights[l].data());
    REQUIRE(ra.loss_history == rb.loss_history);
}

TEST_CASE("divergent training reports an error", "[mlp]") {
    DataSet train = make_data(200, 2, 67, linear_fn);
    for (double& v : train.y) v *= 1e160;   // squared residuals overflow to inf
    MlpHyper hp;
    hp.hidden = {8, 4};
    hp.max_epochs = 10;
    REQUIRE_THROWS_AS(fit_mlp(train, hp, Rng(9)), std::runtime_error);
}

TEST_CASE("mlp rejects degenerate targets and bad layer counts", "[mlp]") {
    DataSet train = make_data(100, 2, 77, linear_fn);
    std::fill(train.y.begin(), train.y.end(), 1.0);
    MlpHyper hp;
    REQUIRE_THROWS_AS(fit_mlp(train, hp, Rng(10)), std::invalid_argument);

    MlpHyper one_layer;
    one_layer.hidden = {8};
    REQUIRE_THROWS_AS(make_mlp(2, one_layer, Rng(11)), std::invalid_argument);
}

TEST_CASE("mlp serialization round-trips predictions bit-exactly", "[mlp]") {
    DataSet train = make_data(400, 3, 87, linear_fn, 0.1);
    MlpHyper hp;
    hp.hidden = {10, 5};
    hp.max_epochs = 15;
    auto [net, report] = fit_mlp(train, hp, Rng(12));
    std::string path = std::filesystem::temp_directory_path() / "cimla_mlp_io_test.mlp";
    save_mlp(net, path);
    Mlp back = load_mlp(path);
    std::filesystem::remove(path);
    DataSet probe = make_data(50, 3, 88, linear_fn);
    for (std::size_t i = 0; i < probe.x.rows(); ++i)
        REQUIRE(back.predict_one(probe.x.row(i)) == net.predict_one(probe.x.row(i)));
}
