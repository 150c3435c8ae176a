#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cimla/differential.hpp"
#include "cimla/oracle.hpp"
#include "cimla/rng.hpp"
#include "cimla/shapley.hpp"

using namespace cimla;

TEST_CASE("local_delta basics", "[differential]") {
    Matrix a(2, 2), b(2, 2);
    a(0, 0) = 1;
    a(0, 1) = 2;
    a(1, 0) = -1;
    a(1, 1) = 4;
    b(0, 0) = 0.5;
    b(1, 1) = 1.0;

    Matrix d = local_delta(a, b);
    REQUIRE(d(0, 0) == 0.5);
    REQUIRE(d(0, 1) == 2.0);
    REQUIRE(d(1, 1) == 3.0);

    // identical inputs -> zero
    Matrix z = local_delta(a, a);
    for (double v : z.data()) REQUIRE(v == 0.0);

    // zero control -> equals case
    Matrix zero(2, 2);
    REQUIRE(local_delta(a, zero) == a);

    // antisymmetry
    Matrix swapped = local_delta(b, a);
    for (std::size_t i = 0; i < d.data().size(); ++i)
        REQUIRE(swapped.data()[i] == -d.data()[i]);

    Matrix wrong(3, 2);
    REQUIRE_THROWS_AS(local_delta(a, wrong), std::invalid_argument);
}

TEST_CASE("aggregate_rms arithmetic", "[differential]") {
    Matrix deltas(4, 2);
    deltas(0, 0) = 3;
    deltas(1, 0) = 4;   // column 0: [3,4,0,0] -> sqrt(25/4) = 2.5
    std::vector<double> lambda = aggregate_rms(deltas);
    REQUIRE_THAT(lambda[0], Catch::Matchers::WithinAbs(2.5, 1e-12));
    REQUIRE(lambda[1] == 0.0);
    Matrix empty(0, 2);
    REQUIRE_THROWS_AS(aggregate_rms(empty), std::invalid_argument);
}

TEST_CASE("aggregate_mean_abs arithmetic and the Jensen bound", "[differential]") {
    Matrix deltas(4, 1);
    deltas(0, 0) = 3;
    deltas(1, 0) = 4;
    std::vector<double> ma = aggregate_mean_abs(deltas);
    REQUIRE_THAT(ma[0], Catch::Matchers::WithinAbs(1.75, 1e-12));

    // mean_abs <= rms on random matrices
    Rng r(3);
    Matrix random(50, 6);
    for (double& v : random.data()) v = r.next_normal();
    std::vector<double> rms = aggregate_rms(random);
    std::vector<double> abs = aggregate_mean_abs(random);
    for (std::size_t j = 0; j < 6; ++j) REQUIRE(abs[j] <= rms[j] + 1e-12);
}

TEST_CASE("lambda is invariant under sample permutation and scales linearly", "[differential]") {
    Rng r(5);
    Matrix deltas(40, 3);
    for (double& v : deltas.data()) v = r.next_normal();
    std::vector<double> base = aggregate_rms(deltas);

    std::vector<std::size_t> perm = Rng(7).permutation(40);
    Matrix shuffled = deltas.select_rows(perm);
    std::vector<double> shuffled_lambda = aggregate_rms(shuffled);
    for (std::size_t j = 0; j < 3; ++j)
        REQUIRE_THAT(shuffled_lambda[j], Catch::Matchers::WithinAbs(base[j], 1e-12));

    Matrix scaled = deltas;
    for (double& v : scaled.data()) v *= 2.5;
    std::vector<double> scaled_lambda = aggregate_rms(scaled);
    for (std::size_t j = 0; j < 3; ++j)
        REQUIRE_THAT(scaled_lambda[j], Catch::Matchers::WithinAbs(2.5 * base[j], 1e-9));
}

TEST_CASE("linear models on standardized data: lambda approximates |w1 - w0|", "[differential]") {
    // phi_i = w_i (x_i - mean_B X_i); with zero-mean backgrounds and
    // unit-variance samples, Lambda_t -> |w1_t - w0_t|
    const std::size_t n = 5000, m = 4;
    Rng r(11);
    Matrix samples(n, m);
    for (double& v : samples.data()) v = r.next_normal();
    // standardize columns exactly
    for (std::size_t j = 0; j < m; ++j) {
        double mu = 0, var = 0;
        for (std::size_t i = 0; i < n; ++i) mu += samples(i, j);
        mu /= n;
        for (std::size_t i = 0; i < n; ++i) var += (samples(i, j) - mu) * (samples(i, j) - mu);
        var /= n;
        double sd = std::sqrt(var);
        for (std::size_t i = 0; i < n; ++i) samples(i, j) = (samples(i, j) - mu) / sd;
    }
    Matrix bg1(256, m), bg0(256, m);
    Rng rb(13);
    for (double& v : bg1.data()) v = rb.next_normal();
    for (double& v : bg0.data()) v = rb.next_normal();
    for (Matrix* bg : {&bg1, &bg0})   // center the backgrounds exactly
        for (std::size_t j = 0; j < m; ++j) {
            double mu = 0;
            for (std::size_t i = 0; i < bg->rows(); ++i) mu += (*bg)(i, j);
            mu /= bg->rows();
            for (std::size_t i = 0; i < bg->rows(); ++i) (*bg)(i, j) -= mu;
        }

    LinearModel f1{{2.0, -1.0, 0.8, 0.0}, 0.0};
    LinearModel f0{{1.2, -1.0, -0.4, 0.6}, 0.0};
    AttributionConfig cfg;
    cfg.estimator = AttributionConfig::Estimator::exact;
    auto [a1, meta1] = attribute_dataset(f1, samples, BackgroundSet{bg1}, cfg, Rng(1));
    auto [a0, meta0] = attribute_dataset(f0, samples, BackgroundSet{bg0}, cfg, Rng(1));
    std::vector<double> lambda = aggregate_rms(local_delta(a1, a0));
    for (std::size_t j = 0; j < m; ++j) {
        double expect = std::fabs(f1.w[j] - f0.w[j]);
        REQUIRE_THAT(lambda[j], Catch::Matchers::WithinAbs(expect, 0.05 * std::max(expect, 0.2)));
    }
}

TEST_CASE("dgrn_score formula and monotonicity", "[differential]") {
    REQUIRE(dgrn_score(5, 5) == 0.0);
    REQUIRE_THAT(dgrn_score(1, 1289), Catch::Matchers::WithinAbs(std::log(1289.0), 1e-9));
    REQUIRE_THAT(dgrn_score(1, 1289), Catch::Matchers::WithinAbs(7.1616, 5e-4));
    for (std::size_t r = 1; r < 10; ++r) REQUIRE(dgrn_score(r, 10) > dgrn_score(r + 1, 10));
    REQUIRE_THROWS_AS(dgrn_score(0, 5), std::invalid_argument);
    REQUIRE_THROWS_AS(dgrn_score(6, 5), std::invalid_argument);
}

TEST_CASE("score_gene ranks by lambda with deterministic tie-breaks", "[differential]") {
    std::vector<std::string> tfs = {"B", "A", "C"};
    std::vector<double> lambda = {0.5, 0.9, 0.5};
    auto rows = score_gene("G1", tfs, lambda, std::nullopt);
    REQUIRE(rows[0].tf == "A");
    REQUIRE(rows[0].rank == 1);
    REQUIRE(rows[1].tf == "B");   // ties broken by TF id
    REQUIRE(rows[1].rank == 2);
    REQUIRE(rows[2].tf == "C");
    REQUIRE(rows[2].rank == 3);
    for (const auto& row : rows) {
        REQUIRE(!row.passes_threshold);
        REQUIRE(!row.dgrn.has_value());
    }
}

TEST_CASE("threshold comparison is strict and dgrn filled only on pass", "[differential]") {
    std::vector<std::string> tfs = {"A", "B", "C"};
    std::vector<double> lambda = {0.9, 0.5, 0.2};
    auto rows = score_gene("G1", tfs, lambda, 0.5);
    REQUIRE(rows[0].passes_threshold);
    REQUIRE_THAT(*rows[0].dgrn, Catch::Matchers::WithinAbs(-std::log(1.0 / 3.0), 1e-12));
    REQUIRE(!rows[1].passes_threshold);   // 0.5 > 0.5 is false (boundary fails)
    REQUIRE(!rows[1].dgrn.has_value());
    REQUIRE(!rows[2].passes_threshold);
}

TEST_CASE("within-gene ranking is invariant to increasing transforms of lambda", "[differential]") {
    Rng r(17);
    std::vector<std::string> tfs;
    std::vector<double> lambda;
    for (int j = 0; j < 12; ++j) {
        tfs.push_back("TF" + std::to_string(j));
        lambda.push_back(r.uniform(0.0, 3.0));
    }
    auto base = score_gene("G", tfs, lambda, std::nullopt);
    std::vector<double> warped(lambda.size());
    for (std::size_t j = 0; j < lambda.size(); ++j) warped[j] = std::exp(2.0 * lambda[j]) + 1.0;
    auto transformed = score_gene("G", tfs, warped, std::nullopt);
    for (std::size_t k = 0; k < base.size(); ++k) {
        REQUIRE(base[k].tf == transformed[k].tf);
        REQUIRE(base[k].rank == transformed[k].rank);
    }
}

TEST_CASE("score table file has the documented schema", "[differential]") {
    CimlaScoreTable table;
    table.rows = score_gene("G1", {"A", "B"}, {0.9, 0.1}, 0.5);
    auto dir = std::filesystem::temp_directory_path();
    std::string path = dir / "cimla_scores_test.tsv";
    save_score_table(table, path);
    auto rows = read_tsv(path);
    REQUIRE(rows[0] == std::vector<std::string>{"tf", "gene", "lambda", "background_max", "pass",
                                                "rank", "dgrn_score"});
    REQUIRE(rows[1][0] == "A");
    REQUIRE(rows[1][4] == "1");
    REQUIRE(rows[2][4] == "0");
    REQUIRE(rows[2][6] == "NA");
    std::filesystem::remove(path);
}
