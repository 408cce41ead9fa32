#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ensemblekit/datagen.hpp"
#include "ensemblekit/metrics.hpp"

using namespace ensemblekit;

TEST_CASE("zero signal means chance-level AUC everywhere") {
    PoolSpec spec;
    spec.n_instances = 5000;
    spec.seed = 1;
    for (int j = 0; j < 4; ++j) spec.classifiers.push_back({0.0, j % 2 ? 0.7 : 0.0, 1.0, 0.0});
    const auto pool = generate(spec);
    for (std::size_t j = 0; j < pool.matrix.cols(); ++j)
        REQUIRE(auc(pool.matrix.column(j), pool.labels) == Catch::Approx(0.5).margin(0.03));
}

TEST_CASE("calibrated columns score close to the single-column Bayes Brier") {
    PoolSpec spec;
    spec.n_instances = 20000;
    spec.seed = 2;
    spec.classifiers.push_back({0.9, 0.0, 1.0, 0.0});
    const auto pool = generate(spec);

    // oracle posterior restricted to this single classifier
    std::vector<double> oracle_scores(pool.matrix.rows());
    for (std::size_t i = 0; i < oracle_scores.size(); ++i)
        oracle_scores[i] = pool.oracle.posterior(i);
    const double column_brier = brier(pool.matrix.column(0), pool.labels);
    const double oracle_brier = brier(oracle_scores, pool.labels);
    REQUIRE(column_brier == Catch::Approx(oracle_brier).margin(0.02));
}

TEST_CASE("monotone miscalibration leaves AUC unchanged on the same draws") {
    PoolSpec calibrated;
    calibrated.n_instances = 800;
    calibrated.seed = 3;
    calibrated.classifiers.push_back({0.8, 0.4, 1.0, 0.0});

    PoolSpec miscalibrated = calibrated;
    miscalibrated.classifiers[0].calib_alpha = 3.0;
    miscalibrated.classifiers[0].calib_beta = 1.0;

    const auto a = generate(calibrated);
    const auto b = generate(miscalibrated);
    REQUIRE(a.labels == b.labels);
    REQUIRE(auc(a.matrix.column(0), a.labels) == auc(b.matrix.column(0), b.labels));
    REQUIRE(brier(a.matrix.column(0), a.labels) != brier(b.matrix.column(0), b.labels));
}

TEST_CASE("single-classifier oracle reduces to the one-dimensional closed form") {
    PoolSpec spec;
    spec.n_instances = 50;
    spec.seed = 4;
    spec.positive_rate = 0.3;
    spec.classifiers.push_back({1.2, 0.0, 1.0, 0.0});
    const auto pool = generate(spec);
    for (std::size_t i = 0; i < pool.matrix.rows(); ++i) {
        const double z = pool.oracle.latents(i)[0];
        const double expected = sigmoid(2.0 * 1.2 * z + logit(0.3));
        REQUIRE(pool.oracle.posterior(i) == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("zero latent vector gives the prior as posterior") {
    PoolSpec spec;
    spec.n_instances = 10;
    spec.seed = 5;
    spec.positive_rate = 0.37;
    spec.classifiers.push_back({0.9, 0.5, 1.0, 0.0});
    spec.classifiers.push_back({0.7, 0.5, 1.0, 0.0});
    const auto pool = generate(spec);
    REQUIRE(pool.oracle.posterior_from_latents({0.0, 0.0}) ==
            Catch::Approx(0.37).margin(1e-12));
}

TEST_CASE("the oracle posterior dominates every individual column") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        PoolSpec spec;
        spec.n_instances = 2000;
        spec.seed = seed;
        for (int j = 0; j < 6; ++j)
            spec.classifiers.push_back({0.3 + 0.2 * j, j % 2 ? 0.8 : 0.0, 1.0, 0.0});
        const auto pool = generate(spec);

        std::vector<double> oracle_scores(pool.matrix.rows());
        for (std::size_t i = 0; i < oracle_scores.size(); ++i)
            oracle_scores[i] = pool.oracle.posterior(i);
        const double oracle_auc = auc(oracle_scores, pool.labels);
        for (std::size_t j = 0; j < pool.matrix.cols(); ++j)
            REQUIRE(oracle_auc >= auc(pool.matrix.column(j), pool.labels));
    }
}

TEST_CASE("generation is bit-identical per seed") {
    PoolSpec spec;
    spec.n_instances = 300;
    spec.seed = 21;
    spec.bags = 3;
    spec.classifiers.push_back({0.8, 0.3, 2.0, -0.5});
    spec.classifiers.push_back({0.4, 0.0, 1.0, 0.0});
    const auto a = generate(spec);
    const auto b = generate(spec);
    REQUIRE(a.labels == b.labels);
    REQUIRE(a.matrix.columns == b.matrix.columns);
    REQUIRE(a.matrix.classifier_ids == b.matrix.classifier_ids);

    spec.seed = 22;
    const auto c = generate(spec);
    REQUIRE(a.matrix.columns != c.matrix.columns);
}

TEST_CASE("bags share parameters but draw independent noise") {
    PoolSpec spec;
    spec.n_instances = 400;
    spec.seed = 23;
    spec.bags = 4;
    spec.classifiers.push_back({0.9, 0.5, 1.0, 0.0});
    const auto pool = generate(spec);
    REQUIRE(pool.matrix.cols() == 4);
    for (std::size_t j = 0; j < 4; ++j) REQUIRE(pool.matrix.group_of[j] == "c00");
    REQUIRE(pool.matrix.columns[0] != pool.matrix.columns[1]);
}

TEST_CASE("stronger signal strictly increases expected AUC along a grid") {
    PoolSpec spec;
    spec.n_instances = 5000;
    spec.seed = 29;
    for (double a : {0.0, 0.3, 0.6, 0.9, 1.2}) spec.classifiers.push_back({a, 0.0, 1.0, 0.0});
    const auto pool = generate(spec);
    double prev = -1.0;
    for (std::size_t j = 0; j < pool.matrix.cols(); ++j) {
        const double column_auc = auc(pool.matrix.column(j), pool.labels);
        REQUIRE(column_auc > prev - 0.02);
        prev = column_auc;
    }
}

TEST_CASE("shared noise lowers pairwise diversity") {
    int shared_lower = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        PoolSpec spec;
        spec.n_instances = 1200;
        spec.seed = 500 + s;
        spec.classifiers.push_back({0.0, 1.0, 1.0, 0.0}); // shared pair
        spec.classifiers.push_back({0.0, 1.0, 1.0, 0.0});
        spec.classifiers.push_back({0.0, 0.0, 1.0, 0.0}); // independent pair
        spec.classifiers.push_back({0.0, 0.0, 1.0, 0.0});
        const auto pool = generate(spec);
        const double shared = pair_diversity(pool.matrix.column(0), pool.matrix.column(1),
                                             pool.labels)
                                  .q_adjusted;
        const double independent = pair_diversity(pool.matrix.column(2),
                                                  pool.matrix.column(3), pool.labels)
                                        .q_adjusted;
        if (shared < independent) ++shared_lower;
    }
    REQUIRE(shared_lower > seeds / 2); // median seed
}

TEST_CASE("spec validation") {
    PoolSpec spec;
    spec.n_instances = 0;
    spec.classifiers.push_back({1.0, 0.0, 1.0, 0.0});
    REQUIRE_THROWS_AS(generate(spec), config_error);
    spec.n_instances = 10;
    spec.classifiers[0].calib_alpha = 0.0;
    REQUIRE_THROWS_AS(generate(spec), config_error);
    spec.classifiers[0].calib_alpha = 1.0;
    spec.positive_rate = 1.0;
    REQUIRE_THROWS_AS(generate(spec), config_error);
}
