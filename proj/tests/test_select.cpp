#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "ensemblekit/datagen.hpp"
#include "ensemblekit/select.hpp"
#include "ensemblekit/stack.hpp"
#include "oracles.hpp"

using namespace ensemblekit;

namespace {

PredictionMatrix matrix_of(std::vector<std::vector<double>> columns) {
    PredictionMatrix m;
    m.columns = std::move(columns);
    for (std::size_t j = 0; j < m.columns.size(); ++j)
        m.classifier_ids.push_back("c" + std::to_string(j));
    m.group_of = m.classifier_ids;
    for (std::size_t i = 0; i < m.columns[0].size(); ++i)
        m.instance_ids.push_back("i" + std::to_string(i));
    return m;
}

// columns with pair-count AUCs 0.7, 0.9, 0.8 in matrix order
struct KnownPool {
    PredictionMatrix matrix;
    LabelVector labels = {1, 1, 1, 1, 1, 0, 0, 0, 0};
};

KnownPool known_pool() {
    KnownPool pool;
    pool.matrix = matrix_of({
        {0.9, 0.85, 0.8, 0.23, 0.1, 0.3, 0.25, 0.2, 0.15},  // 6 lost pairs -> 0.7
        {0.9, 0.85, 0.8, 0.75, 0.22, 0.3, 0.25, 0.2, 0.15}, // 2 lost pairs -> 0.9
        {0.9, 0.85, 0.8, 0.75, 0.1, 0.3, 0.25, 0.2, 0.15},  // 4 lost pairs -> 0.8
    });
    return pool;
}

// replays a CES run, re-evaluating every candidate from scratch at every
// iteration; returns false on the first disagreement
bool ces_matches_exhaustive_recheck(const PredictionMatrix& m, const LabelVector& y,
                                    const CesParams& params, const SelectionTrajectory& traj) {
    std::vector<double> sum(m.rows(), 0.0);
    std::size_t size = 0;
    std::vector<int> counts(m.cols(), 0);
    for (std::size_t t = 0; t < traj.chosen_columns.size(); ++t) {
        if (static_cast<int>(t) >= params.init_n) {
            int best = -1;
            double best_auc = -1.0;
            for (std::size_t j = 0; j < m.cols(); ++j) {
                if (!params.with_replacement && counts[j] > 0) continue;
                std::vector<double> mean(m.rows());
                for (std::size_t i = 0; i < m.rows(); ++i)
                    mean[i] = (sum[i] + m.column(j)[i]) / static_cast<double>(size + 1);
                const double a = oracles::pair_count_auc(mean, y);
                if (a > best_auc) { // strict: lowest index wins ties
                    best_auc = a;
                    best = static_cast<int>(j);
                }
            }
            if (best != traj.chosen_columns[t]) return false;
            if (std::abs(best_auc - traj.records[t].val_auc) > 1e-12) return false;
        }
        const auto& col = m.column(traj.chosen_columns[t]);
        for (std::size_t i = 0; i < m.rows(); ++i) sum[i] += col[i];
        ++counts[traj.chosen_columns[t]];
        ++size;
    }
    return true;
}

} // namespace

TEST_CASE("greedy selection follows descending individual AUC") {
    const auto pool = known_pool();
    REQUIRE(oracles::pair_count_auc(pool.matrix.columns[0], pool.labels) == 0.7);
    REQUIRE(oracles::pair_count_auc(pool.matrix.columns[1], pool.labels) == 0.9);
    REQUIRE(oracles::pair_count_auc(pool.matrix.columns[2], pool.labels) == 0.8);

    const auto traj = greedy_select(pool.matrix, pool.labels, 3);
    REQUIRE(traj.chosen_columns == std::vector<int>{1, 2, 0});
    REQUIRE(traj.records[0].chosen == "c1");
    REQUIRE(traj.records[0].val_auc == 0.9);
}

TEST_CASE("greedy with max_size 1 is the single best classifier") {
    const auto pool = known_pool();
    const auto traj = greedy_select(pool.matrix, pool.labels, 1);
    REQUIRE(traj.records.size() == 1);
    REQUIRE(traj.records[0].chosen == "c1");
    REQUIRE(traj.records[0].val_auc == 0.9);
}

TEST_CASE("greedy ties break by column order") {
    const std::vector<double> a = {0.9, 0.8, 0.2, 0.3};
    const std::vector<double> weak = {0.4, 0.6, 0.6, 0.4};
    const auto m = matrix_of({a, a, weak});
    const LabelVector y = {1, 1, 0, 0};
    const auto traj = greedy_select(m, y, 3);
    REQUIRE(traj.chosen_columns == std::vector<int>{0, 1, 2});
}

TEST_CASE("greedy errors on empty pool and oversized budget") {
    const auto pool = known_pool();
    REQUIRE_THROWS_AS(greedy_select(pool.matrix, pool.labels, 4), method_error);
    PredictionMatrix empty;
    REQUIRE_THROWS_AS(greedy_select(empty, {}, 1), method_error);
}

TEST_CASE("ces picks the perfect column from a perfect/anti-perfect pair") {
    const auto m = matrix_of({{0.1, 0.9, 0.2, 0.8}, {0.9, 0.1, 0.8, 0.2}});
    const LabelVector y = {1, 0, 1, 0};
    CesParams params;
    params.init_n = 0;
    params.max_size = 1;
    const auto [traj, model] = ces_select(m, y, params);
    REQUIRE(traj.records.size() == 1);
    REQUIRE(traj.records[0].chosen == "c1");
    REQUIRE(traj.records[0].val_auc == 1.0);
    REQUIRE(model.members == std::vector<std::pair<std::string, double>>{{"c1", 1.0}});
}

TEST_CASE("ces choices match exhaustive re-evaluation on seeded pools") {
    for (std::uint64_t seed : {101, 202, 303}) {
        PoolSpec spec;
        spec.n_instances = 200;
        spec.seed = seed;
        for (int j = 0; j < 10; ++j)
            spec.classifiers.push_back({0.2 + 0.15 * j, j % 3 == 0 ? 0.8 : 0.0, 1.0, 0.0});
        const auto pool = generate(spec);

        CesParams params;
        params.init_n = 2;
        params.max_size = 25;
        params.seed = seed;
        const auto [traj, model] = ces_select(pool.matrix, pool.labels, params);
        REQUIRE(traj.records.size() == 25);
        REQUIRE(ces_matches_exhaustive_recheck(pool.matrix, pool.labels, params, traj));

        // max_size 25 over 10 columns forces at least one duplicate selection
        std::map<std::string, int> counts;
        for (int j : traj.chosen_columns) ++counts[pool.matrix.classifier_ids[j]];
        bool any_duplicate = false;
        for (const auto& [id, c] : counts) any_duplicate |= c > 1;
        REQUIRE(any_duplicate);

        double weight_sum = 0.0;
        for (const auto& [id, w] : model.members) weight_sum += w;
        REQUIRE(weight_sum == Catch::Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("ces is deterministic in matrix, labels, params and seed") {
    PoolSpec spec;
    spec.n_instances = 150;
    spec.seed = 9;
    for (int j = 0; j < 8; ++j) spec.classifiers.push_back({0.3 + 0.1 * j, 0.0, 1.0, 0.0});
    const auto pool = generate(spec);
    CesParams params;
    params.max_size = 20;
    params.candidate_fraction = 0.5;
    params.seed = 77;
    const auto [a, ma] = ces_select(pool.matrix, pool.labels, params);
    const auto [b, mb] = ces_select(pool.matrix, pool.labels, params);
    REQUIRE(a.chosen_columns == b.chosen_columns);
    for (std::size_t t = 0; t < a.records.size(); ++t) {
        REQUIRE(a.records[t].val_auc == b.records[t].val_auc);
        REQUIRE(a.records[t].brier == b.records[t].brier);
    }
    REQUIRE(ma.members == mb.members);

    params.seed = 78;
    const auto [c, mc] = ces_select(pool.matrix, pool.labels, params);
    (void)mc;
    REQUIRE(a.chosen_columns != c.chosen_columns); // sampled candidates differ
}

TEST_CASE("greedy and ces agree at iteration 1 with empty initialization") {
    PoolSpec spec;
    spec.n_instances = 120;
    spec.seed = 4;
    for (int j = 0; j < 6; ++j) spec.classifiers.push_back({0.2 + 0.2 * j, 0.0, 1.0, 0.0});
    const auto pool = generate(spec);

    CesParams params;
    params.init_n = 0;
    params.max_size = 1;
    const auto [ces_traj, model] = ces_select(pool.matrix, pool.labels, params);
    (void)model;
    const auto greedy_traj = greedy_select(pool.matrix, pool.labels, 1);
    REQUIRE(ces_traj.records[0].chosen == greedy_traj.records[0].chosen);
    REQUIRE(ces_traj.records[0].val_auc == greedy_traj.records[0].val_auc);
}

TEST_CASE("final Weight^c weighted mean equals the final running mean") {
    PoolSpec spec;
    spec.n_instances = 100;
    spec.seed = 21;
    for (int j = 0; j < 7; ++j) spec.classifiers.push_back({0.4 + 0.1 * j, 0.3, 1.0, 0.0});
    const auto pool = generate(spec);
    CesParams params;
    params.max_size = 18;
    const auto [traj, model] = ces_select(pool.matrix, pool.labels, params);

    std::vector<std::string> multiset;
    for (int j : traj.chosen_columns) multiset.push_back(pool.matrix.classifier_ids[j]);
    const auto running = mean_aggregate(pool.matrix, multiset); // final RunningMean state
    const auto weighted = apply_model(model, pool.matrix);
    for (std::size_t i = 0; i < running.size(); ++i)
        REQUIRE(weighted[i] == Catch::Approx(running[i]).margin(1e-12));
}

TEST_CASE("weights_from_counts worked examples") {
    REQUIRE(weights_from_counts({"A"}).members ==
            std::vector<std::pair<std::string, double>>{{"A", 1.0}});

    const auto two = weights_from_counts({"A", "A", "B"});
    REQUIRE(two.members[0].first == "A");
    REQUIRE(two.members[0].second == Catch::Approx(2.0 / 3.0).margin(1e-15));
    REQUIRE(two.members[1].second == Catch::Approx(1.0 / 3.0).margin(1e-15));

    REQUIRE_THROWS_AS(weights_from_counts({}), method_error);
}

TEST_CASE("weights_from_counts reproduces the published Weight^c profile") {
    // rf 0.21, gbm 0.27, RBFClassifier 0.05, SGD 0.04, VFI 0.11, IBk 0.13,
    // remainder 0.19 spread over unlisted classifiers
    std::vector<std::string> multiset;
    auto add = [&multiset](const std::string& id, int count) {
        for (int i = 0; i < count; ++i) multiset.push_back(id);
    };
    add("rf", 21);
    add("gbm", 27);
    add("RBFClassifier", 5);
    add("SGD", 4);
    add("VFI", 11);
    add("IBk", 13);
    add("other", 19);
    const auto model = weights_from_counts(multiset);
    std::map<std::string, double> w(model.members.begin(), model.members.end());
    REQUIRE(w["rf"] == Catch::Approx(0.21).margin(1e-15));
    REQUIRE(w["gbm"] == Catch::Approx(0.27).margin(1e-15));
    REQUIRE(w["RBFClassifier"] == Catch::Approx(0.05).margin(1e-15));
    REQUIRE(w["SGD"] == Catch::Approx(0.04).margin(1e-15));
    REQUIRE(w["VFI"] == Catch::Approx(0.11).margin(1e-15));
    REQUIRE(w["IBk"] == Catch::Approx(0.13).margin(1e-15));
}

TEST_CASE("ces validates its parameters") {
    const auto pool = known_pool();
    CesParams params;
    params.init_n = 5;
    REQUIRE_THROWS_AS(ces_select(pool.matrix, pool.labels, params), method_error);
    params.init_n = 2;
    params.max_size = 1;
    REQUIRE_THROWS_AS(ces_select(pool.matrix, pool.labels, params), method_error);
    params.max_size = 10;
    params.candidate_fraction = 0.0;
    REQUIRE_THROWS_AS(ces_select(pool.matrix, pool.labels, params), method_error);
}

TEST_CASE("ces without replacement stops when the pool is exhausted") {
    const auto pool = known_pool();
    CesParams params;
    params.init_n = 1;
    params.max_size = 10;
    params.with_replacement = false;
    const auto [traj, model] = ces_select(pool.matrix, pool.labels, params);
    (void)model;
    REQUIRE(traj.records.size() == 3); // pool size
    std::vector<int> sorted(traj.chosen_columns);
    std::sort(sorted.begin(), sorted.end());
    REQUIRE(sorted == std::vector<int>{0, 1, 2});
}
