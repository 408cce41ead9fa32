#include <catch2/catch_amalgamated.hpp>

#include "ensemblekit/combine.hpp"
#include "ensemblekit/rng.hpp"

using namespace ensemblekit;

namespace {

PredictionMatrix matrix_of(std::vector<std::vector<double>> columns,
                           std::vector<std::string> groups = {}) {
    PredictionMatrix m;
    m.columns = std::move(columns);
    for (std::size_t j = 0; j < m.columns.size(); ++j)
        m.classifier_ids.push_back("c" + std::to_string(j));
    m.group_of = groups.empty() ? m.classifier_ids : std::move(groups);
    for (std::size_t i = 0; i < m.columns[0].size(); ++i)
        m.instance_ids.push_back("i" + std::to_string(i));
    return m;
}

} // namespace

TEST_CASE("mean_aggregate worked examples") {
    const auto m = matrix_of({{0.2, 0.4}, {0.6, 0.0}});
    REQUIRE(mean_aggregate(m, {"c0"}) == m.columns[0]);
    REQUIRE(mean_aggregate(m, {"c0", "c1"}) == std::vector<double>{0.4, 0.2});
    REQUIRE_THROWS_AS(mean_aggregate(m, {}), data_error);
    REQUIRE_THROWS_AS(mean_aggregate(m, {"missing"}), data_error);
}

TEST_CASE("mean_aggregate counts duplicates with multiplicity") {
    Rng rng(2);
    std::vector<double> a(10), b(10);
    for (std::size_t i = 0; i < 10; ++i) {
        a[i] = rng.uniform01();
        b[i] = rng.uniform01();
    }
    const auto m = matrix_of({a, b});
    const auto mixed = mean_aggregate(m, {"c0", "c0", "c1"});
    for (std::size_t i = 0; i < 10; ++i) {
        REQUIRE(mixed[i] == Catch::Approx((2.0 * a[i] + b[i]) / 3.0).margin(1e-15));
        REQUIRE(mixed[i] >= 0.0);
        REQUIRE(mixed[i] <= 1.0);
    }
}

TEST_CASE("bag_aggregate with singleton groups is the identity") {
    const auto m = matrix_of({{0.2, 0.4}, {0.6, 0.0}});
    const auto agg = bag_aggregate(m);
    REQUIRE(agg.classifier_ids == m.classifier_ids);
    REQUIRE(agg.columns == m.columns);
    REQUIRE(agg.group_of == agg.classifier_ids); // identity group map
}

TEST_CASE("bag_aggregate of identical bagged columns returns that column") {
    const std::vector<double> col = {0.3, 0.8, 0.1};
    std::vector<std::vector<double>> cols(10, col);
    const auto m = matrix_of(std::move(cols), std::vector<std::string>(10, "svm"));
    const auto agg = bag_aggregate(m);
    REQUIRE(agg.cols() == 1);
    REQUIRE(agg.classifier_ids[0] == "svm");
    for (std::size_t i = 0; i < col.size(); ++i)
        REQUIRE(agg.columns[0][i] == Catch::Approx(col[i]).margin(1e-15));
}

TEST_CASE("bag_aggregate matches the direct group mean") {
    Rng rng(6);
    std::vector<std::vector<double>> cols(5, std::vector<double>(25));
    for (auto& c : cols)
        for (auto& v : c) v = rng.uniform01();
    const auto m = matrix_of(std::move(cols), {"g", "g", "g", "h", "h"});
    const auto agg = bag_aggregate(m);
    REQUIRE(agg.classifier_ids == std::vector<std::string>{"g", "h"});
    for (std::size_t i = 0; i < 25; ++i) {
        const double g = (m.columns[0][i] + m.columns[1][i] + m.columns[2][i]) / 3.0;
        const double h = (m.columns[3][i] + m.columns[4][i]) / 2.0;
        REQUIRE(agg.columns[0][i] == Catch::Approx(g).margin(1e-12));
        REQUIRE(agg.columns[1][i] == Catch::Approx(h).margin(1e-12));
    }
}

TEST_CASE("running mean matches the batch mean for any push sequence") {
    const std::vector<double> a = {0.1, 0.9};
    RunningMean state;
    REQUIRE_THROWS_AS(state.current(), method_error);
    state.push(a);
    REQUIRE(state.current() == a);
    state.push(a);
    REQUIRE(state.current()[0] == Catch::Approx(a[0]).margin(1e-15));

    Rng rng(8);
    std::vector<std::vector<double>> cols(5, std::vector<double>(30));
    for (auto& c : cols)
        for (auto& v : c) v = rng.uniform01();
    const auto m = matrix_of(cols);

    RunningMean run;
    std::vector<std::string> ids;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        run.push(cols[j]);
        ids.push_back("c" + std::to_string(j));
    }
    const auto batch = mean_aggregate(m, ids);
    const auto incremental = run.current();
    for (std::size_t i = 0; i < 30; ++i)
        REQUIRE(incremental[i] == Catch::Approx(batch[i]).margin(1e-12));
}

TEST_CASE("running mean is order-independent within tolerance") {
    Rng rng(12);
    std::vector<std::vector<double>> cols(7, std::vector<double>(20));
    for (auto& c : cols)
        for (auto& v : c) v = rng.uniform01();

    RunningMean forward, backward;
    for (std::size_t j = 0; j < cols.size(); ++j) forward.push(cols[j]);
    for (std::size_t j = cols.size(); j-- > 0;) backward.push(cols[j]);
    const auto f = forward.current();
    const auto b = backward.current();
    for (std::size_t i = 0; i < 20; ++i) REQUIRE(f[i] == Catch::Approx(b[i]).margin(1e-12));
}

TEST_CASE("free-function running interface") {
    RunningMean state;
    state = running_push(std::move(state), {0.2, 0.4});
    state = running_push(std::move(state), {0.6, 0.0});
    REQUIRE(running_current(state) == std::vector<double>{0.4, 0.2});
}
