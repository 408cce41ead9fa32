#pragma once

// Test-side oracles, deliberately independent of the library implementation
// paths they check: brute-force pair counting for AUC, direct formula
// evaluation for Brier and Q, permutation resampling for Friedman p-values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ensemblekit/rng.hpp"

namespace oracles {

// all-pairs Mann-Whitney statistic, ties count 1/2
inline double pair_count_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j])
                wins += 1.0;
            else if (scores[i] == scores[j])
                wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

inline double direct_brier(const std::vector<double>& scores, const std::vector<int>& labels) {
    double s = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        s += (scores[i] - labels[i]) * (scores[i] - labels[i]);
    return s / static_cast<double>(scores.size());
}

struct Table {
    long n11 = 0, n10 = 0, n01 = 0, n00 = 0;
};

inline Table contingency(const std::vector<int>& pred_i, const std::vector<int>& pred_k,
                         const std::vector<int>& labels) {
    Table t;
    for (std::size_t n = 0; n < labels.size(); ++n) {
        const bool a = pred_i[n] == labels[n];
        const bool b = pred_k[n] == labels[n];
        if (a && b) ++t.n11;
        else if (a) ++t.n10;
        else if (b) ++t.n01;
        else ++t.n00;
    }
    return t;
}

inline double yule_q(const Table& t) {
    const double a = double(t.n11) * double(t.n00);
    const double b = double(t.n01) * double(t.n10);
    return (a - b) / (a + b);
}

inline std::vector<int> threshold(const std::vector<double>& scores, double tau = 0.5) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > tau ? 1 : 0;
    return out;
}

// Friedman chi-square recomputed from scratch for the permutation oracle
inline double friedman_statistic(const std::vector<std::vector<double>>& perf) {
    const int k = static_cast<int>(perf.size());
    const int n = static_cast<int>(perf[0].size());
    std::vector<double> mean_rank(k, 0.0);
    for (int d = 0; d < n; ++d) {
        std::vector<int> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&perf, d](int a, int b) { return perf[a][d] < perf[b][d]; });
        int i = 0;
        while (i < k) {
            int j = i;
            while (j + 1 < k && perf[order[j + 1]][d] == perf[order[i]][d]) ++j;
            const double mid = 0.5 * (i + 1 + j + 1);
            for (int t = i; t <= j; ++t) mean_rank[order[t]] += mid;
            i = j + 1;
        }
    }
    double spread = 0.0;
    for (int j = 0; j < k; ++j) {
        const double d = mean_rank[j] / n - (k + 1) / 2.0;
        spread += d * d;
    }
    return 12.0 * n / (k * (k + 1.0)) * spread;
}

// permutation p-value: shuffle method values within each dataset
inline double friedman_permutation_p(const std::vector<std::vector<double>>& perf, int draws,
                                     std::uint64_t seed) {
    const int k = static_cast<int>(perf.size());
    const int n = static_cast<int>(perf[0].size());
    const double observed = friedman_statistic(perf);
    ensemblekit::Rng rng(seed);
    int at_least = 0;
    auto shuffled = perf;
    for (int t = 0; t < draws; ++t) {
        for (int d = 0; d < n; ++d) {
            for (int j = k - 1; j > 0; --j) {
                const int r = static_cast<int>(rng.below(j + 1));
                std::swap(shuffled[j][d], shuffled[r][d]);
            }
        }
        if (friedman_statistic(shuffled) >= observed - 1e-12) ++at_least;
    }
    return static_cast<double>(at_least) / static_cast<double>(draws);
}

inline std::vector<double> ranks_of(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double mid = 0.5 * (i + 1 + j + 1);
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
        i = j + 1;
    }
    return ranks;
}

// Spearman rank correlation
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = ranks_of(x);
    const auto ry = ranks_of(y);
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
        sxy += (rx[i] - mx) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

// one-sided sign test: P(Bin(n, 1/2) >= wins)
inline double sign_test_p(int wins, int n) {
    double p = 0.0;
    for (int k = wins; k <= n; ++k) {
        double log_term = -n * std::log(2.0);
        for (int i = 0; i < k; ++i) log_term += std::log(double(n - i)) - std::log(double(i + 1));
        p += std::exp(log_term);
    }
    return p;
}

} // namespace oracles
