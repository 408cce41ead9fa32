#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "ensemblekit/errors.hpp"

namespace ensemblekit {

namespace detail {

inline double normal_pdf(double x) {
    return 0.3989422804014326779399460599344 * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// regularized incomplete gamma, upper tail Q(a, x)
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw method_error("bad incomplete gamma arguments");
    if (x == 0.0) return 1.0;
    const double gln = std::lgamma(a);
    if (x < a + 1.0) {
        // series for P(a, x)
        double ap = a, sum = 1.0 / a, del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::abs(del) < std::abs(sum) * 1e-15) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - gln);
    }
    // continued fraction for Q(a, x)
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi2_sf(double x, int df) { return gamma_q(0.5 * df, 0.5 * x); }

// continued fraction for the incomplete beta
inline double betacf(double a, double b, double x) {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < 1e-300) d = 1e-300;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = 1.0 + aa / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = 1.0 + aa / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-14) break;
    }
    return h;
}

inline double betai(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                               a * std::log(x) + b * std::log1p(-x));
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

inline double f_sf(double f, double df1, double df2) {
    if (!std::isfinite(f)) return 0.0;
    if (f <= 0.0) return 1.0;
    return betai(0.5 * df2, 0.5 * df1, df2 / (df2 + df1 * f));
}

// CDF of the studentized range with k groups and infinite degrees of freedom:
// k * integral of phi(z) * [Phi(z) - Phi(z - q)]^(k-1) dz, composite Simpson.
inline double range_cdf(double q, int k) {
    if (q <= 0.0) return 0.0;
    const double lo = -9.0, hi = q + 9.0;
    const int intervals = 4096;
    const double h = (hi - lo) / intervals;
    auto f = [q, k](double z) {
        const double inner = normal_cdf(z) - normal_cdf(z - q);
        return normal_pdf(z) * std::pow(inner, k - 1);
    };
    double sum = f(lo) + f(hi);
    for (int i = 1; i < intervals; ++i) sum += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    const double cdf = k * sum * h / 3.0;
    return std::min(1.0, std::max(0.0, cdf));
}

inline double range_sf(double q, int k) { return 1.0 - range_cdf(q, k); }

inline double range_quantile(double p, int k) {
    double lo = 0.0, hi = 60.0;
    for (int i = 0; i < 80; ++i) {
        const double mid = 0.5 * (lo + hi);
        (range_cdf(mid, k) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// midranks ascending: smallest value gets rank 1, ties share the average
inline std::vector<double> midranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mid;
        i = j + 1;
    }
    return ranks;
}

} // namespace detail

// Critical values q_alpha of the Nemenyi test (studentized range over sqrt 2,
// infinite degrees of freedom) for k = 2..20, computed from range_quantile.
inline double nemenyi_q_alpha(int k, double alpha) {
    static const double q05[] = {1.959964, 2.343701, 2.569032, 2.727774, 2.849705,
                                 2.948319, 3.030879, 3.101730, 3.163684, 3.218654,
                                 3.268004, 3.312739, 3.353618, 3.391230, 3.426041,
                                 3.458425, 3.488685, 3.517073, 3.543799};
    static const double q10[] = {1.644854, 2.052293, 2.291341, 2.459516, 2.588521,
                                 2.692732, 2.779884, 2.854606, 2.919889, 2.977768,
                                 3.029694, 3.076733, 3.119693, 3.159199, 3.195743,
                                 3.229723, 3.261461, 3.291224, 3.319233};
    if (k < 2 || k > 20) throw method_error("Nemenyi critical values cover k in [2, 20]");
    if (alpha == 0.05) return q05[k - 2];
    if (alpha == 0.10) return q10[k - 2];
    throw config_error("Nemenyi table covers alpha 0.05 and 0.10");
}

struct RankTable {
    std::vector<std::string> methods;
    std::vector<std::vector<double>> performance; // methods x datasets
    std::vector<std::vector<double>> ranks;       // methods x datasets, k = best
    std::vector<double> rank_sums;
    std::vector<double> mean_ranks;
    int n_methods = 0;
    int n_datasets = 0;
};

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    RankTable table;
    // Iman-Davenport F correction, populated when requested
    bool iman_davenport = false;
    double f_statistic = 0.0;
    double f_p_value = 1.0;
};

// Friedman rank test over a methods x datasets performance matrix. The best
// method on a dataset receives rank k; ties share midranks.
inline FriedmanResult friedman(const std::vector<std::vector<double>>& performance,
                               const std::vector<std::string>& method_names = {},
                               bool iman_davenport = false) {
    const int k = static_cast<int>(performance.size());
    if (k < 2) throw data_error("Friedman test needs at least 2 methods");
    const int n = static_cast<int>(performance[0].size());
    if (n < 2) throw data_error("Friedman test needs at least 2 datasets");
    for (const auto& row : performance)
        if (static_cast<int>(row.size()) != n)
            throw data_error("ragged performance matrix");

    FriedmanResult result;
    result.table.methods = method_names;
    if (result.table.methods.empty())
        for (int j = 0; j < k; ++j) result.table.methods.push_back("m" + std::to_string(j + 1));
    result.table.performance = performance;
    result.table.n_methods = k;
    result.table.n_datasets = n;
    result.table.ranks.assign(k, std::vector<double>(n, 0.0));

    for (int d = 0; d < n; ++d) {
        std::vector<double> column(k);
        for (int j = 0; j < k; ++j) column[j] = performance[j][d];
        const auto ranks = detail::midranks(column); // 1 = worst, k = best
        for (int j = 0; j < k; ++j) result.table.ranks[j][d] = ranks[j];
    }
    result.table.rank_sums.assign(k, 0.0);
    result.table.mean_ranks.assign(k, 0.0);
    for (int j = 0; j < k; ++j) {
        for (int d = 0; d < n; ++d) result.table.rank_sums[j] += result.table.ranks[j][d];
        result.table.mean_ranks[j] = result.table.rank_sums[j] / n;
    }

    const double center = (k + 1) / 2.0;
    double spread = 0.0;
    for (int j = 0; j < k; ++j) {
        const double d = result.table.mean_ranks[j] - center;
        spread += d * d;
    }
    result.statistic = 12.0 * n / (k * (k + 1.0)) * spread;
    result.p_value = detail::chi2_sf(result.statistic, k - 1);

    if (iman_davenport) {
        result.iman_davenport = true;
        const double denom = n * (k - 1.0) - result.statistic;
        if (denom <= 0.0) {
            result.f_statistic = std::numeric_limits<double>::infinity();
            result.f_p_value = 0.0;
        } else {
            result.f_statistic = (n - 1.0) * result.statistic / denom;
            result.f_p_value =
                detail::f_sf(result.f_statistic, k - 1.0, (k - 1.0) * (n - 1.0));
        }
    }
    return result;
}

struct NemenyiResult {
    double alpha = 0.05;
    double critical_difference = 0.0;
    std::vector<std::vector<double>> pairwise_p; // symmetric, 1 on the diagonal
};

// Post-hoc Nemenyi test: critical difference and pairwise p-values from the
// asymptotic studentized range distribution.
inline NemenyiResult nemenyi(const RankTable& table, double alpha = 0.05) {
    const int k = table.n_methods;
    const int n = table.n_datasets;
    if (k < 2 || n < 1) throw data_error("Nemenyi test needs a populated rank table");
    NemenyiResult result;
    result.alpha = alpha;
    const double se = std::sqrt(k * (k + 1.0) / (6.0 * n));
    result.critical_difference = nemenyi_q_alpha(k, alpha) * se;
    result.pairwise_p.assign(k, std::vector<double>(k, 1.0));
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            const double gap = std::abs(table.mean_ranks[i] - table.mean_ranks[j]);
            const double p = detail::range_sf(1.4142135623730950488 * gap / se, k);
            result.pairwise_p[i][j] = result.pairwise_p[j][i] = p;
        }
    return result;
}

struct GroupRow {
    std::string method;
    double rank_sum = 0.0;
    double mean_rank = 0.0;
    std::string letters;
};

// Compact letter display: methods sorted by rank sum (best first); each
// maximal contiguous run whose mean-rank spread stays under the critical
// difference shares a letter, so a method may carry several letters.
inline std::vector<GroupRow> group_letters(const RankTable& table, double critical_difference) {
    const int k = table.n_methods;
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&table](int a, int b) {
        return table.rank_sums[a] > table.rank_sums[b];
    });

    std::vector<std::pair<int, int>> runs; // [start, end] inclusive, maximal
    int covered_end = -1;
    for (int i = 0; i < k; ++i) {
        int end = i;
        while (end + 1 < k && table.mean_ranks[order[i]] - table.mean_ranks[order[end + 1]] <
                                  critical_difference)
            ++end;
        // runs with the same end as an earlier run are contained in it
        if (end > covered_end) {
            runs.emplace_back(i, end);
            covered_end = end;
        }
    }

    std::vector<GroupRow> rows(k);
    for (int i = 0; i < k; ++i) {
        rows[i].method = table.methods[order[i]];
        rows[i].rank_sum = table.rank_sums[order[i]];
        rows[i].mean_rank = table.mean_ranks[order[i]];
    }
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const char letter = static_cast<char>('a' + r);
        for (int i = runs[r].first; i <= runs[r].second; ++i) rows[i].letters += letter;
    }
    return rows;
}

} // namespace ensemblekit
