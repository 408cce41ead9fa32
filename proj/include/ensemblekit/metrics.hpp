#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ensemblekit/core.hpp"
#include "ensemblekit/parallel.hpp"

namespace ensemblekit {

// Mann-Whitney AUC: fraction of (positive, negative) pairs where the positive
// scores higher, ties counted 1/2. Computed by rank sum with midranks, which
// is exactly the pair-counting value.
inline double auc(const std::vector<double>& scores, const LabelVector& labels) {
    if (scores.size() != labels.size())
        throw data_error("score/label length mismatch");
    const std::size_t n = scores.size();
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(scores[i])) throw data_error("non-finite score at index " + std::to_string(i));
        if (labels[i] == 1) ++positives;
    }
    const std::size_t negatives = n - positives;
    if (positives == 0 || negatives == 0) throw method_error("AUC undefined: single-class labels");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&scores](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double positive_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        // ranks i+1 .. j+1 share the midrank
        const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) positive_rank_sum += midrank;
        i = j + 1;
    }
    const double p = static_cast<double>(positives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

// Mean squared error of probabilistic predictions against binary outcomes.
inline double brier(const std::vector<double>& scores, const LabelVector& labels) {
    if (scores.empty()) throw data_error("Brier score of empty input");
    if (scores.size() != labels.size())
        throw data_error("score/label length mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double d = scores[i] - static_cast<double>(labels[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(scores.size());
}

// 1 for values strictly greater than tau, else 0.
inline std::vector<int> threshold_labels(const std::vector<double>& scores, double tau = 0.5) {
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > tau ? 1 : 0;
    return out;
}

struct DiversityStats {
    double q = 0.0;          // Yule's Q in [-1, 1]
    double q_adjusted = 0.0; // 1 - |Q|, 0 = no diversity, 1 = maximum
    double kappa = 0.0;      // Cohen's kappa on correctness indicators
    ContingencyTable table;
    bool degenerate = false; // Q denominator was zero; Q reported as 0
};

inline ContingencyTable correctness_table(const std::vector<int>& pred_i,
                                          const std::vector<int>& pred_k,
                                          const LabelVector& labels) {
    ContingencyTable t;
    for (std::size_t n = 0; n < labels.size(); ++n) {
        const bool ci = pred_i[n] == labels[n];
        const bool ck = pred_k[n] == labels[n];
        if (ci && ck)
            ++t.n11;
        else if (ci)
            ++t.n10;
        else if (ck)
            ++t.n01;
        else
            ++t.n00;
    }
    return t;
}

inline DiversityStats diversity_from_table(const ContingencyTable& t) {
    DiversityStats s;
    s.table = t;
    const double a = static_cast<double>(t.n11) * static_cast<double>(t.n00);
    const double b = static_cast<double>(t.n01) * static_cast<double>(t.n10);
    if (a + b == 0.0) {
        s.q = 0.0;
        s.degenerate = true;
    } else {
        s.q = (a - b) / (a + b);
    }
    s.q_adjusted = 1.0 - std::abs(s.q);
    const double n = static_cast<double>(t.total());
    const double p_o = static_cast<double>(t.n11 + t.n00) / n;
    const double pi1 = static_cast<double>(t.n11 + t.n10) / n; // first classifier correct
    const double pk1 = static_cast<double>(t.n11 + t.n01) / n; // second classifier correct
    const double p_e = pi1 * pk1 + (1.0 - pi1) * (1.0 - pk1);
    if (p_e == 1.0) {
        s.kappa = 0.0;
        s.degenerate = true;
    } else {
        s.kappa = (p_o - p_e) / (1.0 - p_e);
    }
    return s;
}

// Yule's Q, its 1-|Q| adjustment and Cohen's kappa for one classifier pair,
// from correctness of predictions thresholded at 0.5.
inline DiversityStats pair_diversity(const std::vector<double>& pred_i,
                                     const std::vector<double>& pred_k,
                                     const LabelVector& labels) {
    if (pred_i.size() != labels.size() || pred_k.size() != labels.size())
        throw data_error("prediction/label length mismatch");
    if (labels.empty()) throw data_error("pair diversity of empty input");
    return diversity_from_table(
        correctness_table(threshold_labels(pred_i), threshold_labels(pred_k), labels));
}

// Symmetric matrix of adjusted Q values; diagonal 0 by definition. Pairs are
// evaluated independently so order of evaluation cannot matter.
inline std::vector<std::vector<double>> diversity_matrix(const PredictionMatrix& matrix,
                                                         const LabelVector& labels) {
    const std::size_t m = matrix.cols();
    if (m < 2) throw data_error("diversity matrix needs at least 2 columns");
    std::vector<std::vector<int>> thresholded(m);
    for (std::size_t j = 0; j < m; ++j) thresholded[j] = threshold_labels(matrix.column(j));

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t l = j + 1; l < m; ++l) pairs.emplace_back(j, l);

    std::vector<std::vector<double>> out(m, std::vector<double>(m, 0.0));
    std::vector<std::string> failures(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t p) {
        const auto [j, l] = pairs[p];
        try {
            const auto stats =
                diversity_from_table(correctness_table(thresholded[j], thresholded[l], labels));
            out[j][l] = out[l][j] = stats.q_adjusted;
        } catch (const error& e) {
            failures[p] = "pair (" + matrix.classifier_ids[j] + ", " +
                          matrix.classifier_ids[l] + "): " + e.what();
        }
    });
    for (const auto& f : failures)
        if (!f.empty()) throw data_error(f);
    return out;
}

// 1 - |Pearson correlation|; constant columns are maximally distant.
inline double correlation_distance(const std::vector<double>& col_i,
                                   const std::vector<double>& col_j) {
    if (col_i.size() != col_j.size() || col_i.size() < 2)
        throw data_error("correlation distance needs two equal-length columns of size >= 2");
    const std::size_t n = col_i.size();
    double mi = 0.0, mj = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        mi += col_i[k];
        mj += col_j[k];
    }
    mi /= static_cast<double>(n);
    mj /= static_cast<double>(n);
    double sii = 0.0, sjj = 0.0, sij = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double a = col_i[k] - mi;
        const double b = col_j[k] - mj;
        sii += a * a;
        sjj += b * b;
        sij += a * b;
    }
    if (sii == 0.0 || sjj == 0.0) return 1.0;
    const double rho = sij / std::sqrt(sii * sjj);
    const double d = 1.0 - std::abs(rho);
    return d < 0.0 ? 0.0 : d; // |rho| may exceed 1 by rounding
}

struct ClassifierProfile {
    std::string classifier_id;
    double mean_diversity = 0.0; // mean adjusted Q against all other columns
    double auc = 0.0;            // individual performance
};

// One record per classifier: its mean pairwise diversity and individual AUC.
// Sorting by diversity ascending gives the candidate-table layout.
inline std::vector<ClassifierProfile> mean_pairwise_profile(const PredictionMatrix& matrix,
                                                            const LabelVector& labels) {
    const auto div = diversity_matrix(matrix, labels);
    const std::size_t m = matrix.cols();
    std::vector<ClassifierProfile> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        out[j].classifier_id = matrix.classifier_ids[j];
        double sum = 0.0;
        for (std::size_t l = 0; l < m; ++l)
            if (l != j) sum += div[j][l];
        out[j].mean_diversity = sum / static_cast<double>(m - 1);
        out[j].auc = auc(matrix.column(j), labels);
    }
    return out;
}

} // namespace ensemblekit
