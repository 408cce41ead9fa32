#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ensemblekit/core.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/parallel.hpp"
#include "ensemblekit/stack.hpp"

namespace ensemblekit {

// Agglomerative merge sequence. Leaves are 0..M-1; merge i creates node M+i.
struct Dendrogram {
    struct Merge {
        int node_a = 0;
        int node_b = 0;
        double height = 0.0;
    };
    int leaves = 0;
    std::vector<Merge> merges; // exactly leaves-1 entries
};

// Average-linkage (UPGMA) clustering of a symmetric distance matrix with a
// zero diagonal. Ties merge the pair with the lexicographically smallest
// (min leaf index, min leaf index) key.
inline Dendrogram hcluster(const std::vector<std::vector<double>>& distance) {
    const std::size_t m = distance.size();
    if (m < 2) throw data_error("clustering needs at least 2 items");
    for (std::size_t i = 0; i < m; ++i) {
        if (distance[i].size() != m) throw data_error("distance matrix is not square");
        if (distance[i][i] != 0.0) throw data_error("distance matrix diagonal must be zero");
        for (std::size_t j = 0; j < m; ++j) {
            if (distance[i][j] != distance[j][i])
                throw data_error("distance matrix is not symmetric");
            if (!(distance[i][j] >= 0.0 && distance[i][j] <= 1.0))
                throw data_error("distance entries must lie in [0, 1]");
        }
    }

    struct Cluster {
        int node = 0;
        int size = 0;
        int min_leaf = 0;
        bool active = true;
    };
    std::vector<Cluster> clusters(m);
    auto dist = distance;
    for (std::size_t i = 0; i < m; ++i)
        clusters[i] = {static_cast<int>(i), 1, static_cast<int>(i), true};

    Dendrogram dendro;
    dendro.leaves = static_cast<int>(m);
    for (std::size_t step = 0; step + 1 < m; ++step) {
        std::size_t bi = 0, bj = 0;
        double best = 2.0;
        int best_lo = -1, best_hi = -1;
        for (std::size_t i = 0; i < m; ++i) {
            if (!clusters[i].active) continue;
            for (std::size_t j = i + 1; j < m; ++j) {
                if (!clusters[j].active) continue;
                const double d = dist[i][j];
                const int lo = std::min(clusters[i].min_leaf, clusters[j].min_leaf);
                const int hi = std::max(clusters[i].min_leaf, clusters[j].min_leaf);
                if (d < best || (d == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
                    best = d;
                    bi = i;
                    bj = j;
                    best_lo = lo;
                    best_hi = hi;
                }
            }
        }
        const bool a_first = clusters[bi].min_leaf < clusters[bj].min_leaf;
        dendro.merges.push_back({a_first ? clusters[bi].node : clusters[bj].node,
                                 a_first ? clusters[bj].node : clusters[bi].node, best});
        // merged cluster replaces slot bi; average-linkage distance update
        const double wi = clusters[bi].size, wj = clusters[bj].size;
        for (std::size_t l = 0; l < m; ++l) {
            if (!clusters[l].active || l == bi || l == bj) continue;
            dist[bi][l] = dist[l][bi] = (wi * dist[bi][l] + wj * dist[bj][l]) / (wi + wj);
        }
        clusters[bi].node = static_cast<int>(m + step);
        clusters[bi].size += clusters[bj].size;
        clusters[bi].min_leaf = std::min(clusters[bi].min_leaf, clusters[bj].min_leaf);
        clusters[bj].active = false;
    }
    return dendro;
}

// Exactly k clusters obtained by undoing the last k-1 merges. Cluster ids are
// 1..k in order of smallest member leaf.
inline std::vector<int> cut_k(const Dendrogram& dendro, int k) {
    const int m = dendro.leaves;
    if (k < 1 || k > m) throw method_error("cut_k: k must be in [1, leaf count]");
    std::vector<int> parent(2 * m - 1);
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    auto find = [&parent](int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    };
    for (int t = 0; t < m - k; ++t) {
        const auto& merge = dendro.merges[t];
        const int node = m + t;
        parent[find(merge.node_a)] = node;
        parent[find(merge.node_b)] = node;
    }
    std::vector<int> root_to_cluster(2 * m - 1, 0);
    std::vector<int> assignment(m, 0);
    int next = 0;
    for (int leaf = 0; leaf < m; ++leaf) {
        const int root = find(leaf);
        if (root_to_cluster[root] == 0) root_to_cluster[root] = ++next;
        assignment[leaf] = root_to_cluster[root];
    }
    return assignment;
}

enum class ClusterMode { intra, inter };
enum class ClusterDistance { pearson, qstat };

// Stacked model over a clustering of the classifier columns: one logistic
// per cluster whose outputs are averaged (intra), or a single logistic over
// the within-cluster mean columns (inter).
struct ClusterStackModel {
    ClusterMode mode = ClusterMode::intra;
    int k = 1;
    std::vector<int> assignment; // per column, 1..k
    EnsembleModel model;
};

namespace detail {

inline std::vector<std::vector<double>> cluster_distance_matrix(
    const PredictionMatrix& matrix, const LabelVector& labels, ClusterDistance distance) {
    const std::size_t m = matrix.cols();
    if (distance == ClusterDistance::qstat) return diversity_matrix(matrix, labels);
    std::vector<std::vector<double>> d(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            d[i][j] = d[j][i] = correlation_distance(matrix.column(i), matrix.column(j));
    return d;
}

inline FeatureRows gather_rows(const PredictionMatrix& matrix,
                               const std::vector<std::size_t>& cols) {
    FeatureRows rows(matrix.rows(), std::vector<double>(cols.size()));
    for (std::size_t f = 0; f < cols.size(); ++f) {
        const auto& col = matrix.column(cols[f]);
        for (std::size_t i = 0; i < col.size(); ++i) rows[i][f] = col[i];
    }
    return rows;
}

inline ClusterStackModel fit_cluster_stack(const PredictionMatrix& matrix,
                                           const LabelVector& labels, ClusterMode mode,
                                           const std::vector<int>& assignment, int k,
                                           const LogisticOptions& opts) {
    ClusterStackModel out;
    out.mode = mode;
    out.k = k;
    out.assignment = assignment;
    out.model.kind = mode == ClusterMode::intra ? ModelKind::intra_cluster
                                                : ModelKind::inter_cluster;
    out.model.cluster_count = k;
    out.model.feature_ids = matrix.classifier_ids;
    for (std::size_t j = 0; j < matrix.cols(); ++j)
        out.model.cluster_of[matrix.classifier_ids[j]] = assignment[j];

    std::vector<std::vector<std::size_t>> cluster_cols(k);
    for (std::size_t j = 0; j < matrix.cols(); ++j)
        cluster_cols[assignment[j] - 1].push_back(j);
    for (int c = 0; c < k; ++c)
        if (cluster_cols[c].empty()) throw method_error("empty cluster " + std::to_string(c + 1));

    if (mode == ClusterMode::intra) {
        out.model.metas.assign(k, {});
        std::vector<std::string> failures(k);
        parallel_for(static_cast<std::size_t>(k), [&](std::size_t c) {
            try {
                const auto fit = fit_logistic(gather_rows(matrix, cluster_cols[c]), labels, opts);
                out.model.metas[c] = {fit.coefficients, fit.intercept};
            } catch (const error& e) {
                failures[c] = e.what();
            }
        });
        for (int c = 0; c < k; ++c)
            if (!failures[c].empty())
                throw method_error("cluster " + std::to_string(c + 1) + ": " + failures[c]);
    } else {
        PredictionMatrix means;
        means.instance_ids = matrix.instance_ids;
        for (int c = 0; c < k; ++c) {
            means.classifier_ids.push_back("cluster_" + std::to_string(c + 1));
            means.columns.push_back(column_mean(matrix, cluster_cols[c]));
        }
        means.group_of = means.classifier_ids;
        const auto fit = fit_logistic(rows_from_columns(means), labels, opts);
        out.model.metas.push_back({fit.coefficients, fit.intercept});
    }
    return out;
}

} // namespace detail

// Cluster the validation columns, stack within each cluster, and average the
// per-cluster outputs at prediction time.
inline ClusterStackModel intra_cluster_stack(const PredictionMatrix& val_matrix,
                                             const LabelVector& val_labels, int k,
                                             ClusterDistance distance = ClusterDistance::pearson,
                                             const LogisticOptions& opts = {}) {
    const auto dendro =
        hcluster(detail::cluster_distance_matrix(val_matrix, val_labels, distance));
    return detail::fit_cluster_stack(val_matrix, val_labels, ClusterMode::intra,
                                     cut_k(dendro, k), k, opts);
}

// Average the columns within each cluster, then stack over the k means.
inline ClusterStackModel inter_cluster_stack(const PredictionMatrix& val_matrix,
                                             const LabelVector& val_labels, int k,
                                             ClusterDistance distance = ClusterDistance::pearson,
                                             const LogisticOptions& opts = {}) {
    const auto dendro =
        hcluster(detail::cluster_distance_matrix(val_matrix, val_labels, distance));
    return detail::fit_cluster_stack(val_matrix, val_labels, ClusterMode::inter,
                                     cut_k(dendro, k), k, opts);
}

struct SweepResult {
    int best_k = 1;
    std::vector<std::pair<int, double>> per_k; // (k, validation AUC)
};

namespace detail {

// deterministic stratified halves in file order, no randomness involved
inline std::pair<std::vector<int>, std::vector<int>> alternating_halves(
    const LabelVector& labels) {
    std::vector<int> a, b;
    int pos_seen = 0, neg_seen = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        int& seen = labels[i] == 1 ? pos_seen : neg_seen;
        (seen++ % 2 == 0 ? a : b).push_back(static_cast<int>(i));
    }
    return {a, b};
}

} // namespace detail

// Fits the chosen mode at every k in k_range and reports the argmax by
// validation AUC; ties go to the smallest k. Each k is scored out-of-fold by
// a two-fold cross-fit inside the validation set (fitting in-sample makes the
// single-cluster model win by construction), with the clustering itself
// derived once from the full validation matrix.
inline SweepResult sweep_k(const PredictionMatrix& val_matrix, const LabelVector& val_labels,
                           ClusterMode mode, const std::vector<int>& k_range,
                           ClusterDistance distance = ClusterDistance::pearson,
                           const LogisticOptions& opts = {}) {
    if (k_range.empty()) throw method_error("empty k range");
    for (int k : k_range)
        if (k < 1 || static_cast<std::size_t>(k) > val_matrix.cols())
            throw method_error("k out of range: " + std::to_string(k));
    const auto dendro =
        hcluster(detail::cluster_distance_matrix(val_matrix, val_labels, distance));
    const auto [half_a, half_b] = detail::alternating_halves(val_labels);

    std::vector<int> ks(k_range);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

    SweepResult result;
    result.per_k.resize(ks.size());
    parallel_for(ks.size(), [&](std::size_t i) {
        const int k = ks[i];
        const auto assignment = cut_k(dendro, k);
        std::vector<double> out_of_fold(val_matrix.rows(), 0.0);
        for (const auto& [train, eval] : {std::pair(half_a, half_b), std::pair(half_b, half_a)}) {
            const auto model =
                detail::fit_cluster_stack(take_rows(val_matrix, train), take(val_labels, train),
                                          mode, assignment, k, opts);
            const auto scores = apply_model(model.model, take_rows(val_matrix, eval));
            for (std::size_t r = 0; r < eval.size(); ++r) out_of_fold[eval[r]] = scores[r];
        }
        result.per_k[i] = {k, auc(out_of_fold, val_labels)};
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < result.per_k.size(); ++i)
        if (result.per_k[i].second > result.per_k[best].second) best = i;
    result.best_k = result.per_k[best].first;
    return result;
}

} // namespace ensemblekit
