#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ensemblekit/combine.hpp"
#include "ensemblekit/core.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/parallel.hpp"
#include "ensemblekit/rng.hpp"

namespace ensemblekit {

struct CesParams {
    int init_n = 2;                  // seed the ensemble with the top n individuals
    int max_size = 100;              // iteration budget
    bool with_replacement = true;    // classifiers may be added multiple times
    double candidate_fraction = 1.0; // 1.0 = evaluate every candidate
    std::uint64_t seed = 0;
};

struct SelectionRecord {
    std::string chosen;
    int size = 0;          // ensemble multiset size after this addition
    double val_auc = 0.0;
    double mean_diversity = 0.0; // mean pairwise adjusted Q over ensemble slots
    double brier = 0.0;
};

struct SelectionTrajectory {
    std::vector<SelectionRecord> records;
    std::vector<int> chosen_columns; // column indices in selection order

    // iteration with the highest validation AUC; earliest wins ties
    int best_iteration() const {
        int best = 0;
        for (std::size_t t = 1; t < records.size(); ++t)
            if (records[t].val_auc > records[best].val_auc) best = static_cast<int>(t);
        return best;
    }
};

namespace detail {

// columns ranked by individual validation AUC, descending; ties keep the
// lower column index first
inline std::vector<std::size_t> rank_by_individual_auc(const PredictionMatrix& matrix,
                                                       const LabelVector& labels) {
    std::vector<double> individual(matrix.cols());
    for (std::size_t j = 0; j < matrix.cols(); ++j) individual[j] = auc(matrix.column(j), labels);
    std::vector<std::size_t> order(matrix.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&individual](std::size_t a, std::size_t b) {
        return individual[a] > individual[b];
    });
    return order;
}

// Incremental mean pairwise diversity over ensemble slots, duplicates
// included: adding a column pairs it with every existing member.
class EnsembleDiversity {
public:
    EnsembleDiversity(const PredictionMatrix& matrix, const LabelVector& labels)
        : pair_q_(matrix.cols(), std::vector<double>(matrix.cols(), 0.0)) {
        const std::size_t m = matrix.cols();
        std::vector<std::vector<int>> thresholded(m);
        for (std::size_t j = 0; j < m; ++j) thresholded[j] = threshold_labels(matrix.column(j));
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t l = j; l < m; ++l) {
                const double q = diversity_from_table(
                                     correctness_table(thresholded[j], thresholded[l], labels))
                                     .q_adjusted;
                pair_q_[j][l] = pair_q_[l][j] = q;
            }
        counts_.assign(m, 0);
    }

    void add(std::size_t column) {
        for (std::size_t j = 0; j < counts_.size(); ++j)
            if (counts_[j] > 0) pair_sum_ += counts_[j] * pair_q_[j][column];
        ++counts_[column];
        ++size_;
    }

    double mean() const {
        if (size_ < 2) return 0.0;
        const double pairs = 0.5 * static_cast<double>(size_) * static_cast<double>(size_ - 1);
        return pair_sum_ / pairs;
    }

private:
    std::vector<std::vector<double>> pair_q_;
    std::vector<int> counts_;
    std::size_t size_ = 0;
    double pair_sum_ = 0.0;
};

inline std::vector<double> mean_with_candidate(const RunningMean& state,
                                               const std::vector<double>& candidate) {
    if (state.count == 0) return candidate;
    std::vector<double> out(state.sum.size());
    const double inv = 1.0 / static_cast<double>(state.count + 1);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (state.sum[i] + candidate[i]) * inv;
    return out;
}

} // namespace detail

// Baseline selection: iteration t's ensemble is the top-t columns by
// individual validation AUC, combined by mean.
inline SelectionTrajectory greedy_select(const PredictionMatrix& val_matrix,
                                         const LabelVector& val_labels, int max_size) {
    if (val_matrix.cols() == 0) throw method_error("greedy selection over empty pool");
    if (max_size < 1 || static_cast<std::size_t>(max_size) > val_matrix.cols())
        throw method_error("greedy max_size must be in [1, pool size]");
    const auto order = detail::rank_by_individual_auc(val_matrix, val_labels);
    detail::EnsembleDiversity diversity(val_matrix, val_labels);
    SelectionTrajectory traj;
    RunningMean running;
    for (int t = 0; t < max_size; ++t) {
        const std::size_t j = order[t];
        running.push(val_matrix.column(j));
        diversity.add(j);
        const auto combined = running.current();
        traj.chosen_columns.push_back(static_cast<int>(j));
        traj.records.push_back({val_matrix.classifier_ids[j], t + 1, auc(combined, val_labels),
                                diversity.mean(), brier(combined, val_labels)});
    }
    return traj;
}

// Weight^c: normalized selection counts of the chosen multiset.
inline EnsembleModel weights_from_counts(const std::vector<std::string>& selections) {
    if (selections.empty()) throw method_error("weights from empty selection");
    std::vector<std::string> seen;
    std::vector<int> counts;
    for (const auto& id : selections) {
        std::size_t k = 0;
        for (; k < seen.size(); ++k)
            if (seen[k] == id) break;
        if (k == seen.size()) {
            seen.push_back(id);
            counts.push_back(0);
        }
        ++counts[k];
    }
    EnsembleModel model;
    model.kind = ModelKind::weighted_mean;
    const double total = static_cast<double>(selections.size());
    for (std::size_t k = 0; k < seen.size(); ++k)
        model.members.emplace_back(seen[k], static_cast<double>(counts[k]) / total);
    return model;
}

// Caruana-style forward selection: start from the top init_n individuals,
// then repeatedly add the candidate whose inclusion maximizes the validation
// AUC of the running mean. Ties go to the lowest column index.
inline std::pair<SelectionTrajectory, EnsembleModel> ces_select(
    const PredictionMatrix& val_matrix, const LabelVector& val_labels, const CesParams& params) {
    const std::size_t m = val_matrix.cols();
    if (m == 0) throw method_error("ensemble selection over empty pool");
    if (params.init_n < 0 || static_cast<std::size_t>(params.init_n) > m)
        throw method_error("init_n must be in [0, pool size]");
    if (params.max_size < params.init_n) throw method_error("max_size must be >= init_n");
    if (params.candidate_fraction <= 0.0 || params.candidate_fraction > 1.0)
        throw method_error("candidate_fraction must be in (0, 1]");

    const auto order = detail::rank_by_individual_auc(val_matrix, val_labels);
    detail::EnsembleDiversity diversity(val_matrix, val_labels);
    Rng rng(params.seed);

    SelectionTrajectory traj;
    RunningMean running;
    std::vector<int> times_selected(m, 0);

    auto record = [&](std::size_t j) {
        running.push(val_matrix.column(j));
        diversity.add(j);
        ++times_selected[j];
        const auto combined = running.current();
        traj.chosen_columns.push_back(static_cast<int>(j));
        traj.records.push_back({val_matrix.classifier_ids[j],
                                static_cast<int>(traj.records.size() + 1),
                                auc(combined, val_labels), diversity.mean(),
                                brier(combined, val_labels)});
    };

    for (int t = 0; t < params.init_n; ++t) record(order[t]);

    const std::size_t n_candidates = std::min<std::size_t>(
        m, static_cast<std::size_t>(
               std::ceil(params.candidate_fraction * static_cast<double>(m))));

    while (static_cast<int>(traj.records.size()) < params.max_size) {
        std::vector<std::size_t> candidates;
        if (params.candidate_fraction >= 1.0) {
            candidates.resize(m);
            std::iota(candidates.begin(), candidates.end(), 0);
        } else {
            candidates = rng.sample_without_replacement(m, n_candidates);
            std::sort(candidates.begin(), candidates.end());
        }
        if (!params.with_replacement) {
            std::erase_if(candidates,
                          [&times_selected](std::size_t j) { return times_selected[j] > 0; });
            if (candidates.empty()) break; // pool exhausted
        }

        std::vector<double> candidate_auc(candidates.size());
        parallel_for(candidates.size(), [&](std::size_t c) {
            candidate_auc[c] =
                auc(detail::mean_with_candidate(running, val_matrix.column(candidates[c])),
                    val_labels);
        });
        std::size_t best = 0;
        for (std::size_t c = 1; c < candidates.size(); ++c)
            if (candidate_auc[c] > candidate_auc[best]) best = c;
        record(candidates[best]);
    }

    std::vector<std::string> selected;
    selected.reserve(traj.chosen_columns.size());
    for (int j : traj.chosen_columns) selected.push_back(val_matrix.classifier_ids[j]);
    return {traj, weights_from_counts(selected)};
}

} // namespace ensemblekit
