#pragma once

#include <string>
#include <vector>

#include "ensemblekit/core.hpp"

namespace ensemblekit {

// Per-instance arithmetic mean of the selected columns; duplicates in the
// subset count with multiplicity.
inline std::vector<double> mean_aggregate(const PredictionMatrix& matrix,
                                          const std::vector<std::string>& subset) {
    if (subset.empty()) throw data_error("mean aggregation of empty subset");
    std::vector<double> sum(matrix.rows(), 0.0);
    for (const auto& id : subset) {
        const int j = matrix.column_index(id);
        if (j < 0) throw data_error("unknown classifier id '" + id + "'");
        const auto& col = matrix.column(static_cast<std::size_t>(j));
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += col[i];
    }
    const double inv = 1.0 / static_cast<double>(subset.size());
    for (double& v : sum) v *= inv;
    return sum;
}

// Mean of a set of columns given by index, in index order.
inline std::vector<double> column_mean(const PredictionMatrix& matrix,
                                       const std::vector<std::size_t>& column_indices) {
    if (column_indices.empty()) throw data_error("column mean of empty set");
    std::vector<double> sum(matrix.rows(), 0.0);
    for (std::size_t j : column_indices) {
        const auto& col = matrix.column(j);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += col[i];
    }
    const double inv = 1.0 / static_cast<double>(column_indices.size());
    for (double& v : sum) v *= inv;
    return sum;
}

// Collapses each bag group to the mean of its columns. Output columns are
// named by group, ordered by first appearance, and form singleton groups.
inline PredictionMatrix bag_aggregate(const PredictionMatrix& matrix) {
    if (matrix.group_of.size() != matrix.cols())
        throw data_error("bag group map does not cover all columns");
    std::vector<std::string> group_order;
    std::vector<std::vector<std::size_t>> group_columns;
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        const auto& g = matrix.group_of[j];
        std::size_t gi = 0;
        for (; gi < group_order.size(); ++gi)
            if (group_order[gi] == g) break;
        if (gi == group_order.size()) {
            group_order.push_back(g);
            group_columns.emplace_back();
        }
        group_columns[gi].push_back(j);
    }
    PredictionMatrix out;
    out.instance_ids = matrix.instance_ids;
    out.classifier_ids = group_order;
    out.group_of = group_order;
    out.columns.reserve(group_order.size());
    for (const auto& cols : group_columns) out.columns.push_back(column_mean(matrix, cols));
    return out;
}

// Cumulative moving average over pushed columns. Stores sums, not averages,
// so current() is exact for the pushed multiset.
struct RunningMean {
    std::vector<double> sum;
    std::size_t count = 0;

    void push(const std::vector<double>& column) {
        if (count == 0) {
            sum = column;
        } else {
            if (column.size() != sum.size())
                throw data_error("running mean column length mismatch");
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += column[i];
        }
        ++count;
    }

    std::vector<double> current() const {
        if (count == 0) throw method_error("running mean is empty");
        std::vector<double> out(sum);
        const double inv = 1.0 / static_cast<double>(count);
        for (double& v : out) v *= inv;
        return out;
    }
};

inline RunningMean running_push(RunningMean state, const std::vector<double>& column) {
    state.push(column);
    return state;
}

inline std::vector<double> running_current(const RunningMean& state) { return state.current(); }

} // namespace ensemblekit
