#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ensemblekit/errors.hpp"

namespace ensemblekit {

using LabelVector = std::vector<int>;

// Instances x classifiers matrix of positive-class probabilities. Columns are
// classifiers; group_of[j] names the bag group of column j (homogeneous
// resampled classifiers share a group). Immutable by convention once built.
struct PredictionMatrix {
    std::vector<std::string> instance_ids;
    std::vector<std::string> classifier_ids;
    std::vector<std::string> group_of;          // aligned with classifier_ids
    std::vector<std::vector<double>> columns;   // columns[j][i], values in [0,1]

    std::size_t rows() const { return instance_ids.size(); }
    std::size_t cols() const { return classifier_ids.size(); }

    const std::vector<double>& column(std::size_t j) const { return columns[j]; }

    // -1 when absent
    int column_index(const std::string& id) const {
        for (std::size_t j = 0; j < classifier_ids.size(); ++j)
            if (classifier_ids[j] == id) return static_cast<int>(j);
        return -1;
    }
};

// Joint correctness counts of two classifiers: n11 both correct, n10 first
// only, n01 second only, n00 neither.
struct ContingencyTable {
    std::int64_t n11 = 0;
    std::int64_t n10 = 0;
    std::int64_t n01 = 0;
    std::int64_t n00 = 0;

    std::int64_t total() const { return n11 + n10 + n01 + n00; }
};

enum class ModelKind { weighted_mean, logistic_meta, intra_cluster, inter_cluster };

inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::weighted_mean: return "weighted_mean";
        case ModelKind::logistic_meta: return "logistic_meta";
        case ModelKind::intra_cluster: return "intra_cluster";
        case ModelKind::inter_cluster: return "inter_cluster";
    }
    return "?";
}

// Fitted logistic parameters of one stacked unit.
struct MetaParams {
    std::vector<double> coefficients;
    double intercept = 0.0;
};

// A fitted combiner. weighted_mean uses members only; the stacking kinds use
// metas over feature_ids (classifier columns, bag groups when on_bag_groups,
// or cluster means when cluster_of is populated).
struct EnsembleModel {
    ModelKind kind = ModelKind::weighted_mean;
    std::vector<std::pair<std::string, double>> members;
    std::vector<MetaParams> metas;
    std::vector<std::string> feature_ids;
    bool on_bag_groups = false;
    int cluster_count = 0;
    std::unordered_map<std::string, int> cluster_of; // column id -> cluster in [1,k]
};

struct NestedSplit {
    std::vector<int> train;
    std::vector<int> heldout;
};

struct OuterFold {
    std::vector<int> train;
    std::vector<int> test;
    std::vector<std::vector<int>> bags;      // bootstrap draws over train, with duplicates
    std::vector<std::vector<int>> balanced;  // bags after majority undersampling
    std::vector<NestedSplit> nested;         // stratified sub-splits of train
};

// Full cross-validation topology.
struct FoldPlan {
    int outer_k = 10;
    int nested_k = 5;
    int bags_per_split = 10;
    std::uint64_t seed = 0;
    std::vector<OuterFold> folds;

    void serialize(std::ostream& os) const {
        os << "outer_k " << outer_k << "\nnested_k " << nested_k
           << "\nbags " << bags_per_split << "\nseed " << seed << "\n";
        auto dump = [&os](const char* tag, const std::vector<int>& v) {
            os << tag;
            for (int i : v) os << ' ' << i;
            os << '\n';
        };
        for (std::size_t f = 0; f < folds.size(); ++f) {
            os << "fold " << f << '\n';
            dump("train", folds[f].train);
            dump("test", folds[f].test);
            for (const auto& b : folds[f].bags) dump("bag", b);
            for (const auto& b : folds[f].balanced) dump("balanced", b);
            for (const auto& s : folds[f].nested) {
                dump("nested_train", s.train);
                dump("nested_heldout", s.heldout);
            }
        }
    }
};

// Per-method, per-dataset evaluation record.
struct MethodReport {
    std::string method;
    std::string dataset;
    double test_auc = 0.0;
    double brier = 0.0;
    std::vector<double> val_trajectory;
    std::vector<std::pair<std::string, double>> weights;
    int ensemble_size = 0;
    double wall_time_s = 0.0;
};

inline void validate_labels(const LabelVector& labels) {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != 0 && labels[i] != 1)
            throw data_error("non-binary label at index " + std::to_string(i));
}

// Checks every PredictionMatrix/LabelVector invariant; throws data_error with
// the offending index. Idempotent.
inline void validate_matrix(const PredictionMatrix& matrix, const LabelVector& labels) {
    if (matrix.classifier_ids.size() != matrix.columns.size())
        throw data_error("classifier id count does not match column count");
    if (matrix.group_of.size() != matrix.classifier_ids.size())
        throw data_error("bag group map does not cover all columns");
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        if (matrix.columns[j].size() != matrix.rows())
            throw data_error("dimension mismatch in column " + matrix.classifier_ids[j]);
        for (std::size_t k = j + 1; k < matrix.cols(); ++k)
            if (matrix.classifier_ids[j] == matrix.classifier_ids[k])
                throw data_error("duplicate classifier id '" + matrix.classifier_ids[j] + "'");
    }
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        const auto& col = matrix.columns[j];
        for (std::size_t i = 0; i < col.size(); ++i) {
            const double v = col[i];
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw data_error("value out of range at (" + std::to_string(i) + ", " +
                                 std::to_string(j) + ")");
        }
    }
    if (labels.size() != matrix.rows())
        throw data_error("label count does not match row count");
    validate_labels(labels);
}

// Row slice [begin, end) preserving ids, columns and groups.
inline PredictionMatrix slice_rows(const PredictionMatrix& matrix, std::size_t begin,
                                   std::size_t end) {
    PredictionMatrix out;
    out.classifier_ids = matrix.classifier_ids;
    out.group_of = matrix.group_of;
    out.instance_ids.assign(matrix.instance_ids.begin() + begin,
                            matrix.instance_ids.begin() + end);
    out.columns.reserve(matrix.cols());
    for (const auto& col : matrix.columns)
        out.columns.emplace_back(col.begin() + begin, col.begin() + end);
    return out;
}

inline PredictionMatrix take_rows(const PredictionMatrix& matrix,
                                  const std::vector<int>& rows) {
    PredictionMatrix out;
    out.classifier_ids = matrix.classifier_ids;
    out.group_of = matrix.group_of;
    out.instance_ids.reserve(rows.size());
    for (int i : rows) out.instance_ids.push_back(matrix.instance_ids[i]);
    out.columns.reserve(matrix.cols());
    for (const auto& col : matrix.columns) {
        std::vector<double> c;
        c.reserve(rows.size());
        for (int i : rows) c.push_back(col[i]);
        out.columns.push_back(std::move(c));
    }
    return out;
}

template <typename T>
std::vector<T> take(const std::vector<T>& v, const std::vector<int>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(v[i]);
    return out;
}

} // namespace ensemblekit
