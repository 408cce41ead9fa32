#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "ensemblekit/cluster.hpp"
#include "ensemblekit/combine.hpp"
#include "ensemblekit/core.hpp"
#include "ensemblekit/io.hpp"
#include "ensemblekit/learners.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/parallel.hpp"
#include "ensemblekit/rng.hpp"
#include "ensemblekit/select.hpp"
#include "ensemblekit/stack.hpp"

namespace ensemblekit {

namespace detail {

// stratified round-robin split of [0, n) by class, folds get class counts
// within 1 of proportionality
inline std::vector<std::vector<int>> stratified_folds(const LabelVector& labels, int k,
                                                      Rng& rng) {
    std::vector<int> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 1 ? pos : neg).push_back(static_cast<int>(i));
    rng.shuffle(pos);
    rng.shuffle(neg);
    std::vector<std::vector<int>> folds(k);
    for (std::size_t i = 0; i < pos.size(); ++i) folds[i % k].push_back(pos[i]);
    for (std::size_t i = 0; i < neg.size(); ++i) folds[i % k].push_back(neg[i]);
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

// removes random majority entries from the bag until both classes count equal
inline std::vector<int> undersample_majority(const std::vector<int>& bag,
                                             const LabelVector& labels, Rng& rng) {
    std::vector<std::size_t> pos_slots, neg_slots;
    for (std::size_t s = 0; s < bag.size(); ++s)
        (labels[bag[s]] == 1 ? pos_slots : neg_slots).push_back(s);
    if (pos_slots.empty() || neg_slots.empty())
        throw data_error("bootstrap bag lost a class; dataset too small or too imbalanced");
    auto& majority = pos_slots.size() > neg_slots.size() ? pos_slots : neg_slots;
    const std::size_t minority = std::min(pos_slots.size(), neg_slots.size());
    rng.shuffle(majority);
    std::vector<bool> drop(bag.size(), false);
    for (std::size_t d = 0; d < majority.size() - minority; ++d) drop[majority[d]] = true;
    std::vector<int> balanced;
    balanced.reserve(2 * minority);
    for (std::size_t s = 0; s < bag.size(); ++s)
        if (!drop[s]) balanced.push_back(bag[s]);
    return balanced;
}

} // namespace detail

// Builds the full cross-validation topology: stratified outer folds, per-fold
// bootstrap bags balanced by majority undersampling, and stratified nested
// sub-splits of each training split.
inline FoldPlan make_fold_plan(const LabelVector& labels, int outer_k, int nested_k, int bags,
                               std::uint64_t seed) {
    if (outer_k < 2) throw config_error("outer_k must be >= 2");
    if (nested_k < 2) throw config_error("nested_k must be >= 2");
    if (bags < 1) throw config_error("bags must be >= 1");
    validate_labels(labels);
    int n_pos = 0, n_neg = 0;
    for (int y : labels) (y == 1 ? n_pos : n_neg)++;
    if (n_pos < outer_k || n_neg < outer_k)
        throw data_error("class too small to stratify into " + std::to_string(outer_k) +
                         " folds");

    FoldPlan plan;
    plan.outer_k = outer_k;
    plan.nested_k = nested_k;
    plan.bags_per_split = bags;
    plan.seed = seed;

    Rng outer_rng(derive_seed(seed, 0));
    const auto test_folds = detail::stratified_folds(labels, outer_k, outer_rng);

    plan.folds.resize(outer_k);
    for (int f = 0; f < outer_k; ++f) {
        auto& fold = plan.folds[f];
        fold.test = test_folds[f];
        std::vector<bool> in_test(labels.size(), false);
        for (int i : fold.test) in_test[i] = true;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (!in_test[i]) fold.train.push_back(static_cast<int>(i));

        Rng fold_rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(f)));
        for (int b = 0; b < bags; ++b) {
            std::vector<int> bag(fold.train.size());
            for (auto& v : bag)
                v = fold.train[static_cast<std::size_t>(fold_rng.below(fold.train.size()))];
            fold.bags.push_back(bag);
            fold.balanced.push_back(detail::undersample_majority(bag, labels, fold_rng));
        }

        LabelVector train_labels = take(labels, fold.train);
        const auto nested = detail::stratified_folds(train_labels, nested_k, fold_rng);
        for (int g = 0; g < nested_k; ++g) {
            NestedSplit split;
            std::vector<bool> held(fold.train.size(), false);
            for (int i : nested[g]) held[i] = true;
            for (std::size_t i = 0; i < fold.train.size(); ++i)
                (held[i] ? split.heldout : split.train).push_back(fold.train[i]);
            fold.nested.push_back(std::move(split));
        }
    }
    return plan;
}

struct FoldData {
    PredictionMatrix val;  // rows = training-split instances, canonical order
    LabelVector val_labels;
    PredictionMatrix test; // rows = test-split instances
    LabelVector test_labels;
};

struct PipelineOutput {
    std::vector<FoldData> folds;
    std::vector<std::string> classifier_ids; // full registry, <learner>.<bag>
    std::vector<std::string> group_of;       // registry groups = learner names
    std::vector<std::string> warnings;       // dropped columns, one line each
};

// Trains every learner on every balanced bag of every outer training split.
// Test predictions come from the bag-trained model; validation predictions
// come from nested cross-validation, so each training instance is predicted
// by a model that never saw it.
inline PipelineOutput run_pipeline(const Dataset& dataset,
                                   const std::vector<LearnerSpec>& learners,
                                   const FoldPlan& plan) {
    if (learners.empty()) throw config_error("pipeline needs at least one learner");
    std::vector<int> labeled_rows;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        if (dataset.labels[i] >= 0) labeled_rows.push_back(static_cast<int>(i));
    std::size_t planned = 0;
    for (const auto& fold : plan.folds) planned += fold.test.size();
    if (planned != labeled_rows.size())
        throw data_error("fold plan does not match the labeled instance count");

    // plan indices address the labeled subset in file order
    auto feature_row = [&](int idx) -> const std::vector<double>& {
        return dataset.rows[labeled_rows[idx]];
    };
    auto label_of = [&](int idx) { return dataset.labels[labeled_rows[idx]]; };
    auto id_of = [&](int idx) -> const std::string& {
        return dataset.instance_ids[labeled_rows[idx]];
    };

    PipelineOutput out;
    for (const auto& spec : learners)
        for (int b = 0; b < plan.bags_per_split; ++b) {
            out.classifier_ids.push_back(spec.name + "." + std::to_string(b));
            out.group_of.push_back(spec.name);
        }

    const std::size_t n_folds = plan.folds.size();
    const std::size_t n_columns = out.classifier_ids.size();

    struct TaskResult {
        bool ok = false;
        std::string message;
        std::vector<double> test_scores;
        std::vector<double> val_scores;
    };
    std::vector<TaskResult> results(n_folds * n_columns);

    auto fit_rows = [&](const std::vector<int>& rows, const LearnerSpec& spec) {
        FeatureRows x;
        LabelVector y;
        x.reserve(rows.size());
        y.reserve(rows.size());
        for (int i : rows) {
            x.push_back(feature_row(i));
            y.push_back(label_of(i));
        }
        return fit_learner(spec, x, y);
    };

    parallel_for(n_folds * n_columns, [&](std::size_t task) {
        const std::size_t f = task / n_columns;
        const std::size_t col = task % n_columns;
        const auto& spec = learners[col / plan.bags_per_split];
        const int bag = static_cast<int>(col % plan.bags_per_split);
        const auto& fold = plan.folds[f];
        auto& result = results[task];
        try {
            const auto& balanced = fold.balanced[bag];
            const auto model = fit_rows(balanced, spec);
            result.test_scores.reserve(fold.test.size());
            for (int i : fold.test) result.test_scores.push_back(model->predict_proba(feature_row(i)));

            // one out-of-fold prediction per training instance
            result.val_scores.assign(fold.train.size(), 0.0);
            std::vector<int> position(dataset.size(), -1);
            for (std::size_t t = 0; t < fold.train.size(); ++t) position[fold.train[t]] = static_cast<int>(t);
            for (const auto& nested : fold.nested) {
                std::vector<bool> held(dataset.size(), false);
                for (int i : nested.heldout) held[i] = true;
                std::vector<int> bag_rows;
                bag_rows.reserve(balanced.size());
                for (int i : balanced)
                    if (!held[i]) bag_rows.push_back(i);
                const auto nested_model = fit_rows(bag_rows, spec);
                for (int i : nested.heldout)
                    result.val_scores[position[i]] = nested_model->predict_proba(feature_row(i));
            }
            result.ok = true;
        } catch (const std::exception& e) {
            result.message = "fold " + std::to_string(f) + " " + out.classifier_ids[col] +
                             ": " + e.what();
        }
    });

    out.folds.resize(n_folds);
    for (std::size_t f = 0; f < n_folds; ++f) {
        const auto& fold = plan.folds[f];
        auto& data = out.folds[f];
        for (int i : fold.train) data.val.instance_ids.push_back(id_of(i));
        for (int i : fold.test) data.test.instance_ids.push_back(id_of(i));
        for (int i : fold.train) data.val_labels.push_back(label_of(i));
        for (int i : fold.test) data.test_labels.push_back(label_of(i));
        for (std::size_t col = 0; col < n_columns; ++col) {
            auto& result = results[f * n_columns + col];
            if (!result.ok) {
                out.warnings.push_back(result.message);
                continue;
            }
            data.val.classifier_ids.push_back(out.classifier_ids[col]);
            data.val.group_of.push_back(out.group_of[col]);
            data.val.columns.push_back(std::move(result.val_scores));
            data.test.classifier_ids.push_back(out.classifier_ids[col]);
            data.test.group_of.push_back(out.group_of[col]);
            data.test.columns.push_back(std::move(result.test_scores));
        }
        if (data.val.cols() == 0)
            throw method_error("all learner columns failed in fold " + std::to_string(f));
    }
    return out;
}

enum class Method {
    best_base,
    mean,
    greedy,
    ces,
    stack_all,
    stack_aggregated,
    intra_cluster,
    inter_cluster,
};

inline Method parse_method(const std::string& name) {
    if (name == "best_base") return Method::best_base;
    if (name == "mean") return Method::mean;
    if (name == "greedy") return Method::greedy;
    if (name == "ces") return Method::ces;
    if (name == "stack_all") return Method::stack_all;
    if (name == "stack_agg" || name == "stack_aggregated") return Method::stack_aggregated;
    if (name == "intra" || name == "intra_cluster") return Method::intra_cluster;
    if (name == "inter" || name == "inter_cluster") return Method::inter_cluster;
    throw config_error("unknown method '" + name + "'");
}

inline const char* method_name(Method m) {
    switch (m) {
        case Method::best_base: return "best_base";
        case Method::mean: return "mean";
        case Method::greedy: return "greedy";
        case Method::ces: return "ces";
        case Method::stack_all: return "stack_all";
        case Method::stack_aggregated: return "stack_aggregated";
        case Method::intra_cluster: return "intra_cluster";
        case Method::inter_cluster: return "inter_cluster";
    }
    return "?";
}

struct EvaluateParams {
    CesParams ces;
    int greedy_max_size = 0; // 0 = whole pool
    LogisticOptions logistic;
    int cluster_k = 0; // 0 = sweep over sweep_range
    std::vector<int> sweep_range;
    ClusterDistance distance = ClusterDistance::pearson;
    double val_fraction = 1.0; // paper's large-data provision; applies to
                               // stack_all and the cluster methods
    std::uint64_t seed = 0;
};

namespace detail {

struct FoldOutcome {
    std::vector<double> test_scores;
    std::vector<double> val_trajectory;
    std::vector<std::pair<std::string, double>> weights;
    int ensemble_size = 0;
};

inline void merge_weights(std::map<std::string, double>& into,
                          const std::vector<std::pair<std::string, double>>& weights) {
    for (const auto& [id, w] : weights) into[id] += w;
}

} // namespace detail

// Fits the method on each fold's validation artifacts, pools every fold's
// test scores into one vector, and reports a single AUC and Brier score.
// Test labels are consumed only after all fitting is done.
inline MethodReport evaluate(Method method, const PipelineOutput& pipeline,
                             const EvaluateParams& params, const std::string& dataset_name = "") {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_folds = pipeline.folds.size();
    if (n_folds == 0) throw data_error("pipeline output is empty");

    std::vector<detail::FoldOutcome> outcomes(n_folds);
    for (std::size_t f = 0; f < n_folds; ++f) {
        const auto& fold = pipeline.folds[f];
        auto& outcome = outcomes[f];
        const std::uint64_t fold_seed = derive_seed(params.seed, 100 + f);

        switch (method) {
            case Method::best_base: {
                // bagged predictions of each learner are averaged before AUC;
                // scored later on the pooled vectors
                break;
            }
            case Method::mean: {
                outcome.test_scores = mean_aggregate(fold.test, fold.test.classifier_ids);
                outcome.ensemble_size = static_cast<int>(fold.test.cols());
                break;
            }
            case Method::greedy: {
                const int pool = static_cast<int>(fold.val.cols());
                const int max_size = params.greedy_max_size > 0
                                         ? std::min(params.greedy_max_size, pool)
                                         : pool;
                const auto traj = greedy_select(fold.val, fold.val_labels, max_size);
                const int best = traj.best_iteration();
                std::vector<std::string> subset;
                for (int t = 0; t <= best; ++t)
                    subset.push_back(fold.val.classifier_ids[traj.chosen_columns[t]]);
                outcome.test_scores = mean_aggregate(fold.test, subset);
                outcome.ensemble_size = best + 1;
                for (const auto& r : traj.records) outcome.val_trajectory.push_back(r.val_auc);
                outcome.weights = weights_from_counts(subset).members;
                break;
            }
            case Method::ces: {
                CesParams ces = params.ces;
                ces.seed = fold_seed;
                ces.init_n = std::min<int>(ces.init_n, static_cast<int>(fold.val.cols()));
                const auto [traj, final_model] = ces_select(fold.val, fold.val_labels, ces);
                (void)final_model;
                const int best = traj.best_iteration();
                std::vector<std::string> subset;
                for (int t = 0; t <= best; ++t)
                    subset.push_back(fold.val.classifier_ids[traj.chosen_columns[t]]);
                const auto model = weights_from_counts(subset);
                outcome.test_scores = apply_model(model, fold.test);
                outcome.ensemble_size = best + 1;
                outcome.weights = model.members;
                for (const auto& r : traj.records) outcome.val_trajectory.push_back(r.val_auc);
                break;
            }
            case Method::stack_all: {
                const auto [val, labels] = subsample_rows(fold.val, fold.val_labels,
                                                          params.val_fraction, fold_seed);
                const auto model = stack_all(val, labels, params.logistic);
                outcome.test_scores = apply_model(model, fold.test);
                outcome.ensemble_size = static_cast<int>(model.feature_ids.size());
                outcome.weights = meta_weights(model).normalized;
                break;
            }
            case Method::stack_aggregated: {
                const auto model = stack_aggregated(fold.val, fold.val_labels, params.logistic);
                outcome.test_scores = apply_model(model, fold.test);
                outcome.ensemble_size = static_cast<int>(model.feature_ids.size());
                outcome.weights = meta_weights(model).normalized;
                break;
            }
            case Method::intra_cluster:
            case Method::inter_cluster: {
                const auto [val, labels] = subsample_rows(fold.val, fold.val_labels,
                                                          params.val_fraction, fold_seed);
                const auto mode = method == Method::intra_cluster ? ClusterMode::intra
                                                                  : ClusterMode::inter;
                int k = params.cluster_k;
                if (k <= 0) {
                    std::vector<int> range = params.sweep_range;
                    if (range.empty())
                        for (int c = 1; c <= std::min<int>(8, static_cast<int>(val.cols())); ++c)
                            range.push_back(c);
                    k = sweep_k(val, labels, mode, range, params.distance, params.logistic)
                            .best_k;
                }
                k = std::min<int>(k, static_cast<int>(val.cols()));
                const auto model =
                    mode == ClusterMode::intra
                        ? intra_cluster_stack(val, labels, k, params.distance, params.logistic)
                        : inter_cluster_stack(val, labels, k, params.distance, params.logistic);
                outcome.test_scores = apply_model(model.model, fold.test);
                outcome.ensemble_size = k;
                if (mode == ClusterMode::inter)
                    outcome.weights = meta_weights(model.model).normalized;
                break;
            }
        }
    }

    MethodReport report;
    report.method = method_name(method);
    report.dataset = dataset_name;

    std::vector<double> pooled_scores;
    LabelVector pooled_labels;
    for (const auto& fold : pipeline.folds)
        pooled_labels.insert(pooled_labels.end(), fold.test_labels.begin(),
                             fold.test_labels.end());

    if (method == Method::best_base) {
        // pool each bag-aggregated column across folds, then take the max AUC
        std::vector<PredictionMatrix> aggregated;
        aggregated.reserve(n_folds);
        for (const auto& fold : pipeline.folds) aggregated.push_back(bag_aggregate(fold.test));
        double best_auc = -1.0;
        std::string best_id;
        std::vector<double> best_scores;
        for (const auto& id : aggregated[0].classifier_ids) {
            std::vector<double> scores;
            bool everywhere = true;
            for (const auto& m : aggregated) {
                const int j = m.column_index(id);
                if (j < 0) {
                    everywhere = false;
                    break;
                }
                const auto& col = m.column(static_cast<std::size_t>(j));
                scores.insert(scores.end(), col.begin(), col.end());
            }
            if (!everywhere) continue;
            const double a = auc(scores, pooled_labels);
            if (a > best_auc) {
                best_auc = a;
                best_id = id;
                best_scores = std::move(scores);
            }
        }
        if (best_id.empty()) throw method_error("no base classifier present in every fold");
        pooled_scores = std::move(best_scores);
        report.weights = {{best_id, 1.0}};
        report.ensemble_size = 1;
    } else {
        for (const auto& outcome : outcomes)
            pooled_scores.insert(pooled_scores.end(), outcome.test_scores.begin(),
                                 outcome.test_scores.end());

        // mean trajectory over folds, truncated to the shortest
        std::size_t traj_len = std::string::npos;
        for (const auto& o : outcomes)
            if (!o.val_trajectory.empty())
                traj_len = std::min(traj_len, o.val_trajectory.size());
        if (traj_len != std::string::npos) {
            report.val_trajectory.assign(traj_len, 0.0);
            for (const auto& o : outcomes)
                for (std::size_t t = 0; t < traj_len; ++t)
                    report.val_trajectory[t] += o.val_trajectory[t] / n_folds;
        }

        std::map<std::string, double> weight_sum;
        for (const auto& o : outcomes) detail::merge_weights(weight_sum, o.weights);
        for (const auto& [id, w] : weight_sum)
            report.weights.emplace_back(id, w / static_cast<double>(n_folds));

        double size_sum = 0.0;
        for (const auto& o : outcomes) size_sum += o.ensemble_size;
        report.ensemble_size = static_cast<int>(std::lround(size_sum / n_folds));
    }

    report.test_auc = auc(pooled_scores, pooled_labels);
    report.brier = brier(pooled_scores, pooled_labels);
    report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

} // namespace ensemblekit
