#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "ensemblekit/core.hpp"
#include "ensemblekit/stack.hpp"

namespace ensemblekit {

// Native base learners standing in for a heterogeneous classifier pool:
// ridge logistic regression, a Gini decision tree, distance-weighted kNN and
// Gaussian naive Bayes. Four mechanically different inductive biases.

struct LearnerSpec {
    std::string name; // logistic | tree | knn | nb
    double logistic_lambda = 1e-3;
    int tree_max_depth = 5;
    int tree_min_split = 4;
    int knn_k = 5;
    double nb_var_floor = 1e-9;
};

class FittedLearner {
public:
    virtual ~FittedLearner() = default;
    virtual double predict_proba(const std::vector<double>& row) const = 0;

    std::vector<double> predict_proba(const FeatureRows& rows) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(predict_proba(r));
        return out;
    }
};

namespace detail {

class LogisticLearner final : public FittedLearner {
public:
    LogisticLearner(const FeatureRows& x, const LabelVector& y, double lambda) {
        LogisticOptions opts;
        opts.lambda = lambda;
        model_ = fit_logistic(x, y, opts);
    }
    double predict_proba(const std::vector<double>& row) const override {
        return sigmoid(affine_score(row, model_.coefficients, model_.intercept));
    }

private:
    LogisticModel model_;
};

class TreeLearner final : public FittedLearner {
public:
    TreeLearner(const FeatureRows& x, const LabelVector& y, int max_depth, int min_split) {
        if (x.empty()) throw method_error("tree fit on empty data");
        std::vector<int> idx(x.size());
        std::iota(idx.begin(), idx.end(), 0);
        build(x, y, idx, 0, max_depth, min_split);
    }

    double predict_proba(const std::vector<double>& row) const override {
        int node = 0;
        while (nodes_[node].feature >= 0)
            node = row[nodes_[node].feature] <= nodes_[node].threshold ? nodes_[node].left
                                                                       : nodes_[node].right;
        return nodes_[node].probability;
    }

private:
    struct Node {
        int feature = -1; // -1 = leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        double probability = 0.0;
    };
    std::vector<Node> nodes_;

    static double gini(double pos, double total) {
        if (total == 0.0) return 0.0;
        const double p = pos / total;
        return 2.0 * p * (1.0 - p);
    }

    int build(const FeatureRows& x, const LabelVector& y, const std::vector<int>& idx,
              int depth, int max_depth, int min_split) {
        const int node = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        double pos = 0.0;
        for (int i : idx) pos += y[i];
        const double total = static_cast<double>(idx.size());
        nodes_[node].probability = pos / total;
        if (depth >= max_depth || static_cast<int>(idx.size()) < min_split || pos == 0.0 ||
            pos == total)
            return node;

        const std::size_t n_features = x[0].size();
        int best_feature = -1;
        double best_threshold = 0.0, best_impurity = gini(pos, total);
        for (std::size_t f = 0; f < n_features; ++f) {
            std::vector<int> order(idx);
            std::sort(order.begin(), order.end(),
                      [&x, f](int a, int b) { return x[a][f] < x[b][f]; });
            double left_pos = 0.0;
            for (std::size_t s = 0; s + 1 < order.size(); ++s) {
                left_pos += y[order[s]];
                const double lo = x[order[s]][f], hi = x[order[s + 1]][f];
                if (lo == hi) continue;
                const double nl = static_cast<double>(s + 1), nr = total - nl;
                const double impurity =
                    (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / total;
                if (impurity < best_impurity - 1e-12) {
                    best_impurity = impurity;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (lo + hi);
                }
            }
        }
        if (best_feature < 0) return node;

        std::vector<int> left, right;
        for (int i : idx)
            (x[i][best_feature] <= best_threshold ? left : right).push_back(i);
        if (left.empty() || right.empty()) return node;
        nodes_[node].feature = best_feature;
        nodes_[node].threshold = best_threshold;
        const int l = build(x, y, left, depth + 1, max_depth, min_split);
        nodes_[node].left = l;
        const int r = build(x, y, right, depth + 1, max_depth, min_split);
        nodes_[node].right = r;
        return node;
    }
};

class KnnLearner final : public FittedLearner {
public:
    KnnLearner(FeatureRows x, LabelVector y, int k)
        : x_(std::move(x)), y_(std::move(y)), k_(std::min<std::size_t>(k, x_.size())) {
        if (x_.empty()) throw method_error("knn fit on empty data");
    }

    double predict_proba(const std::vector<double>& row) const override {
        std::vector<std::pair<double, std::size_t>> dist;
        dist.reserve(x_.size());
        for (std::size_t i = 0; i < x_.size(); ++i) {
            double d = 0.0;
            for (std::size_t f = 0; f < row.size(); ++f) {
                const double diff = x_[i][f] - row[f];
                d += diff * diff;
            }
            dist.emplace_back(d, i);
        }
        std::partial_sort(dist.begin(), dist.begin() + k_, dist.end());
        double wsum = 0.0, wpos = 0.0;
        for (std::size_t t = 0; t < k_; ++t) {
            const double w = 1.0 / (std::sqrt(dist[t].first) + 1e-9);
            wsum += w;
            if (y_[dist[t].second] == 1) wpos += w;
        }
        return wpos / wsum;
    }

private:
    FeatureRows x_;
    LabelVector y_;
    std::size_t k_;
};

class NaiveBayesLearner final : public FittedLearner {
public:
    NaiveBayesLearner(const FeatureRows& x, const LabelVector& y, double var_floor) {
        if (x.empty()) throw method_error("naive Bayes fit on empty data");
        const std::size_t p = x[0].size();
        double n_pos = 0.0;
        for (int v : y) n_pos += v;
        const double n = static_cast<double>(x.size());
        if (n_pos == 0.0 || n_pos == n) throw method_error("naive Bayes needs both classes");
        log_prior_pos_ = std::log(n_pos / n);
        log_prior_neg_ = std::log(1.0 - n_pos / n);
        mean_[0].assign(p, 0.0);
        mean_[1].assign(p, 0.0);
        var_[0].assign(p, 0.0);
        var_[1].assign(p, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t f = 0; f < p; ++f) mean_[y[i]][f] += x[i][f];
        for (std::size_t f = 0; f < p; ++f) {
            mean_[1][f] /= n_pos;
            mean_[0][f] /= n - n_pos;
        }
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t f = 0; f < p; ++f) {
                const double d = x[i][f] - mean_[y[i]][f];
                var_[y[i]][f] += d * d;
            }
        for (std::size_t f = 0; f < p; ++f) {
            var_[1][f] = std::max(var_[1][f] / n_pos, var_floor);
            var_[0][f] = std::max(var_[0][f] / (n - n_pos), var_floor);
        }
    }

    double predict_proba(const std::vector<double>& row) const override {
        double lp = log_prior_pos_, ln = log_prior_neg_;
        for (std::size_t f = 0; f < row.size(); ++f) {
            lp += log_gauss(row[f], mean_[1][f], var_[1][f]);
            ln += log_gauss(row[f], mean_[0][f], var_[0][f]);
        }
        return sigmoid(lp - ln);
    }

private:
    static double log_gauss(double x, double mean, double var) {
        const double d = x - mean;
        return -0.5 * (std::log(6.283185307179586 * var) + d * d / var);
    }
    double log_prior_pos_ = 0.0, log_prior_neg_ = 0.0;
    std::vector<double> mean_[2], var_[2];
};

} // namespace detail

inline std::unique_ptr<FittedLearner> fit_learner(const LearnerSpec& spec, const FeatureRows& x,
                                                  const LabelVector& y) {
    if (x.size() != y.size() || x.empty()) throw data_error("bad learner fit inputs");
    if (spec.name == "logistic")
        return std::make_unique<detail::LogisticLearner>(x, y, spec.logistic_lambda);
    if (spec.name == "tree")
        return std::make_unique<detail::TreeLearner>(x, y, spec.tree_max_depth,
                                                     spec.tree_min_split);
    if (spec.name == "knn") return std::make_unique<detail::KnnLearner>(x, y, spec.knn_k);
    if (spec.name == "nb")
        return std::make_unique<detail::NaiveBayesLearner>(x, y, spec.nb_var_floor);
    throw config_error("unknown learner '" + spec.name + "'");
}

} // namespace ensemblekit
