#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ensemblekit/combine.hpp"
#include "ensemblekit/core.hpp"
#include "ensemblekit/rng.hpp"

namespace ensemblekit {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

using FeatureRows = std::vector<std::vector<double>>; // n x p, row per instance

// Level-1 logistic regression model, L2 penalty on coefficients only.
struct LogisticModel {
    std::vector<double> coefficients;
    double intercept = 0.0;
    double lambda = 1e-3;
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_trace; // objective after each accepted step
};

namespace detail {

constexpr double kProbClip = 1e-12; // inside the log-likelihood only

inline double affine_score(const std::vector<double>& row, const std::vector<double>& coef,
                           double intercept) {
    double s = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) s += coef[j] * row[j];
    return s;
}

// penalized negative log-likelihood; intercept unpenalized
inline double logistic_objective(const FeatureRows& x, const LabelVector& y,
                                 const std::vector<double>& coef, double intercept,
                                 double lambda) {
    double nll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double p = sigmoid(affine_score(x[i], coef, intercept));
        p = std::min(1.0 - kProbClip, std::max(kProbClip, p));
        nll -= y[i] == 1 ? std::log(p) : std::log1p(-p);
    }
    double penalty = 0.0;
    for (double c : coef) penalty += c * c;
    return nll + 0.5 * lambda * penalty;
}

// gradient w.r.t. (coefficients..., intercept)
inline std::vector<double> logistic_gradient(const FeatureRows& x, const LabelVector& y,
                                             const std::vector<double>& coef, double intercept,
                                             double lambda) {
    std::vector<double> g(coef.size() + 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = sigmoid(affine_score(x[i], coef, intercept)) - static_cast<double>(y[i]);
        for (std::size_t j = 0; j < coef.size(); ++j) g[j] += r * x[i][j];
        g.back() += r;
    }
    for (std::size_t j = 0; j < coef.size(); ++j) g[j] += lambda * coef[j];
    return g;
}

// in-place Cholesky solve of A x = b for symmetric positive definite A;
// returns false when a pivot degenerates
inline bool cholesky_solve(std::vector<std::vector<double>> a, std::vector<double> b,
                           std::vector<double>& x) {
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
            if (i == j) {
                if (s <= 1e-300) return false;
                a[i][i] = std::sqrt(s);
            } else {
                a[i][j] = s / a[j][j];
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i][k] * b[k];
        b[i] = s / a[i][i];
    }
    x.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k][i] * x[k];
        x[i] = s / a[i][i];
    }
    return true;
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

} // namespace detail

struct LogisticOptions {
    double lambda = 1e-3;
    double tol = 1e-8;
    int max_iter = 100;
    std::vector<double> init_coefficients; // empty = zeros
    double init_intercept = 0.0;
};

// Fits by iteratively reweighted least squares with step-halving; falls back
// to backtracking gradient descent when the normal system is ill-conditioned.
// The objective never increases across accepted steps. Non-convergence within
// max_iter is flagged on the model, not thrown.
inline LogisticModel fit_logistic(const FeatureRows& features, const LabelVector& labels,
                                  const LogisticOptions& opts = {}) {
    const std::size_t n = features.size();
    if (n == 0 || n != labels.size()) throw data_error("bad logistic fit inputs");
    const std::size_t p = features[0].size();
    for (const auto& row : features) {
        if (row.size() != p) throw data_error("ragged feature matrix");
        for (double v : row)
            if (!std::isfinite(v)) throw data_error("non-finite feature value");
    }
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == 0) has_neg = true;
        else throw data_error("non-binary label in logistic fit");
    }
    if (!has_pos || !has_neg) throw method_error("logistic fit needs both classes");

    LogisticModel model;
    model.lambda = opts.lambda;
    model.coefficients = opts.init_coefficients.empty() ? std::vector<double>(p, 0.0)
                                                        : opts.init_coefficients;
    if (model.coefficients.size() != p) throw data_error("bad initial coefficient size");
    model.intercept = opts.init_intercept;

    double objective = detail::logistic_objective(features, labels, model.coefficients,
                                                  model.intercept, opts.lambda);
    model.objective_trace.push_back(objective);

    std::vector<double> grad = detail::logistic_gradient(features, labels, model.coefficients,
                                                         model.intercept, opts.lambda);
    for (int iter = 0; iter < opts.max_iter; ++iter) {
        if (detail::max_abs(grad) <= opts.tol) {
            model.converged = true;
            break;
        }
        model.iterations = iter + 1;

        // weighted normal equations; weights floored to keep the system SPD
        std::vector<std::vector<double>> h(p + 1, std::vector<double>(p + 1, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            const double q = sigmoid(
                detail::affine_score(features[i], model.coefficients, model.intercept));
            const double w = std::max(q * (1.0 - q), 1e-10);
            for (std::size_t a = 0; a < p; ++a) {
                const double wa = w * features[i][a];
                for (std::size_t b = 0; b <= a; ++b) h[a][b] += wa * features[i][b];
                h[p][a] += wa;
            }
            h[p][p] += w;
        }
        for (std::size_t a = 0; a < p; ++a) {
            h[a][a] += opts.lambda;
            for (std::size_t b = a + 1; b < p; ++b) h[a][b] = h[b][a];
            h[a][p] = h[p][a];
        }

        std::vector<double> rhs(p + 1);
        for (std::size_t j = 0; j <= p; ++j) rhs[j] = -grad[j];
        std::vector<double> step;
        bool have_step = detail::cholesky_solve(h, rhs, step);
        if (!have_step) {
            // gradient direction, unit-scaled
            step.assign(p + 1, 0.0);
            const double g = detail::max_abs(grad);
            for (std::size_t j = 0; j <= p; ++j) step[j] = -grad[j] / g;
        }

        double scale = 1.0;
        bool accepted = false;
        for (int half = 0; half < 60; ++half) {
            std::vector<double> coef = model.coefficients;
            for (std::size_t j = 0; j < p; ++j) coef[j] += scale * step[j];
            const double intercept = model.intercept + scale * step[p];
            const double candidate =
                detail::logistic_objective(features, labels, coef, intercept, opts.lambda);
            if (candidate <= objective) {
                const double step_size = scale * detail::max_abs(step);
                model.coefficients = std::move(coef);
                model.intercept = intercept;
                const bool tiny = step_size <= opts.tol;
                objective = candidate;
                model.objective_trace.push_back(objective);
                accepted = true;
                if (tiny) {
                    model.converged = true;
                    iter = opts.max_iter; // stop
                }
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) break; // no decrease possible at this point
        grad = detail::logistic_gradient(features, labels, model.coefficients, model.intercept,
                                         opts.lambda);
        if (detail::max_abs(grad) <= opts.tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

// Sigmoid of the fitted affine score per instance.
inline std::vector<double> predict_logistic(const LogisticModel& model,
                                            const FeatureRows& features) {
    std::vector<double> out;
    out.reserve(features.size());
    for (const auto& row : features) {
        if (row.size() != model.coefficients.size())
            throw data_error("feature width does not match model");
        out.push_back(sigmoid(detail::affine_score(row, model.coefficients, model.intercept)));
    }
    return out;
}

namespace detail {

inline FeatureRows rows_from_columns(const PredictionMatrix& matrix) {
    FeatureRows rows(matrix.rows(), std::vector<double>(matrix.cols()));
    for (std::size_t j = 0; j < matrix.cols(); ++j) {
        const auto& col = matrix.column(j);
        for (std::size_t i = 0; i < col.size(); ++i) rows[i][j] = col[i];
    }
    return rows;
}

// per-cluster column ids in feature order, clusters 1..k
inline std::vector<std::vector<std::string>> cluster_feature_ids(const EnsembleModel& model) {
    std::vector<std::vector<std::string>> by_cluster(model.cluster_count);
    for (const auto& id : model.feature_ids) {
        const auto it = model.cluster_of.find(id);
        if (it == model.cluster_of.end())
            throw data_error("no cluster assignment for column '" + id + "'");
        by_cluster[it->second - 1].push_back(id);
    }
    return by_cluster;
}

inline std::vector<std::size_t> require_columns(const PredictionMatrix& matrix,
                                                const std::vector<std::string>& ids) {
    std::vector<std::size_t> idx;
    idx.reserve(ids.size());
    for (const auto& id : ids) {
        const int j = matrix.column_index(id);
        if (j < 0) throw data_error("column mismatch at application time: missing '" + id + "'");
        idx.push_back(static_cast<std::size_t>(j));
    }
    return idx;
}

inline std::vector<double> predict_meta(const MetaParams& meta, const PredictionMatrix& matrix,
                                        const std::vector<std::size_t>& feature_columns) {
    if (meta.coefficients.size() != feature_columns.size())
        throw data_error("feature width does not match model");
    std::vector<double> out(matrix.rows());
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        double s = meta.intercept;
        for (std::size_t f = 0; f < feature_columns.size(); ++f)
            s += meta.coefficients[f] * matrix.column(feature_columns[f])[i];
        out[i] = sigmoid(s);
    }
    return out;
}

} // namespace detail

// Applies any fitted EnsembleModel to a prediction matrix.
inline std::vector<double> apply_model(const EnsembleModel& model,
                                       const PredictionMatrix& matrix) {
    switch (model.kind) {
        case ModelKind::weighted_mean: {
            if (model.members.empty()) throw method_error("empty weighted-mean model");
            std::vector<double> out(matrix.rows(), 0.0);
            for (const auto& [id, weight] : model.members) {
                const int j = matrix.column_index(id);
                if (j < 0) throw data_error("unknown classifier id '" + id + "'");
                const auto& col = matrix.column(static_cast<std::size_t>(j));
                for (std::size_t i = 0; i < out.size(); ++i) out[i] += weight * col[i];
            }
            return out;
        }
        case ModelKind::logistic_meta: {
            const PredictionMatrix* source = &matrix;
            PredictionMatrix aggregated;
            if (model.on_bag_groups) {
                aggregated = bag_aggregate(matrix);
                source = &aggregated;
            }
            return detail::predict_meta(model.metas.at(0), *source,
                                        detail::require_columns(*source, model.feature_ids));
        }
        case ModelKind::intra_cluster: {
            const auto by_cluster = detail::cluster_feature_ids(model);
            std::vector<double> sum(matrix.rows(), 0.0);
            for (int c = 0; c < model.cluster_count; ++c) {
                const auto scores = detail::predict_meta(
                    model.metas.at(c), matrix, detail::require_columns(matrix, by_cluster[c]));
                for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += scores[i];
            }
            const double inv = 1.0 / static_cast<double>(model.cluster_count);
            for (double& v : sum) v *= inv;
            return sum;
        }
        case ModelKind::inter_cluster: {
            const auto by_cluster = detail::cluster_feature_ids(model);
            PredictionMatrix means;
            means.instance_ids = matrix.instance_ids;
            for (int c = 0; c < model.cluster_count; ++c) {
                means.classifier_ids.push_back("cluster_" + std::to_string(c + 1));
                means.columns.push_back(
                    column_mean(matrix, detail::require_columns(matrix, by_cluster[c])));
            }
            means.group_of = means.classifier_ids;
            std::vector<std::size_t> all(means.cols());
            for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
            return detail::predict_meta(model.metas.at(0), means, all);
        }
    }
    throw method_error("unknown model kind");
}

// Stacking over every column of the validation matrix.
inline EnsembleModel stack_all(const PredictionMatrix& val_matrix, const LabelVector& val_labels,
                               const LogisticOptions& opts = {}) {
    const auto fit = fit_logistic(detail::rows_from_columns(val_matrix), val_labels, opts);
    EnsembleModel model;
    model.kind = ModelKind::logistic_meta;
    model.feature_ids = val_matrix.classifier_ids;
    model.metas.push_back({fit.coefficients, fit.intercept});
    return model;
}

// Stacking over bag-group means: identical to stack_all on the aggregated
// matrix, and the returned model aggregates again at application time.
inline EnsembleModel stack_aggregated(const PredictionMatrix& val_matrix,
                                      const LabelVector& val_labels,
                                      const LogisticOptions& opts = {}) {
    EnsembleModel model = stack_all(bag_aggregate(val_matrix), val_labels, opts);
    model.on_bag_groups = true;
    return model;
}

struct MetaWeights {
    std::vector<std::pair<std::string, double>> normalized; // |coef| scaled to sum 1
    std::vector<std::pair<std::string, double>> raw;        // signed coefficients
};

// Weight^m view of a stacked model: absolute coefficients normalized to sum 1,
// with the raw signed coefficients alongside.
inline MetaWeights meta_weights(const EnsembleModel& model) {
    if (model.metas.size() != 1)
        throw method_error("meta weights need a single stacked unit");
    const auto& meta = model.metas[0];
    MetaWeights out;
    double total = 0.0;
    for (double c : meta.coefficients) total += std::abs(c);
    for (std::size_t j = 0; j < meta.coefficients.size(); ++j) {
        const std::string& id = model.feature_ids[j];
        out.raw.emplace_back(id, meta.coefficients[j]);
        out.normalized.emplace_back(id, total > 0.0 ? std::abs(meta.coefficients[j]) / total : 0.0);
    }
    return out;
}

// Uniform row subsample (without replacement, ascending order) used for the
// large-data validation-fraction provision. fraction >= 1 keeps everything.
inline std::pair<PredictionMatrix, LabelVector> subsample_rows(const PredictionMatrix& matrix,
                                                               const LabelVector& labels,
                                                               double fraction,
                                                               std::uint64_t seed) {
    if (fraction >= 1.0) return {matrix, labels};
    if (fraction <= 0.0) throw config_error("validation fraction must be in (0, 1]");
    const std::size_t n = matrix.rows();
    std::size_t keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    keep = std::max<std::size_t>(keep, 2);
    Rng rng(seed);
    auto picked = rng.sample_without_replacement(n, keep);
    std::sort(picked.begin(), picked.end());
    std::vector<int> rows(picked.begin(), picked.end());
    return {take_rows(matrix, rows), take(labels, rows)};
}

} // namespace ensemblekit
