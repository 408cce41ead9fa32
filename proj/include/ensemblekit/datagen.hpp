#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "ensemblekit/core.hpp"
#include "ensemblekit/rng.hpp"
#include "ensemblekit/stack.hpp"

namespace ensemblekit {

// One synthetic classifier: latent z = signal*(2y-1) + shared_loading*g + e
// with g shared across classifiers and e independent per column. The emitted
// score is a logit-affine miscalibration of the normalized latent; alpha=1,
// beta=0 emits the calibrated score.
struct ClassifierSpec {
    double signal = 1.0;         // a_j >= 0, separation strength
    double shared_loading = 0.0; // b_j, inter-classifier correlation
    double calib_alpha = 1.0;    // > 0
    double calib_beta = 0.0;
};

struct PoolSpec {
    int n_instances = 1000;
    double positive_rate = 0.5;
    std::vector<ClassifierSpec> classifiers;
    int bags = 1; // independent e redraws per classifier sharing (a, b, calib)
    std::uint64_t seed = 0;

    void validate() const {
        if (n_instances < 1) throw config_error("pool needs at least one instance");
        if (!(positive_rate > 0.0 && positive_rate < 1.0))
            throw config_error("positive rate must be in (0, 1)");
        if (classifiers.empty()) throw config_error("pool needs at least one classifier");
        if (bags < 1) throw config_error("bags must be >= 1");
        for (const auto& c : classifiers) {
            if (c.signal < 0.0) throw config_error("signal must be >= 0");
            if (c.calib_alpha <= 0.0) throw config_error("calibration alpha must be > 0");
        }
    }
};

// Exact posterior of the generator: z | y=1 ~ N(+a, bb' + I) against
// z | y=0 ~ N(-a, bb' + I), giving log LR = 2 a' inv(Sigma) z via
// Sherman-Morrison. This is the AUC ceiling for any combiner.
class BayesOracle {
public:
    BayesOracle() = default;
    BayesOracle(std::vector<double> a, std::vector<double> b, double positive_rate,
                std::vector<std::vector<double>> latents)
        : a_(std::move(a)), b_(std::move(b)), prior_logit_(logit(positive_rate)),
          latents_(std::move(latents)) {
        double bb = 0.0;
        for (double v : b_) bb += v * v;
        one_plus_bb_ = 1.0 + bb;
        ab_ = 0.0;
        for (std::size_t j = 0; j < a_.size(); ++j) ab_ += a_[j] * b_[j];
    }

    std::size_t columns() const { return a_.size(); }

    double posterior_from_latents(const std::vector<double>& z) const {
        if (z.size() != a_.size()) throw data_error("latent vector width mismatch");
        double az = 0.0, bz = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) {
            az += a_[j] * z[j];
            bz += b_[j] * z[j];
        }
        const double log_lr = 2.0 * (az - ab_ * bz / one_plus_bb_);
        return sigmoid(log_lr + prior_logit_);
    }

    double posterior(std::size_t instance) const {
        return posterior_from_latents(latents_[instance]);
    }

    std::vector<double> posteriors() const {
        std::vector<double> out;
        out.reserve(latents_.size());
        for (std::size_t i = 0; i < latents_.size(); ++i) out.push_back(posterior(i));
        return out;
    }

    const std::vector<double>& latents(std::size_t instance) const { return latents_[instance]; }

private:
    std::vector<double> a_;
    std::vector<double> b_;
    double prior_logit_ = 0.0;
    double one_plus_bb_ = 1.0;
    double ab_ = 0.0;
    std::vector<std::vector<double>> latents_; // per instance, per column
};

struct GeneratedPool {
    PredictionMatrix matrix;
    LabelVector labels;
    BayesOracle oracle;
};

// Draw order is labels, shared noise, then per-column noise, so specs that
// differ only in calibration produce identical latents under the same seed.
inline GeneratedPool generate(const PoolSpec& spec) {
    spec.validate();
    const std::size_t n = static_cast<std::size_t>(spec.n_instances);
    const std::size_t total_cols = spec.classifiers.size() * static_cast<std::size_t>(spec.bags);

    Rng rng(spec.seed);
    GeneratedPool pool;
    pool.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        pool.labels[i] = rng.bernoulli(spec.positive_rate) ? 1 : 0;
    std::vector<double> shared(n);
    for (std::size_t i = 0; i < n; ++i) shared[i] = rng.normal();

    pool.matrix.instance_ids.reserve(n);
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "i%05zu", i);
        pool.matrix.instance_ids.emplace_back(buf);
    }

    std::vector<double> col_a, col_b;
    col_a.reserve(total_cols);
    col_b.reserve(total_cols);
    std::vector<std::vector<double>> latents(n, std::vector<double>(total_cols, 0.0));

    std::size_t col = 0;
    for (std::size_t j = 0; j < spec.classifiers.size(); ++j) {
        const auto& c = spec.classifiers[j];
        const double norm = 1.0 / std::sqrt(c.signal * c.signal +
                                            c.shared_loading * c.shared_loading + 1.0);
        std::snprintf(buf, sizeof(buf), "c%02zu", j);
        const std::string group(buf);
        for (int b = 0; b < spec.bags; ++b) {
            pool.matrix.classifier_ids.push_back(group + "." + std::to_string(b));
            pool.matrix.group_of.push_back(group);
            std::vector<double> column(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double z = c.signal * (2.0 * pool.labels[i] - 1.0) +
                                 c.shared_loading * shared[i] + rng.normal();
                latents[i][col] = z;
                // emitted score = sigmoid(alpha * logit(calibrated) + beta),
                // with calibrated = sigmoid(z * norm)
                column[i] = sigmoid(c.calib_alpha * z * norm + c.calib_beta);
            }
            pool.matrix.columns.push_back(std::move(column));
            col_a.push_back(c.signal);
            col_b.push_back(c.shared_loading);
            ++col;
        }
    }
    pool.oracle = BayesOracle(std::move(col_a), std::move(col_b), spec.positive_rate,
                              std::move(latents));
    return pool;
}

inline double bayes_posterior(const BayesOracle& oracle, const std::vector<double>& latents) {
    return oracle.posterior_from_latents(latents);
}

} // namespace ensemblekit
