#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ensemblekit/cluster.hpp"
#include "ensemblekit/combine.hpp"
#include "ensemblekit/core.hpp"
#include "ensemblekit/cv.hpp"
#include "ensemblekit/datagen.hpp"
#include "ensemblekit/io.hpp"
#include "ensemblekit/metrics.hpp"
#include "ensemblekit/parallel.hpp"
#include "ensemblekit/select.hpp"
#include "ensemblekit/stack.hpp"
#include "ensemblekit/stats.hpp"

namespace ensemblekit::cli {

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// provenance comment for every emitted CSV
inline std::string provenance(const std::vector<std::pair<std::string, std::string>>& config,
                              std::uint64_t seed) {
    std::vector<std::pair<std::string, std::string>> sorted(config);
    std::sort(sorted.begin(), sorted.end());
    std::string canon;
    for (const auto& [k, v] : sorted) canon += k + "=" + v + "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "config_hash=%016llx seed=%llu",
                  static_cast<unsigned long long>(fnv1a(canon)),
                  static_cast<unsigned long long>(seed));
    return buf;
}

inline void require_file(const std::string& path) {
    if (path.empty() || !std::filesystem::exists(path))
        throw config_error("input file does not exist: '" + path + "'");
}

inline void require_out_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw config_error("cannot create output directory '" + dir + "'");
}

inline std::ofstream open_csv(const std::string& path, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path + "'");
    out << "# " << comment << "\n";
    return out;
}

inline std::string fmt(double v) { return ensemblekit::detail::format_double(v); }

inline std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    for (auto& item : ensemblekit::detail::split(csv, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// plain-text `key = value` config with [section] headers; keys are returned
// as section.key (top level keys unprefixed)
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
    require_file(path);
    std::ifstream in(path);
    std::map<std::string, std::string> out;
    std::string line, section;
    while (std::getline(in, line)) {
        line = ensemblekit::detail::trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = ensemblekit::detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("bad config line: '" + line + "'");
        const std::string key = ensemblekit::detail::trim(line.substr(0, eq));
        const std::string value = ensemblekit::detail::trim(line.substr(eq + 1));
        if (key.empty()) throw config_error("bad config line: '" + line + "'");
        out[section.empty() ? key : section + "." + key] = value;
    }
    return out;
}

inline double config_num(const std::map<std::string, std::string>& cfg, const std::string& key,
                         double fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return ensemblekit::detail::parse_double(it->second, "for config key " + key);
    } catch (const data_error& e) {
        throw config_error(e.what());
    }
}

inline std::string config_str(const std::map<std::string, std::string>& cfg,
                              const std::string& key, const std::string& fallback) {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

inline std::pair<int, int> parse_range(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos)
        throw config_error("expected a range like 2..8, got '" + text + "'");
    try {
        return {std::stoi(text.substr(0, dots)), std::stoi(text.substr(dots + 2))};
    } catch (const std::exception&) {
        throw config_error("expected a range like 2..8, got '" + text + "'");
    }
}

struct LoadedPredictions {
    PredictionMatrix matrix;
    LabelVector labels;
};

inline LoadedPredictions load_predictions(const std::string& predictions_path,
                                          const std::string& labels_path,
                                          const std::string& groups_path) {
    require_file(predictions_path);
    require_file(labels_path);
    if (!groups_path.empty()) require_file(groups_path);
    LoadedPredictions out;
    out.matrix = read_predictions(predictions_path, groups_path);
    auto [ids, labels] = read_labels(labels_path);
    if (ids != out.matrix.instance_ids)
        throw data_error("label instance ids do not match prediction rows");
    out.labels = std::move(labels);
    validate_matrix(out.matrix, out.labels);
    return out;
}

inline void write_trajectory_csv(const std::string& path, const SelectionTrajectory& traj,
                                 const std::string& comment) {
    auto out = open_csv(path, comment);
    out << "iteration,chosen,val_auc,mean_diversity,brier\n";
    for (std::size_t t = 0; t < traj.records.size(); ++t) {
        const auto& r = traj.records[t];
        out << t + 1 << ',' << r.chosen << ',' << fmt(r.val_auc) << ','
            << fmt(r.mean_diversity) << ',' << fmt(r.brier) << '\n';
    }
}

} // namespace detail

struct SynthOptions {
    std::string out_dir;
    int instances = 1000;
    double positive_rate = 0.5;
    int bags = 1;
    std::uint64_t seed = 42;
    std::vector<std::string> classifier_specs;
};

inline PoolSpec build_pool_spec(const SynthOptions& opt) {
    PoolSpec spec;
    spec.n_instances = opt.instances;
    spec.positive_rate = opt.positive_rate;
    spec.bags = opt.bags;
    spec.seed = opt.seed;
    auto specs = opt.classifier_specs;
    if (specs.empty())
        specs = {"a=1.0,b=0.8,count=4", "a=0.7,b=0.0,count=3",
                 "a=0.4,b=0.0,alpha=3,beta=1,count=3"};
    for (const auto& text : specs) {
        ClassifierSpec c;
        int count = 1;
        for (const auto& field : detail::split_list(text)) {
            const auto eq = field.find('=');
            if (eq == std::string::npos)
                throw config_error("bad classifier spec field '" + field + "'");
            const std::string key = field.substr(0, eq);
            const std::string value = field.substr(eq + 1);
            try {
                if (key == "a") c.signal = std::stod(value);
                else if (key == "b") c.shared_loading = std::stod(value);
                else if (key == "alpha") c.calib_alpha = std::stod(value);
                else if (key == "beta") c.calib_beta = std::stod(value);
                else if (key == "count") count = std::stoi(value);
                else throw config_error("unknown classifier spec key '" + key + "'");
            } catch (const config_error&) {
                throw;
            } catch (const std::exception&) {
                throw config_error("bad classifier spec value '" + field + "'");
            }
        }
        for (int i = 0; i < count; ++i) spec.classifiers.push_back(c);
    }
    return spec;
}

inline void cmd_synth(const SynthOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    const auto spec = build_pool_spec(opt);
    const auto pool = generate(spec);

    std::vector<std::pair<std::string, std::string>> cfg = {
        {"cmd", "synth"},
        {"instances", std::to_string(opt.instances)},
        {"positive_rate", detail::fmt(opt.positive_rate)},
        {"bags", std::to_string(opt.bags)},
        {"seed", std::to_string(opt.seed)},
    };
    for (std::size_t i = 0; i < opt.classifier_specs.size(); ++i)
        cfg.emplace_back("classifier_" + std::to_string(i), opt.classifier_specs[i]);
    const auto comment = detail::provenance(cfg, opt.seed);

    const auto dir = std::filesystem::path(opt.out_dir);
    write_predictions((dir / "predictions.csv").string(), pool.matrix, comment);
    write_labels((dir / "labels.csv").string(), pool.matrix.instance_ids, pool.labels, comment);
    write_groups((dir / "groups.tsv").string(), pool.matrix, comment);

    auto oracle = detail::open_csv((dir / "oracle.csv").string(), comment);
    oracle << "# classifiers=" << spec.classifiers.size() << " bags=" << spec.bags << '\n';
    for (std::size_t j = 0; j < spec.classifiers.size(); ++j) {
        const auto& c = spec.classifiers[j];
        oracle << "# c" << j << " a=" << detail::fmt(c.signal) << " b="
               << detail::fmt(c.shared_loading) << " alpha=" << detail::fmt(c.calib_alpha)
               << " beta=" << detail::fmt(c.calib_beta) << '\n';
    }
    oracle << "instance_id,bayes_posterior\n";
    for (std::size_t i = 0; i < pool.matrix.rows(); ++i)
        oracle << pool.matrix.instance_ids[i] << ',' << detail::fmt(pool.oracle.posterior(i))
               << '\n';
}

struct SelectOptions {
    std::string predictions, labels, groups, out_dir;
    std::string method = "ces";
    int init_n = 2;
    int max_size = 100;
    double candidate_fraction = 1.0;
    bool no_replacement = false;
    std::uint64_t seed = 42;
};

inline void cmd_select(const SelectOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    const auto data = detail::load_predictions(opt.predictions, opt.labels, opt.groups);
    const auto comment = detail::provenance(
        {{"cmd", "select"},
         {"method", opt.method},
         {"init_n", std::to_string(opt.init_n)},
         {"max_size", std::to_string(opt.max_size)},
         {"candidate_fraction", detail::fmt(opt.candidate_fraction)},
         {"with_replacement", opt.no_replacement ? "0" : "1"},
         {"seed", std::to_string(opt.seed)}},
        opt.seed);

    SelectionTrajectory traj;
    if (opt.method == "greedy") {
        const int max_size = std::min<int>(opt.max_size, static_cast<int>(data.matrix.cols()));
        traj = greedy_select(data.matrix, data.labels, max_size);
    } else if (opt.method == "ces") {
        CesParams params;
        params.init_n = opt.init_n;
        params.max_size = opt.max_size;
        params.candidate_fraction = opt.candidate_fraction;
        params.with_replacement = !opt.no_replacement;
        params.seed = derive_seed(opt.seed, 3);
        auto [trajectory, model] = ces_select(data.matrix, data.labels, params);
        traj = std::move(trajectory);
        auto weights = detail::open_csv(
            (std::filesystem::path(opt.out_dir) / "weights.csv").string(), comment);
        weights << "classifier,weight\n";
        for (const auto& [id, w] : model.members) weights << id << ',' << detail::fmt(w) << '\n';
    } else {
        throw config_error("method must be greedy or ces");
    }
    detail::write_trajectory_csv(
        (std::filesystem::path(opt.out_dir) / "trajectory.csv").string(), traj, comment);
    const int best = traj.best_iteration();
    std::cout << "method=" << opt.method << " iterations=" << traj.records.size()
              << " best_size=" << best + 1 << " best_val_auc="
              << detail::fmt(traj.records[best].val_auc) << "\n";
}

struct StackOptions {
    std::string predictions, labels, groups, out_dir;
    std::string mode = "all";
    double lambda = 1e-3;
    double val_fraction = 1.0;
    std::uint64_t seed = 42;
};

inline void cmd_stack(const StackOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    const auto data = detail::load_predictions(opt.predictions, opt.labels, opt.groups);
    const auto comment = detail::provenance({{"cmd", "stack"},
                                             {"mode", opt.mode},
                                             {"lambda", detail::fmt(opt.lambda)},
                                             {"val_fraction", detail::fmt(opt.val_fraction)},
                                             {"seed", std::to_string(opt.seed)}},
                                            opt.seed);
    LogisticOptions logistic;
    logistic.lambda = opt.lambda;
    const auto [matrix, labels] =
        subsample_rows(data.matrix, data.labels, opt.val_fraction, derive_seed(opt.seed, 4));

    EnsembleModel model;
    if (opt.mode == "all")
        model = stack_all(matrix, labels, logistic);
    else if (opt.mode == "aggregated")
        model = stack_aggregated(matrix, labels, logistic);
    else
        throw config_error("mode must be all or aggregated");

    const auto weights = meta_weights(model);
    auto out = detail::open_csv((std::filesystem::path(opt.out_dir) / "weights.csv").string(),
                                comment);
    out << "feature_id,coefficient,weight\n";
    for (std::size_t j = 0; j < weights.raw.size(); ++j)
        out << weights.raw[j].first << ',' << detail::fmt(weights.raw[j].second) << ','
            << detail::fmt(weights.normalized[j].second) << '\n';
    const auto scores = apply_model(model, data.matrix);
    std::cout << "mode=" << opt.mode << " features=" << model.feature_ids.size()
              << " train_auc=" << detail::fmt(auc(scores, data.labels)) << " train_brier="
              << detail::fmt(brier(scores, data.labels)) << "\n";
}

struct ClusterStackOptions {
    std::string predictions, labels, groups, out_dir;
    std::string mode = "intra";
    std::string distance = "pearson";
    int k = 0;            // single k
    std::string sweep;    // "min..max"
    double lambda = 1e-3;
    std::uint64_t seed = 42;
};

inline void cmd_cluster_stack(const ClusterStackOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    const auto data = detail::load_predictions(opt.predictions, opt.labels, opt.groups);
    const auto comment = detail::provenance({{"cmd", "cluster-stack"},
                                             {"mode", opt.mode},
                                             {"distance", opt.distance},
                                             {"k", std::to_string(opt.k)},
                                             {"sweep", opt.sweep},
                                             {"lambda", detail::fmt(opt.lambda)},
                                             {"seed", std::to_string(opt.seed)}},
                                            opt.seed);
    ClusterMode mode;
    if (opt.mode == "intra") mode = ClusterMode::intra;
    else if (opt.mode == "inter") mode = ClusterMode::inter;
    else throw config_error("mode must be intra or inter");
    ClusterDistance distance;
    if (opt.distance == "pearson") distance = ClusterDistance::pearson;
    else if (opt.distance == "qstat") distance = ClusterDistance::qstat;
    else throw config_error("distance must be pearson or qstat");
    LogisticOptions logistic;
    logistic.lambda = opt.lambda;

    int k = opt.k;
    const auto dir = std::filesystem::path(opt.out_dir);
    if (!opt.sweep.empty()) {
        const auto [lo, hi] = detail::parse_range(opt.sweep);
        std::vector<int> range;
        for (int c = lo; c <= hi; ++c) range.push_back(c);
        const auto sweep = sweep_k(data.matrix, data.labels, mode, range, distance, logistic);
        auto out = detail::open_csv((dir / "sweep.csv").string(), comment);
        out << "k,val_auc\n";
        for (const auto& [kk, a] : sweep.per_k) out << kk << ',' << detail::fmt(a) << '\n';
        k = sweep.best_k;
        std::cout << "best_k=" << k << "\n";
    }
    if (k < 1) throw config_error("give --k or --sweep");

    const auto model = mode == ClusterMode::intra
                           ? intra_cluster_stack(data.matrix, data.labels, k, distance, logistic)
                           : inter_cluster_stack(data.matrix, data.labels, k, distance, logistic);
    auto out = detail::open_csv((dir / "assignment.csv").string(), comment);
    out << "classifier,cluster\n";
    for (std::size_t j = 0; j < data.matrix.cols(); ++j)
        out << data.matrix.classifier_ids[j] << ',' << model.assignment[j] << '\n';
    const auto scores = apply_model(model.model, data.matrix);
    std::cout << "mode=" << opt.mode << " k=" << k << " val_auc="
              << detail::fmt(auc(scores, data.labels)) << "\n";
}

struct DiversityOptions {
    std::string predictions, labels, groups, out_dir;
    bool no_aggregate_bags = false;
    int top = 2;
    std::uint64_t seed = 42;
};

// Figure-2 style scatter data: adjusted Q of each classifier pair against the
// AUC of the pair's mean, flagging pairs containing a top individual.
inline void cmd_diversity(const DiversityOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    const auto data = detail::load_predictions(opt.predictions, opt.labels, opt.groups);
    const auto comment = detail::provenance({{"cmd", "diversity"},
                                             {"aggregate_bags", opt.no_aggregate_bags ? "0" : "1"},
                                             {"top", std::to_string(opt.top)},
                                             {"seed", std::to_string(opt.seed)}},
                                            opt.seed);
    const PredictionMatrix matrix =
        opt.no_aggregate_bags ? data.matrix : bag_aggregate(data.matrix);
    if (matrix.cols() < 2) throw data_error("diversity needs at least 2 classifiers");

    std::vector<double> individual(matrix.cols());
    for (std::size_t j = 0; j < matrix.cols(); ++j)
        individual[j] = auc(matrix.column(j), data.labels);
    std::vector<std::size_t> order(matrix.cols());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&individual](std::size_t a, std::size_t b) {
        return individual[a] > individual[b];
    });
    std::vector<bool> is_top(matrix.cols(), false);
    for (int t = 0; t < opt.top && t < static_cast<int>(order.size()); ++t)
        is_top[order[t]] = true;

    const auto div = diversity_matrix(matrix, data.labels);
    auto out = detail::open_csv(
        (std::filesystem::path(opt.out_dir) / "diversity.csv").string(), comment);
    out << "classifier_a,classifier_b,q_adjusted,pair_mean_auc,either_is_top_performer\n";
    for (std::size_t j = 0; j < matrix.cols(); ++j)
        for (std::size_t l = j + 1; l < matrix.cols(); ++l) {
            const auto pair_mean = column_mean(matrix, {j, l});
            out << matrix.classifier_ids[j] << ',' << matrix.classifier_ids[l] << ','
                << detail::fmt(div[j][l]) << ',' << detail::fmt(auc(pair_mean, data.labels))
                << ',' << (is_top[j] || is_top[l] ? 1 : 0) << '\n';
        }
}

struct CalibrationOptions {
    std::string predictions, labels, groups, out_dir;
    int init_n = 2;
    int max_size = 100;
    std::uint64_t seed = 42;
};

// Figure-4 style data: Brier against AUC for every base classifier and for
// every iteration of greedy selection and CES.
inline void cmd_calibration(const CalibrationOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    const auto data = detail::load_predictions(opt.predictions, opt.labels, opt.groups);
    const auto comment = detail::provenance({{"cmd", "calibration"},
                                             {"init_n", std::to_string(opt.init_n)},
                                             {"max_size", std::to_string(opt.max_size)},
                                             {"seed", std::to_string(opt.seed)}},
                                            opt.seed);
    auto out = detail::open_csv(
        (std::filesystem::path(opt.out_dir) / "calibration.csv").string(), comment);
    out << "series,iteration,id,auc,brier\n";
    for (std::size_t j = 0; j < data.matrix.cols(); ++j)
        out << "base," << j + 1 << ',' << data.matrix.classifier_ids[j] << ','
            << detail::fmt(auc(data.matrix.column(j), data.labels)) << ','
            << detail::fmt(brier(data.matrix.column(j), data.labels)) << '\n';

    const int pool = static_cast<int>(data.matrix.cols());
    const auto greedy = greedy_select(data.matrix, data.labels, std::min(opt.max_size, pool));
    for (std::size_t t = 0; t < greedy.records.size(); ++t)
        out << "greedy," << t + 1 << ',' << greedy.records[t].chosen << ','
            << detail::fmt(greedy.records[t].val_auc) << ','
            << detail::fmt(greedy.records[t].brier) << '\n';

    CesParams params;
    params.init_n = std::min(opt.init_n, pool);
    params.max_size = opt.max_size;
    params.seed = derive_seed(opt.seed, 3);
    const auto [ces, model] = ces_select(data.matrix, data.labels, params);
    (void)model;
    for (std::size_t t = 0; t < ces.records.size(); ++t)
        out << "ces," << t + 1 << ',' << ces.records[t].chosen << ','
            << detail::fmt(ces.records[t].val_auc) << ',' << detail::fmt(ces.records[t].brier)
            << '\n';
}

struct CompareOptions {
    std::string table, out_dir;
    double alpha = 0.05;
    bool all_pairs = false;
    bool iman_davenport = false;
    std::uint64_t seed = 42;
};

inline void cmd_compare(const CompareOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    detail::require_file(opt.table);
    auto in = ensemblekit::detail::open_input(opt.table);
    std::string line;
    if (!ensemblekit::detail::next_line(in, line)) throw data_error("empty comparison table");
    const auto header = ensemblekit::detail::split(line, ',');
    if (header.size() < 3) throw data_error("comparison table needs at least 2 datasets");
    std::vector<std::string> methods;
    std::vector<std::vector<double>> perf;
    while (ensemblekit::detail::next_line(in, line)) {
        if (ensemblekit::detail::trim(line).empty()) continue;
        const auto fields = ensemblekit::detail::split(line, ',');
        if (fields.size() != header.size())
            throw data_error("comparison row '" + fields[0] + "' has wrong field count");
        methods.push_back(fields[0]);
        std::vector<double> row;
        for (std::size_t d = 1; d < fields.size(); ++d)
            row.push_back(ensemblekit::detail::parse_double(fields[d],
                                                            "in comparison row " + fields[0]));
        perf.push_back(std::move(row));
    }

    const auto result = friedman(perf, methods, opt.iman_davenport);
    const auto posthoc = nemenyi(result.table, opt.alpha);
    const auto groups = group_letters(result.table, posthoc.critical_difference);

    const auto comment = detail::provenance({{"cmd", "compare"},
                                             {"alpha", detail::fmt(opt.alpha)},
                                             {"all_pairs", opt.all_pairs ? "1" : "0"},
                                             {"iman_davenport", opt.iman_davenport ? "1" : "0"}},
                                            opt.seed);
    const auto dir = std::filesystem::path(opt.out_dir);
    {
        auto out = detail::open_csv((dir / "friedman.csv").string(), comment);
        out << "statistic,p_value,methods,datasets";
        if (opt.iman_davenport) out << ",f_statistic,f_p_value";
        out << '\n';
        out << detail::fmt(result.statistic) << ',' << detail::fmt(result.p_value) << ','
            << result.table.n_methods << ',' << result.table.n_datasets;
        if (opt.iman_davenport)
            out << ',' << detail::fmt(result.f_statistic) << ','
                << detail::fmt(result.f_p_value);
        out << '\n';
    }
    {
        auto out = detail::open_csv((dir / "pairwise.csv").string(), comment);
        out << "method_a,method_b,p_value\n";
        for (int i = 0; i < result.table.n_methods; ++i)
            for (int j = i + 1; j < result.table.n_methods; ++j) {
                const double p = posthoc.pairwise_p[i][j];
                if (opt.all_pairs || p < opt.alpha)
                    out << methods[i] << ',' << methods[j] << ',' << detail::fmt(p) << '\n';
            }
    }
    {
        auto out = detail::open_csv((dir / "groups.csv").string(), comment);
        out << "group,method,rank_sum,mean_rank\n";
        for (const auto& row : groups)
            out << row.letters << ',' << row.method << ',' << detail::fmt(row.rank_sum) << ','
                << detail::fmt(row.mean_rank) << '\n';
    }
    std::cout << "friedman_statistic=" << detail::fmt(result.statistic)
              << " p=" << detail::fmt(result.p_value)
              << " cd=" << detail::fmt(posthoc.critical_difference) << "\n";
}

struct RunOptions {
    std::string dataset, config, out_dir;
    bool timings = false;
};

inline void cmd_run(const RunOptions& opt) {
    detail::require_out_dir(opt.out_dir);
    detail::require_file(opt.dataset);
    const auto cfg = detail::parse_config_file(opt.config);

    const auto dataset = read_dataset(opt.dataset);
    std::string name = detail::config_str(cfg, "name", "");
    if (name.empty()) name = std::filesystem::path(opt.dataset).stem().string();

    const int outer_k = static_cast<int>(detail::config_num(cfg, "outer_k", 10));
    const int nested_k = static_cast<int>(detail::config_num(cfg, "nested_k", 5));
    const int bags = static_cast<int>(detail::config_num(cfg, "bags", 10));
    const auto seed = static_cast<std::uint64_t>(detail::config_num(cfg, "seed", 42));

    std::vector<LearnerSpec> learners;
    for (const auto& learner_name :
         detail::split_list(detail::config_str(cfg, "learners", "logistic,tree,knn,nb"))) {
        LearnerSpec spec;
        spec.name = learner_name;
        spec.logistic_lambda = detail::config_num(cfg, "learner_params.logistic_lambda", 1e-3);
        spec.tree_max_depth =
            static_cast<int>(detail::config_num(cfg, "learner_params.tree_max_depth", 5));
        spec.tree_min_split =
            static_cast<int>(detail::config_num(cfg, "learner_params.tree_min_split", 4));
        spec.knn_k = static_cast<int>(detail::config_num(cfg, "learner_params.knn_k", 5));
        learners.push_back(spec);
    }

    EvaluateParams params;
    params.seed = derive_seed(seed, 7);
    params.ces.init_n = static_cast<int>(detail::config_num(cfg, "select.init_n", 2));
    params.ces.max_size = static_cast<int>(detail::config_num(cfg, "select.max_size", 100));
    params.ces.candidate_fraction = detail::config_num(cfg, "select.candidate_fraction", 1.0);
    params.greedy_max_size = static_cast<int>(detail::config_num(cfg, "select.greedy_max_size", 0));
    params.logistic.lambda = detail::config_num(cfg, "stack.lambda", 1e-3);
    params.logistic.tol = detail::config_num(cfg, "stack.tol", 1e-8);
    params.logistic.max_iter = static_cast<int>(detail::config_num(cfg, "stack.max_iter", 100));
    params.cluster_k = static_cast<int>(detail::config_num(cfg, "cluster.k", 0));
    const std::string sweep = detail::config_str(cfg, "cluster.sweep", "");
    if (!sweep.empty()) {
        const auto [lo, hi] = detail::parse_range(sweep);
        for (int c = lo; c <= hi; ++c) params.sweep_range.push_back(c);
    }
    const std::string distance = detail::config_str(cfg, "cluster.distance", "pearson");
    if (distance == "pearson") params.distance = ClusterDistance::pearson;
    else if (distance == "qstat") params.distance = ClusterDistance::qstat;
    else throw config_error("cluster.distance must be pearson or qstat");
    params.val_fraction = detail::config_num(cfg, "val_fraction", 1.0);

    std::vector<std::pair<std::string, std::string>> provenance_cfg = {{"cmd", "run"},
                                                                       {"dataset", name}};
    for (const auto& [k, v] : cfg) provenance_cfg.emplace_back(k, v);
    const auto comment = detail::provenance(provenance_cfg, seed);

    LabelVector labeled;
    for (int y : dataset.labels)
        if (y >= 0) labeled.push_back(y);
    const auto plan = make_fold_plan(labeled, outer_k, nested_k, bags, derive_seed(seed, 11));
    const auto pipeline = run_pipeline(dataset, learners, plan);
    for (const auto& w : pipeline.warnings) std::cerr << "warning: " << w << "\n";

    const auto dir = std::filesystem::path(opt.out_dir);
    {
        std::ofstream plan_out(dir / "plan.txt");
        plan_out << "# " << comment << "\n";
        plan.serialize(plan_out);
    }
    {
        PredictionMatrix registry;
        registry.classifier_ids = pipeline.classifier_ids;
        registry.group_of = pipeline.group_of;
        write_groups((dir / "groups.tsv").string(), registry, comment);
    }
    for (std::size_t f = 0; f < pipeline.folds.size(); ++f) {
        const auto& fold = pipeline.folds[f];
        const std::string tag = "fold" + std::to_string(f);
        write_predictions((dir / (tag + "_val.csv")).string(), fold.val, comment);
        write_labels((dir / (tag + "_val_labels.csv")).string(), fold.val.instance_ids,
                     fold.val_labels, comment);
        write_predictions((dir / (tag + "_test.csv")).string(), fold.test, comment);
        write_labels((dir / (tag + "_test_labels.csv")).string(), fold.test.instance_ids,
                     fold.test_labels, comment);
    }

    const auto method_list = detail::split_list(detail::config_str(
        cfg, "methods", "best_base,mean,greedy,ces,stack_all,stack_agg,intra,inter"));
    auto report_out = detail::open_csv((dir / "report.csv").string(), comment);
    report_out << "method,dataset,test_auc,brier,ensemble_size\n";
    std::ofstream timings_out;
    if (opt.timings) {
        timings_out.open(dir / "timings.csv");
        timings_out << "# " << comment << "\nmethod,wall_time_s\n";
    }
    for (const auto& method_text : method_list) {
        const Method method = parse_method(method_text);
        const auto report = evaluate(method, pipeline, params, name);
        report_out << report.method << ',' << report.dataset << ','
                   << detail::fmt(report.test_auc) << ',' << detail::fmt(report.brier) << ','
                   << report.ensemble_size << '\n';
        if (opt.timings)
            timings_out << report.method << ',' << detail::fmt(report.wall_time_s) << '\n';
        if (!report.weights.empty()) {
            auto w = detail::open_csv((dir / ("weights_" + report.method + ".csv")).string(),
                                      comment);
            w << "id,weight\n";
            for (const auto& [id, weight] : report.weights)
                w << id << ',' << detail::fmt(weight) << '\n';
        }
        if (!report.val_trajectory.empty()) {
            auto t = detail::open_csv(
                (dir / ("trajectory_" + report.method + ".csv")).string(), comment);
            t << "iteration,val_auc\n";
            for (std::size_t i = 0; i < report.val_trajectory.size(); ++i)
                t << i + 1 << ',' << detail::fmt(report.val_trajectory[i]) << '\n';
        }
        std::cout << report.method << " test_auc=" << detail::fmt(report.test_auc)
                  << " brier=" << detail::fmt(report.brier) << "\n";
    }
}

inline int run_cli(std::vector<std::string> args) {
    CLI::App app{"ensemblekit: heterogeneous ensemble construction and diagnostics"};
    app.require_subcommand(1);

    int workers = 0;
    if (const char* env = std::getenv("ENSEMBLEKIT_WORKERS")) workers = std::atoi(env);
    app.add_option("--workers", workers, "worker thread count (0 = hardware)");

    SynthOptions synth;
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic classifier pool");
    synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
    synth_cmd->add_option("--instances", synth.instances, "instance count");
    synth_cmd->add_option("--positive-rate", synth.positive_rate, "positive class rate");
    synth_cmd->add_option("--bags", synth.bags, "bags per classifier");
    synth_cmd->add_option("--seed", synth.seed, "RNG seed");
    synth_cmd->add_option("--classifier", synth.classifier_specs,
                          "spec a=..,b=..,alpha=..,beta=..,count=.. (repeatable)");

    SelectOptions select;
    auto* select_cmd = app.add_subcommand("select", "greedy or CES ensemble selection");
    select_cmd->add_option("--predictions", select.predictions)->required();
    select_cmd->add_option("--labels", select.labels)->required();
    select_cmd->add_option("--groups", select.groups);
    select_cmd->add_option("--out", select.out_dir)->required();
    select_cmd->add_option("--method", select.method, "greedy or ces");
    select_cmd->add_option("--init-n", select.init_n);
    select_cmd->add_option("--max-size", select.max_size);
    select_cmd->add_option("--candidate-fraction", select.candidate_fraction);
    select_cmd->add_flag("--no-replacement", select.no_replacement);
    select_cmd->add_option("--seed", select.seed);

    StackOptions stack;
    auto* stack_cmd = app.add_subcommand("stack", "logistic meta-learning");
    stack_cmd->add_option("--predictions", stack.predictions)->required();
    stack_cmd->add_option("--labels", stack.labels)->required();
    stack_cmd->add_option("--groups", stack.groups);
    stack_cmd->add_option("--out", stack.out_dir)->required();
    stack_cmd->add_option("--mode", stack.mode, "all or aggregated");
    stack_cmd->add_option("--lambda", stack.lambda);
    stack_cmd->add_option("--val-fraction", stack.val_fraction);
    stack_cmd->add_option("--seed", stack.seed);

    ClusterStackOptions cluster;
    auto* cluster_cmd = app.add_subcommand("cluster-stack", "cluster-based meta-learning");
    cluster_cmd->add_option("--predictions", cluster.predictions)->required();
    cluster_cmd->add_option("--labels", cluster.labels)->required();
    cluster_cmd->add_option("--groups", cluster.groups);
    cluster_cmd->add_option("--out", cluster.out_dir)->required();
    cluster_cmd->add_option("--mode", cluster.mode, "intra or inter");
    cluster_cmd->add_option("--k", cluster.k);
    cluster_cmd->add_option("--sweep", cluster.sweep, "k range like 1..8");
    cluster_cmd->add_option("--distance", cluster.distance, "pearson or qstat");
    cluster_cmd->add_option("--lambda", cluster.lambda);
    cluster_cmd->add_option("--seed", cluster.seed);

    DiversityOptions diversity;
    auto* diversity_cmd = app.add_subcommand("diversity", "pairwise diversity scatter data");
    diversity_cmd->add_option("--predictions", diversity.predictions)->required();
    diversity_cmd->add_option("--labels", diversity.labels)->required();
    diversity_cmd->add_option("--groups", diversity.groups);
    diversity_cmd->add_option("--out", diversity.out_dir)->required();
    diversity_cmd->add_flag("--no-aggregate-bags", diversity.no_aggregate_bags);
    diversity_cmd->add_option("--top", diversity.top, "top performers to flag");
    diversity_cmd->add_option("--seed", diversity.seed);

    CalibrationOptions calibration;
    auto* calibration_cmd =
        app.add_subcommand("calibration", "Brier/AUC data per classifier and iteration");
    calibration_cmd->add_option("--predictions", calibration.predictions)->required();
    calibration_cmd->add_option("--labels", calibration.labels)->required();
    calibration_cmd->add_option("--groups", calibration.groups);
    calibration_cmd->add_option("--out", calibration.out_dir)->required();
    calibration_cmd->add_option("--init-n", calibration.init_n);
    calibration_cmd->add_option("--max-size", calibration.max_size);
    calibration_cmd->add_option("--seed", calibration.seed);

    CompareOptions compare;
    auto* compare_cmd = app.add_subcommand("compare", "Friedman/Nemenyi method comparison");
    compare_cmd->add_option("--table", compare.table, "methods x datasets CSV")->required();
    compare_cmd->add_option("--out", compare.out_dir)->required();
    compare_cmd->add_option("--alpha", compare.alpha);
    compare_cmd->add_flag("--all-pairs", compare.all_pairs);
    compare_cmd->add_flag("--iman-davenport", compare.iman_davenport);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "full cross-validation pipeline");
    run_cmd->add_option("--dataset", run.dataset, "feature CSV")->required();
    run_cmd->add_option("--config", run.config, "key = value config file")->required();
    run_cmd->add_option("--out", run.out_dir)->required();
    run_cmd->add_flag("--timings", run.timings, "also write wall times");

    std::vector<const char*> argv;
    argv.push_back("ensemblekit");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2; // malformed invocation
    }

    set_worker_count(workers);
    try {
        if (*synth_cmd) cmd_synth(synth);
        if (*select_cmd) cmd_select(select);
        if (*stack_cmd) cmd_stack(stack);
        if (*cluster_cmd) cmd_cluster_stack(cluster);
        if (*diversity_cmd) cmd_diversity(diversity);
        if (*calibration_cmd) cmd_calibration(calibration);
        if (*compare_cmd) cmd_compare(compare);
        if (*run_cmd) cmd_run(run);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const method_error& e) {
        std::cerr << "method error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace ensemblekit::cli
