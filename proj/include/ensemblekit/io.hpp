#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ensemblekit/core.hpp"

namespace ensemblekit {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == sep) {
            out.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || p != e)
        throw data_error("malformed number '" + s + "' " + where);
    return v;
}

// shortest round-trip decimal
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open '" + path + "'");
    return in;
}

// reads the next non-comment line; comment lines start with '#'
inline bool next_line(std::istream& in, std::string& line) {
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') continue;
        return true;
    }
    return false;
}

} // namespace detail

// Prediction CSV: header `instance_id,<classifier_1>,...`; one row per
// instance. An optional leading comment line carries provenance.
inline void write_predictions(const std::string& path, const PredictionMatrix& matrix,
                              const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "instance_id";
    for (const auto& id : matrix.classifier_ids) out << ',' << id;
    out << '\n';
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
        out << matrix.instance_ids[i];
        for (std::size_t j = 0; j < matrix.cols(); ++j)
            out << ',' << detail::format_double(matrix.columns[j][i]);
        out << '\n';
    }
}

// Bag groups sidecar: `classifier_id<TAB>group` lines.
inline void write_groups(const std::string& path, const PredictionMatrix& matrix,
                         const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << "\n";
    for (std::size_t j = 0; j < matrix.cols(); ++j)
        out << matrix.classifier_ids[j] << '\t' << matrix.group_of[j] << '\n';
}

inline void write_labels(const std::string& path, const std::vector<std::string>& ids,
                         const LabelVector& labels, const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "instance_id,label\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
        out << ids[i] << ',' << labels[i] << '\n';
}

// Reads a prediction CSV; group sidecar is optional (columns default to
// singleton groups named after themselves). Out-of-range values are an error,
// never clamped.
inline PredictionMatrix read_predictions(const std::string& path,
                                         const std::string& groups_path = "") {
    auto in = detail::open_input(path);
    std::string line;
    if (!detail::next_line(in, line)) throw data_error("empty prediction file '" + path + "'");
    auto header = detail::split(line, ',');
    if (header.size() < 2 || header[0] != "instance_id")
        throw data_error("bad prediction header in '" + path + "'");
    PredictionMatrix matrix;
    matrix.classifier_ids.assign(header.begin() + 1, header.end());
    matrix.columns.assign(matrix.classifier_ids.size(), {});
    std::size_t row = 0;
    while (detail::next_line(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split(line, ',');
        if (fields.size() != header.size())
            throw data_error("row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(header.size()));
        matrix.instance_ids.push_back(fields[0]);
        for (std::size_t j = 0; j + 1 < fields.size(); ++j) {
            const double v = detail::parse_double(
                fields[j + 1], "at (" + std::to_string(row) + ", " + std::to_string(j) + ")");
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw data_error("value out of range at (" + std::to_string(row) + ", " +
                                 std::to_string(j) + ")");
            matrix.columns[j].push_back(v);
        }
        ++row;
    }
    matrix.group_of = matrix.classifier_ids; // singleton default
    if (!groups_path.empty()) {
        auto gin = detail::open_input(groups_path);
        while (detail::next_line(gin, line)) {
            if (detail::trim(line).empty()) continue;
            auto fields = detail::split(line, '\t');
            if (fields.size() != 2)
                throw data_error("bad group line '" + line + "' in '" + groups_path + "'");
            const int j = matrix.column_index(fields[0]);
            if (j < 0)
                throw data_error("group map names unknown classifier '" + fields[0] + "'");
            matrix.group_of[j] = fields[1];
        }
    }
    return matrix;
}

inline std::pair<std::vector<std::string>, LabelVector> read_labels(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!detail::next_line(in, line)) throw data_error("empty label file '" + path + "'");
    auto header = detail::split(line, ',');
    if (header.size() != 2 || header[0] != "instance_id" || header[1] != "label")
        throw data_error("bad label header in '" + path + "'");
    std::vector<std::string> ids;
    LabelVector labels;
    while (detail::next_line(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split(line, ',');
        if (fields.size() != 2) throw data_error("bad label row '" + line + "'");
        ids.push_back(fields[0]);
        if (fields[1] == "0")
            labels.push_back(0);
        else if (fields[1] == "1")
            labels.push_back(1);
        else
            throw data_error("non-binary label at index " + std::to_string(labels.size()));
    }
    return {ids, labels};
}

// Raw feature dataset: header `instance_id,f1..fm,label`, label in {0,1,?}.
// Rows labeled '?' carry label -1 and are prediction-only.
struct Dataset {
    std::string name;
    std::vector<std::string> instance_ids;
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels; // -1 for '?'

    std::size_t size() const { return rows.size(); }
};

inline Dataset read_dataset(const std::string& path) {
    auto in = detail::open_input(path);
    std::string line;
    if (!detail::next_line(in, line)) throw data_error("empty dataset file '" + path + "'");
    auto header = detail::split(line, ',');
    if (header.size() < 3 || header.front() != "instance_id" || header.back() != "label")
        throw data_error("bad dataset header in '" + path + "'");
    Dataset ds;
    ds.feature_names.assign(header.begin() + 1, header.end() - 1);
    std::size_t row = 0;
    while (detail::next_line(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split(line, ',');
        if (fields.size() != header.size())
            throw data_error("dataset row " + std::to_string(row) + " has wrong field count");
        ds.instance_ids.push_back(fields[0]);
        std::vector<double> feats;
        feats.reserve(ds.feature_names.size());
        for (std::size_t j = 1; j + 1 < fields.size(); ++j) {
            const double v = detail::parse_double(fields[j], "in dataset row " + std::to_string(row));
            if (!std::isfinite(v))
                throw data_error("missing or non-finite feature at (" + std::to_string(row) +
                                 ", " + std::to_string(j - 1) + ")");
            feats.push_back(v);
        }
        ds.rows.push_back(std::move(feats));
        const std::string& lab = fields.back();
        if (lab == "0")
            ds.labels.push_back(0);
        else if (lab == "1")
            ds.labels.push_back(1);
        else if (lab == "?")
            ds.labels.push_back(-1);
        else
            throw data_error("non-binary label at index " + std::to_string(row));
        ++row;
    }
    return ds;
}

inline void write_dataset(const std::string& path, const Dataset& ds,
                          const std::string& comment = "") {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << "\n";
    out << "instance_id";
    for (const auto& f : ds.feature_names) out << ',' << f;
    out << ",label\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out << ds.instance_ids[i];
        for (double v : ds.rows[i]) out << ',' << detail::format_double(v);
        if (ds.labels[i] < 0)
            out << ",?\n";
        else
            out << ',' << ds.labels[i] << '\n';
    }
}

} // namespace ensemblekit
