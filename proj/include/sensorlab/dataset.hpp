#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "sensorlab/error.hpp"

namespace sensorlab {

using Index = Eigen::Index;

// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

/// Named inputs (N x d) plus one named target column (N).
///
/// Inputs keep their engineering units until passed through a Scaler; targets
/// always stay in raw units so every metric is reported in physical terms.
struct Dataset {
    std::vector<std::string> input_names;
    Eigen::MatrixXd inputs;
    std::string target_name;
    Eigen::VectorXd targets;

    [[nodiscard]] Index size() const noexcept { return targets.size(); }
    [[nodiscard]] Index dims() const noexcept { return inputs.cols(); }

    // Throws DataError when any invariant is broken.
    void validate() const {
        if (inputs.rows() != targets.size()) {
            throw DataError("inputs have " + std::to_string(inputs.rows()) + " rows but targets have " +
                            std::to_string(targets.size()));
        }
        if (static_cast<Index>(input_names.size()) != inputs.cols()) {
            throw DataError("input name count does not match input column count");
        }
        if (size() < 5) {
            throw DataError("dataset needs at least 5 samples, got " + std::to_string(size()));
        }
        if (dims() < 1) {
            throw DataError("dataset needs at least one input column");
        }
        for (Index c = 0; c < inputs.cols(); ++c) {
            for (Index r = 0; r < inputs.rows(); ++r) {
                if (!std::isfinite(inputs(r, c))) {
                    throw DataError("non-finite value in column '" + input_names[static_cast<std::size_t>(c)] +
                                    "' at data row " + std::to_string(r + 1));
                }
            }
        }
        for (Index r = 0; r < targets.size(); ++r) {
            if (!std::isfinite(targets(r))) {
                throw DataError("non-finite target at data row " + std::to_string(r + 1));
            }
        }
    }

    // Rows picked by index, same columns.
    [[nodiscard]] Dataset subset(const std::vector<Index>& rows) const {
        Dataset out;
        out.input_names = input_names;
        out.target_name = target_name;
        out.inputs.resize(static_cast<Index>(rows.size()), inputs.cols());
        out.targets.resize(static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            out.inputs.row(static_cast<Index>(i)) = inputs.row(rows[i]);
            out.targets(static_cast<Index>(i)) = targets(rows[i]);
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

} // namespace detail

/// Header row plus numeric body, as parsed from a CSV file.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;

    [[nodiscard]] std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
};

// Data rows are numbered from 1 (the header is not counted); file lines are
// also reported so editors can jump to them.
inline CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::size_t data_row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!have_header) {
            if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
                line.erase(0, 3);
            }
            if (detail::trim(line).empty()) {
                throw DataError(source + ": missing header row");
            }
            for (auto f : detail::split_fields(line)) {
                if (f.empty()) {
                    throw DataError(source + ": empty column name in header");
                }
                table.header.emplace_back(f);
            }
            for (std::size_t i = 0; i < table.header.size(); ++i) {
                for (std::size_t j = i + 1; j < table.header.size(); ++j) {
                    if (table.header[i] == table.header[j]) {
                        throw DataError(source + ": duplicate column '" + table.header[i] + "'");
                    }
                }
            }
            table.columns.resize(table.header.size());
            have_header = true;
            continue;
        }
        if (detail::trim(line).empty()) {
            continue;
        }
        ++data_row;
        const auto fields = detail::split_fields(line);
        const std::string where = source + ": data row " + std::to_string(data_row) + " (line " + std::to_string(line_no) + ")";
        if (fields.size() != table.header.size()) {
            throw DataError(where + ": expected " + std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(fields.size()));
        }
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto f = fields[c];
            if (f.empty()) {
                throw DataError(where + ", column '" + table.header[c] + "': empty cell");
            }
            double value = 0.0;
            const char* first = f.data();
            if (*first == '+') {
                ++first;
            }
            const auto res = std::from_chars(first, f.data() + f.size(), value);
            if (res.ec != std::errc{} || res.ptr != f.data() + f.size()) {
                throw DataError(where + ", column '" + table.header[c] + "': non-numeric cell '" + std::string(f) + "'");
            }
            if (!std::isfinite(value)) {
                throw DataError(where + ", column '" + table.header[c] + "': non-finite value");
            }
            table.columns[c].push_back(value);
        }
    }
    if (!have_header) {
        throw DataError(source + ": missing header row");
    }
    return table;
}

inline Dataset dataset_from_table(const CsvTable& table, const std::string& target_column, const std::string& source) {
    const auto it = std::find(table.header.begin(), table.header.end(), target_column);
    if (it == table.header.end()) {
        throw DataError(source + ": target column '" + target_column + "' not found in header");
    }
    const auto target_idx = static_cast<std::size_t>(it - table.header.begin());
    const auto n = static_cast<Index>(table.rows());

    Dataset data;
    data.target_name = target_column;
    data.targets = Eigen::Map<const Eigen::VectorXd>(table.columns[target_idx].data(), n);
    data.inputs.resize(n, static_cast<Index>(table.header.size()) - 1);
    Index col = 0;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (c == target_idx) {
            continue;
        }
        data.input_names.push_back(table.header[c]);
        data.inputs.col(col++) = Eigen::Map<const Eigen::VectorXd>(table.columns[c].data(), n);
    }
    data.validate();
    return data;
}

/// Reads a sensor log. All non-target columns become inputs, in file order.
inline Dataset load_csv(const std::string& path, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) {
        throw DataError(path + ": cannot open file");
    }
    return dataset_from_table(parse_csv(in, path), target_column, path);
}

inline void write_csv(std::ostream& out, const Dataset& data) {
    for (const auto& name : data.input_names) {
        out << name << ',';
    }
    out << data.target_name << '\n';
    for (Index r = 0; r < data.size(); ++r) {
        for (Index c = 0; c < data.dims(); ++c) {
            out << format_double(data.inputs(r, c)) << ',';
        }
        out << format_double(data.targets(r)) << '\n';
    }
}

inline void save_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(path + ": cannot open for writing");
    }
    write_csv(out, data);
    if (!out) {
        throw DataError(path + ": write failed");
    }
}

// ---------------------------------------------------------------------------
// Interleaved division

struct SplitIndices {
    std::vector<Index> train;
    std::vector<Index> val;
    std::vector<Index> test;
};

enum class Subset { train, val, test };

inline Subset subset_of(Index i) noexcept {
    switch (i % 5) {
    case 3: return Subset::val;
    case 4: return Subset::test;
    default: return Subset::train;
    }
}

inline const char* to_string(Subset s) noexcept {
    switch (s) {
    case Subset::train: return "train";
    case Subset::val: return "val";
    case Subset::test: return "test";
    }
    return "?";
}

/// 60/20/20 round-robin division: residues 0-2 of i mod 5 train, 3 validates,
/// 4 tests. Every stretch of the record contributes to all three subsets.
inline SplitIndices interleaved_split(Index n) {
    if (n < 5) {
        throw DataError("interleaved division needs at least 5 samples, got " + std::to_string(n));
    }
    SplitIndices split;
    split.train.reserve(static_cast<std::size_t>(3 * n / 5 + 3));
    split.val.reserve(static_cast<std::size_t>(n / 5 + 1));
    split.test.reserve(static_cast<std::size_t>(n / 5 + 1));
    for (Index i = 0; i < n; ++i) {
        switch (subset_of(i)) {
        case Subset::train: split.train.push_back(i); break;
        case Subset::val: split.val.push_back(i); break;
        case Subset::test: split.test.push_back(i); break;
        }
    }
    return split;
}

// ---------------------------------------------------------------------------
// Input scaling

/// Per-column affine map onto [-1, 1].
struct Scaler {
    std::vector<std::string> names;
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    [[nodiscard]] Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
        Eigen::MatrixXd out(x.rows(), x.cols());
        for (Index c = 0; c < x.cols(); ++c) {
            const double span = max(c) - min(c);
            out.col(c) = ((x.col(c).array() - min(c)) * (2.0 / span) - 1.0).matrix();
        }
        return out;
    }

    [[nodiscard]] Eigen::MatrixXd inverse(const Eigen::MatrixXd& s) const {
        Eigen::MatrixXd out(s.rows(), s.cols());
        for (Index c = 0; c < s.cols(); ++c) {
            const double span = max(c) - min(c);
            out.col(c) = ((s.col(c).array() + 1.0) * (0.5 * span) + min(c)).matrix();
        }
        return out;
    }

    [[nodiscard]] Dataset apply(const Dataset& data) const {
        if (data.dims() != min.size()) {
            throw DataError("scaler has " + std::to_string(min.size()) + " columns, dataset has " +
                            std::to_string(data.dims()));
        }
        Dataset out = data;
        out.inputs = apply(data.inputs);
        return out;
    }
};

inline Scaler fit_scaler(const Dataset& data) {
    Scaler s;
    s.names = data.input_names;
    s.min = data.inputs.colwise().minCoeff().transpose();
    s.max = data.inputs.colwise().maxCoeff().transpose();
    for (Index c = 0; c < s.min.size(); ++c) {
        if (!(s.max(c) > s.min(c))) {
            throw DataError("input column '" + data.input_names[static_cast<std::size_t>(c)] + "' is constant");
        }
    }
    return s;
}

inline std::pair<Scaler, Dataset> fit_apply_scaler(const Dataset& data) {
    Scaler s = fit_scaler(data);
    Dataset scaled = s.apply(data);
    return {std::move(s), std::move(scaled)};
}

// ---------------------------------------------------------------------------
// Input ranking

struct InputRank {
    std::string name;
    double r = 0.0;
    bool zero_variance = false;
};

namespace detail {

// Sets `degenerate` and returns 0 when either side has zero spread.
inline double pearson(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                      bool& degenerate) {
    const double ma = a.mean();
    const double mb = b.mean();
    const Eigen::ArrayXd da = a.array() - ma;
    const Eigen::ArrayXd db = b.array() - mb;
    const double saa = (da * da).sum();
    const double sbb = (db * db).sum();
    degenerate = !(saa > 0.0) || !(sbb > 0.0);
    if (degenerate) {
        return 0.0;
    }
    return std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

} // namespace detail

/// Pearson correlation of each input against the target, strongest first.
inline std::vector<InputRank> rank_inputs(const Dataset& data) {
    if (data.size() < 3) {
        throw DataError("input ranking needs at least 3 samples");
    }
    std::vector<InputRank> out;
    for (Index c = 0; c < data.dims(); ++c) {
        InputRank rank;
        rank.name = data.input_names[static_cast<std::size_t>(c)];
        rank.r = detail::pearson(data.inputs.col(c), data.targets, rank.zero_variance);
        out.push_back(std::move(rank));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const InputRank& a, const InputRank& b) { return std::abs(a.r) > std::abs(b.r); });
    return out;
}

} // namespace sensorlab
