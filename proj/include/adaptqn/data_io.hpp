#pragma once

/// \file data_io.hpp
///
/// LIBSVM text I/O and synthetic binary-classification data.
///
/// Record format, one per line:
///
///     <label> <idx>:<val> <idx>:<val> ...   # optional comment
///
/// Indices are 1-based in the file and strictly increasing within a line.
/// They are stored 0-based. Labels ±1 are kept and 0/1 labels are mapped to
/// −1/+1; anything else is rejected.

#include "adaptqn/errors.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace adaptqn {

using SparseRows = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Row-sparse feature matrix with ±1 labels.
struct SparseDataset {
    SparseRows features;     ///< N × n, compressed rows
    Eigen::VectorXd labels;  ///< N entries, each exactly ±1

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index cols() const { return features.cols(); }
};

/// Parser diagnostics that do not make the input invalid.
struct ParseNotes {
    std::size_t zero_one_labels_mapped = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_double(std::string_view tok, std::size_t line, const char* what) {
    // std::from_chars rejects a leading '+', which LIBSVM labels commonly carry.
    if (!tok.empty() && tok.front() == '+') {
        tok.remove_prefix(1);
    }
    double value = 0.0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (tok.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw ParseError(line, std::string("non-numeric ") + what + " '" + std::string(tok) + "'");
    }
    return value;
}

inline long long parse_index(std::string_view tok, std::size_t line) {
    long long value = 0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (tok.empty() || ec != std::errc{} || ptr != end) {
        throw ParseError(line, "non-numeric feature index '" + std::string(tok) + "'");
    }
    if (value < 1) {
        throw ParseError(line, "feature index must be >= 1, got " + std::to_string(value));
    }
    return value;
}

}  // namespace detail

/// Parses a LIBSVM stream. `dimension`, when given, fixes n; an index above it
/// is an error.
inline SparseDataset parse_libsvm(std::istream& in, std::optional<Eigen::Index> dimension = std::nullopt,
                                  ParseNotes* notes = nullptr) {
    std::vector<Eigen::Triplet<double>> triplets;
    std::vector<double> labels;
    long long max_index = 0;
    std::size_t line_no = 0;
    std::string line;

    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view(line);
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = detail::trim(view);
        if (view.empty()) {
            continue;
        }

        const auto row = static_cast<Eigen::Index>(labels.size());
        std::size_t pos = 0;
        auto next_token = [&]() -> std::string_view {
            while (pos < view.size() && (view[pos] == ' ' || view[pos] == '\t')) {
                ++pos;
            }
            const auto start = pos;
            while (pos < view.size() && view[pos] != ' ' && view[pos] != '\t') {
                ++pos;
            }
            return view.substr(start, pos - start);
        };

        const double raw_label = detail::parse_double(next_token(), line_no, "label");
        double label = 0.0;
        if (raw_label == 1.0 || raw_label == -1.0) {
            label = raw_label;
        } else if (raw_label == 0.0) {
            label = -1.0;
            if (notes != nullptr) {
                ++notes->zero_one_labels_mapped;
            }
        } else {
            throw ParseError(line_no, "label must be one of -1, 0, +1");
        }
        labels.push_back(label);

        long long prev = 0;
        for (auto tok = next_token(); !tok.empty(); tok = next_token()) {
            const auto colon = tok.find(':');
            if (colon == std::string_view::npos) {
                throw ParseError(line_no, "expected idx:val, got '" + std::string(tok) + "'");
            }
            const long long idx = detail::parse_index(tok.substr(0, colon), line_no);
            const double val = detail::parse_double(tok.substr(colon + 1), line_no, "feature value");
            if (idx <= prev) {
                throw ParseError(line_no, "feature indices must be strictly increasing");
            }
            if (dimension && idx > *dimension) {
                throw ParseError(line_no, "feature index " + std::to_string(idx) + " exceeds dimension " +
                                              std::to_string(*dimension));
            }
            prev = idx;
            max_index = std::max(max_index, idx);
            triplets.emplace_back(row, static_cast<Eigen::Index>(idx - 1), val);
        }
    }

    SparseDataset ds;
    const auto n = dimension ? *dimension : static_cast<Eigen::Index>(max_index);
    ds.features.resize(static_cast<Eigen::Index>(labels.size()), n);
    ds.features.setFromTriplets(triplets.begin(), triplets.end());
    ds.features.makeCompressed();
    ds.labels = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(labels.size()));
    return ds;
}

inline SparseDataset parse_libsvm(const std::string& text, std::optional<Eigen::Index> dimension = std::nullopt,
                                  ParseNotes* notes = nullptr) {
    std::istringstream in(text);
    return parse_libsvm(in, dimension, notes);
}

/// Writes `ds` in LIBSVM format with round-trip (%.17g) precision. Explicit
/// zeros stored in the matrix are written too.
inline void write_libsvm(std::ostream& out, const SparseDataset& ds) {
    char buf[64];
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        out << (ds.labels[i] > 0 ? "+1" : "-1");
        for (SparseRows::InnerIterator it(ds.features, i); it; ++it) {
            std::snprintf(buf, sizeof(buf), "%.17g", it.value());
            out << ' ' << (it.col() + 1) << ':' << buf;
        }
        out << '\n';
    }
}

/// B = max_i ‖x_i‖₂.
inline double max_row_norm(const SparseDataset& ds) {
    if (ds.rows() == 0) {
        throw DomainError("max_row_norm: empty dataset");
    }
    double best = 0.0;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
        best = std::max(best, ds.features.row(i).norm());
    }
    return best;
}

/// Dense Gaussian features with labels y = sign(separation·uᵀx + ε), u a random
/// unit vector and ε ~ N(0, 1). separation = 0 gives coin-flip labels.
inline SparseDataset synth_logistic(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double separation) {
    if (rows < 1 || cols < 1) {
        throw DomainError("synth_logistic requires N, n >= 1");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::VectorXd direction(cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        direction[j] = normal(rng);
    }
    direction.normalize();

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(rows * cols));
    SparseDataset ds;
    ds.labels.resize(rows);
    Eigen::VectorXd x(cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            x[j] = normal(rng);
            if (x[j] != 0.0) {
                triplets.emplace_back(i, j, x[j]);
            }
        }
        const double score = separation * direction.dot(x) + normal(rng);
        ds.labels[i] = score >= 0.0 ? 1.0 : -1.0;
    }
    ds.features.resize(rows, cols);
    ds.features.setFromTriplets(triplets.begin(), triplets.end());
    ds.features.makeCompressed();
    return ds;
}

/// Population covariance (1/N)Σ(x_i − μ)(x_i − μ)ᵀ of the feature rows.
inline Eigen::MatrixXd empirical_covariance(const SparseDataset& ds) {
    if (ds.rows() == 0) {
        throw DomainError("empirical_covariance: empty dataset");
    }
    const Eigen::MatrixXd dense = Eigen::MatrixXd(ds.features);
    const Eigen::RowVectorXd mean = dense.colwise().mean();
    const Eigen::MatrixXd centered = dense.rowwise() - mean;
    return (centered.transpose() * centered) / static_cast<double>(ds.rows());
}

}  // namespace adaptqn
