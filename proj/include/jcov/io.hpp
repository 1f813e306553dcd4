// CSV readers and writers for matrices.
#pragma once

#include "jcov/matspace.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jcov::io {

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(const std::string& token) {
    const std::string t = trim(token);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("csv: cannot parse number '" + t + "'");
    }
    if (used != t.size()) throw std::invalid_argument("csv: trailing characters in '" + t + "'");
    return v;
}

/// Numeric CSV, one matrix row per line. Blank lines and '#' comments are skipped.
inline Matrix read_matrix_csv(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::vector<double> row;
        for (const auto& tok : split(t)) row.push_back(parse_double(tok));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::invalid_argument("csv: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::invalid_argument("csv: no data rows");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

inline Matrix read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_matrix_csv(in);
}

/// Symmetrizes by averaging; rejects asymmetry above 1e-9 relative.
inline SymmetricMatrix read_symmetric_csv(const std::string& path) {
    return SymmetricMatrix::from_dense(read_matrix_csv(path), 1e-9);
}

/// g stacked p x p symmetric matrices (g*p rows, p columns).
inline std::vector<SymmetricMatrix> read_stacked_symmetric(std::istream& in) {
    const Matrix all = read_matrix_csv(in);
    const Index p = all.cols();
    if (all.rows() % p != 0)
        throw std::invalid_argument("csv: row count " + std::to_string(all.rows()) + " is not a multiple of p = " +
                                    std::to_string(p));
    std::vector<SymmetricMatrix> out;
    for (Index g = 0; g < all.rows() / p; ++g) out.push_back(SymmetricMatrix::from_dense(all.middleRows(g * p, p), 1e-9));
    return out;
}

inline std::vector<SymmetricMatrix> read_stacked_symmetric(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return read_stacked_symmetric(in);
}

/// Shortest representation that round-trips a double.
inline std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

inline void write_matrix_csv(std::ostream& out, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

}  // namespace jcov::io
