// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "coopcg/dense.hpp"
#include "coopcg/errors.hpp"
#include "coopcg/scalar.hpp"

// Matrix Market text I/O for the dense types.  Writers emit "array" format
// (general for blocks/vectors, symmetric lower-triangle for the system
// matrix); readers additionally accept "coordinate" files.  Exact-rational
// data uses the field name "rational" with entries serialized as
// numerator/denominator decimal strings ("-3/7").

namespace coopcg::mm {

namespace detail {

template <ScalarField S>
const char* field_name() {
    return scalar_traits<S>::is_exact ? "rational" : "real";
}

struct Header {
    std::string format;   // array | coordinate
    std::string field;    // real | integer | rational
    std::string symmetry; // general | symmetric
};

inline Header read_header(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("matrix market: empty input");
    std::istringstream hs(line);
    std::string banner, object;
    Header h;
    hs >> banner >> object >> h.format >> h.field >> h.symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix")
        throw ParseError("matrix market: bad banner: '" + line + "'");
    if (h.format != "array" && h.format != "coordinate")
        throw ParseError("matrix market: unsupported format '" + h.format + "'");
    if (h.field != "real" && h.field != "integer" && h.field != "rational")
        throw ParseError("matrix market: unsupported field '" + h.field + "'");
    if (h.symmetry != "general" && h.symmetry != "symmetric")
        throw ParseError("matrix market: unsupported symmetry '" + h.symmetry + "'");
    return h;
}

inline void skip_comments(std::istream& in) {
    while (in.peek() == '%') {
        std::string line;
        std::getline(in, line);
    }
}

template <ScalarField S>
S read_value(std::istream& in) {
    std::string tok;
    if (!(in >> tok))
        throw ParseError("matrix market: unexpected end of data");
    return scalar_traits<S>::parse(tok);
}

/// Shared reading core: any supported file into a dense row-major grid.
template <ScalarField S>
void read_grid(std::istream& in, int& rows, int& cols, std::vector<S>& grid) {
    const Header h = read_header(in);
    skip_comments(in);
    if (h.format == "array") {
        if (!(in >> rows >> cols))
            throw ParseError("matrix market: missing size line");
        grid.assign(static_cast<std::size_t>(rows) * cols, S{});
        if (h.symmetry == "general") {
            for (int j = 0; j < cols; ++j)
                for (int i = 0; i < rows; ++i)
                    grid[static_cast<std::size_t>(i) * cols + j] = read_value<S>(in);
        } else {
            if (rows != cols)
                throw ParseError("matrix market: symmetric array must be square");
            for (int j = 0; j < cols; ++j)
                for (int i = j; i < rows; ++i) {
                    const S v = read_value<S>(in);
                    grid[static_cast<std::size_t>(i) * cols + j] = v;
                    grid[static_cast<std::size_t>(j) * cols + i] = v;
                }
        }
    } else {
        long nnz = 0;
        if (!(in >> rows >> cols >> nnz))
            throw ParseError("matrix market: missing size line");
        grid.assign(static_cast<std::size_t>(rows) * cols, S{});
        for (long e = 0; e < nnz; ++e) {
            int i = 0, j = 0;
            if (!(in >> i >> j))
                throw ParseError("matrix market: truncated coordinate entry");
            if (i < 1 || i > rows || j < 1 || j > cols)
                throw ParseError("matrix market: coordinate out of range");
            const S v = read_value<S>(in);
            grid[static_cast<std::size_t>(i - 1) * cols + (j - 1)] = v;
            if (h.symmetry == "symmetric" && i != j)
                grid[static_cast<std::size_t>(j - 1) * cols + (i - 1)] = v;
        }
    }
}

} // namespace detail

template <ScalarField S>
void write(std::ostream& out, const SpdMatrix<S>& A) {
    const int n = A.dim();
    out << "%%MatrixMarket matrix array " << detail::field_name<S>() << " symmetric\n";
    out << n << " " << n << "\n";
    for (int j = 0; j < n; ++j)
        for (int i = j; i < n; ++i)
            out << scalar_traits<S>::to_string(A(i, j)) << "\n";
}

template <ScalarField S>
void write(std::ostream& out, const DenseBlock<S>& B) {
    out << "%%MatrixMarket matrix array " << detail::field_name<S>() << " general\n";
    out << B.rows() << " " << B.cols() << "\n";
    for (int j = 0; j < B.cols(); ++j)
        for (int i = 0; i < B.rows(); ++i)
            out << scalar_traits<S>::to_string(B(i, j)) << "\n";
}

template <ScalarField S>
void write(std::ostream& out, const Vec<S>& v) {
    out << "%%MatrixMarket matrix array " << detail::field_name<S>() << " general\n";
    out << v.size() << " " << 1 << "\n";
    for (const S& x : v)
        out << scalar_traits<S>::to_string(x) << "\n";
}

template <ScalarField S>
SpdMatrix<S> read_spd(std::istream& in, SpdCheck check = SpdCheck::probe) {
    int rows = 0, cols = 0;
    std::vector<S> grid;
    detail::read_grid<S>(in, rows, cols, grid);
    if (rows != cols)
        throw ParseError("matrix market: system matrix must be square");
    return SpdMatrix<S>(rows, std::move(grid), check);
}

template <ScalarField S>
DenseBlock<S> read_block(std::istream& in) {
    int rows = 0, cols = 0;
    std::vector<S> grid;
    detail::read_grid<S>(in, rows, cols, grid);
    DenseBlock<S> b(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            b(i, j) = grid[static_cast<std::size_t>(i) * cols + j];
    return b;
}

template <ScalarField S>
Vec<S> read_vector(std::istream& in) {
    int rows = 0, cols = 0;
    std::vector<S> grid;
    detail::read_grid<S>(in, rows, cols, grid);
    if (cols != 1 && rows != 1)
        throw ParseError("matrix market: expected a vector");
    return grid;
}

template <typename T>
void write_file(const std::string& path, const T& value) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open for writing: " + path);
    write(out, value);
}

template <ScalarField S>
SpdMatrix<S> read_spd_file(const std::string& path, SpdCheck check = SpdCheck::probe) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open: " + path);
    return read_spd<S>(in, check);
}

template <ScalarField S>
DenseBlock<S> read_block_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open: " + path);
    return read_block<S>(in);
}

template <ScalarField S>
Vec<S> read_vector_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open: " + path);
    return read_vector<S>(in);
}

} // namespace coopcg::mm
