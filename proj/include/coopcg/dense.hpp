// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <utility>
#include <vector>

#include "coopcg/errors.hpp"
#include "coopcg/rng.hpp"
#include "coopcg/scalar.hpp"

namespace coopcg {

/// Dense n x p block whose columns are the vectors of interest (estimates,
/// residues, directions).  Column-major so each agent's column is a
/// contiguous span.
template <ScalarField S>
class DenseBlock {
public:
    DenseBlock() = default;
    DenseBlock(int rows, int cols)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, S{}) {}

    static DenseBlock from_column(const std::vector<S>& v) {
        DenseBlock b(static_cast<int>(v.size()), 1);
        for (int i = 0; i < b.rows_; ++i)
            b(i, 0) = v[static_cast<std::size_t>(i)];
        return b;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    S& operator()(int i, int j) { return data_[static_cast<std::size_t>(j) * rows_ + i]; }
    const S& operator()(int i, int j) const {
        return data_[static_cast<std::size_t>(j) * rows_ + i];
    }

    std::span<S> col(int j) { return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)}; }
    std::span<const S> col(int j) const {
        return {data_.data() + static_cast<std::size_t>(j) * rows_, static_cast<std::size_t>(rows_)};
    }

    std::vector<S> column_copy(int j) const {
        auto c = col(j);
        return std::vector<S>(c.begin(), c.end());
    }

    /// New block keeping the listed columns, in the listed order.
    DenseBlock select_columns(const std::vector<int>& idx) const {
        DenseBlock out(rows_, static_cast<int>(idx.size()));
        for (int j = 0; j < out.cols_; ++j)
            for (int i = 0; i < rows_; ++i)
                out(i, j) = (*this)(i, idx[static_cast<std::size_t>(j)]);
        return out;
    }

    bool operator==(const DenseBlock&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<S> data_;
};

/// Small p x p symmetric positive definite matrix (the shared Gram matrix
/// D^T A D).  Row-major; p is tiny compared to n.
template <ScalarField S>
class SmallSpd {
public:
    SmallSpd() = default;
    explicit SmallSpd(int p) : p_(p), data_(static_cast<std::size_t>(p) * p, S{}) {}

    int dim() const { return p_; }

    S& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * p_ + j]; }
    const S& operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * p_ + j]; }

    const std::vector<S>& data() const { return data_; }
    std::vector<S>& data() { return data_; }

    bool operator==(const SmallSpd&) const = default;

private:
    int p_ = 0;
    std::vector<S> data_;
};

enum class SpdCheck {
    probe, ///< symmetrize (float) / verify symmetry (rational), then probe x^T A x > 0
    skip,  ///< trust the caller (internal use on already-validated data)
};

/// Dense symmetric positive definite system matrix, row-major full storage.
/// Immutable after construction; safe for concurrent shared reads.
///
/// Float mode symmetrizes (M + M^T)/2 at construction; rational mode
/// requires exact symmetry.  Positive definiteness is spot-checked with a
/// fixed number of deterministic random probe vectors.
template <ScalarField S>
class SpdMatrix {
public:
    SpdMatrix(int n, std::vector<S> entries, SpdCheck check = SpdCheck::probe)
        : n_(n), a_(std::move(entries)) {
        if (n_ <= 0 || a_.size() != static_cast<std::size_t>(n_) * n_)
            throw DimensionError("SpdMatrix: entry grid does not match dimension");
        if (check == SpdCheck::skip)
            return;
        if constexpr (scalar_traits<S>::is_exact) {
            for (int i = 0; i < n_; ++i)
                for (int j = i + 1; j < n_; ++j)
                    if ((*this)(i, j) != (*this)(j, i))
                        throw SpdViolationError("SpdMatrix: rational entries not symmetric");
        } else {
            for (int i = 0; i < n_; ++i)
                for (int j = i + 1; j < n_; ++j) {
                    const S avg = ((*this)(i, j) + (*this)(j, i)) / 2.0;
                    at(i, j) = avg;
                    at(j, i) = avg;
                }
        }
        probe_positive_definite();
    }

    int dim() const { return n_; }

    std::span<const S> row(int i) const {
        return {a_.data() + static_cast<std::size_t>(i) * n_, static_cast<std::size_t>(n_)};
    }

    const S& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }

    const std::vector<S>& entries() const { return a_; }

    bool operator==(const SpdMatrix&) const = default;

private:
    S& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }

    void probe_positive_definite() const {
        constexpr int kProbes = 8;
        auto stream = rng::make_stream(0x5bd1e995u, rng::StreamId::spd_probe,
                                       static_cast<std::uint64_t>(n_));
        std::vector<S> x(static_cast<std::size_t>(n_));
        for (int t = 0; t < kProbes; ++t) {
            bool nonzero = false;
            for (int i = 0; i < n_; ++i) {
                const long v = stream.next_int(-3, 3);
                x[static_cast<std::size_t>(i)] = scalar_traits<S>::from_int(v);
                nonzero = nonzero || v != 0;
            }
            if (!nonzero)
                x[0] = scalar_traits<S>::from_int(1);
            S q{};
            for (int i = 0; i < n_; ++i) {
                S rowdot{};
                auto r = row(i);
                for (int j = 0; j < n_; ++j)
                    rowdot += r[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
                q += x[static_cast<std::size_t>(i)] * rowdot;
            }
            if (!(q > S{}))
                throw SpdViolationError("SpdMatrix: probe vector has nonpositive quadratic form");
        }
    }

    int n_ = 0;
    std::vector<S> a_;
};

template <ScalarField S>
using Vec = std::vector<S>;

} // namespace coopcg
