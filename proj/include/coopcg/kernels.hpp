// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "coopcg/dense.hpp"
#include "coopcg/scalar.hpp"

// Deterministic scalar kernels shared by the serial solvers and the
// barrier-parallel runtime.  Each output scalar is produced by exactly one
// fixed sequence of operations (ascending-index accumulation), so a value
// computed here is bitwise reproducible no matter which thread runs it.

namespace coopcg::kernels {

template <ScalarField S>
S dot(std::span<const S> a, std::span<const S> b) {
    S acc{};
    for (std::size_t k = 0; k < a.size(); ++k)
        acc += a[k] * b[k];
    return acc;
}

/// out = A * d for one column d; n^2 multiplications.
template <ScalarField S>
void matvec_col(const SpdMatrix<S>& A, std::span<const S> d, std::span<S> out) {
    const int n = A.dim();
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = dot<S>(A.row(i), d);
}

/// dest[i] = base[i] + sum_j coeff[j] * B(i, j); |coeff| = B.cols()
/// multiplications per row, accumulated in ascending j.
template <ScalarField S>
void combine_columns(std::span<S> dest, std::span<const S> base, const DenseBlock<S>& B,
                     std::span<const S> coeff) {
    const int n = B.rows();
    const int p = B.cols();
    for (int i = 0; i < n; ++i) {
        S acc = base[static_cast<std::size_t>(i)];
        for (int j = 0; j < p; ++j)
            acc += coeff[static_cast<std::size_t>(j)] * B(i, j);
        dest[static_cast<std::size_t>(i)] = acc;
    }
}

template <ScalarField S>
S norm_sq(std::span<const S> a) {
    return dot<S>(a, a);
}

template <ScalarField S>
double norm2(std::span<const S> a) {
    return std::sqrt(scalar_traits<S>::to_double(norm_sq<S>(a)));
}

/// In-place LU factorization with partial pivoting of a p x p row-major
/// grid.  Pivot selection: largest absolute value, lowest row index on
/// ties.  Returns false when the selected pivot is not above `pivot_floor`
/// (exact zero floor in rational mode).
template <ScalarField S>
bool lu_factor(std::vector<S>& m, int p, std::vector<int>& perm, const S& pivot_floor) {
    perm.resize(static_cast<std::size_t>(p));
    std::iota(perm.begin(), perm.end(), 0);
    auto at = [&](int i, int j) -> S& { return m[static_cast<std::size_t>(i) * p + j]; };
    for (int k = 0; k < p; ++k) {
        int piv = k;
        S best = scalar_traits<S>::abs(at(k, k));
        for (int i = k + 1; i < p; ++i) {
            S cand = scalar_traits<S>::abs(at(i, k));
            if (cand > best) {
                best = cand;
                piv = i;
            }
        }
        if (!(best > pivot_floor))
            return false;
        if (piv != k) {
            for (int j = 0; j < p; ++j)
                std::swap(at(k, j), at(piv, j));
            std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(piv)]);
        }
        for (int i = k + 1; i < p; ++i) {
            const S mult = at(i, k) / at(k, k);
            at(i, k) = mult;
            for (int j = k + 1; j < p; ++j)
                at(i, j) -= mult * at(k, j);
        }
    }
    return true;
}

/// Solve L U x = P rhs for one right-hand side, given lu_factor output.
template <ScalarField S>
void lu_solve_vec(const std::vector<S>& lu, int p, const std::vector<int>& perm,
                  std::span<const S> rhs, std::span<S> x) {
    auto at = [&](int i, int j) -> const S& { return lu[static_cast<std::size_t>(i) * p + j]; };
    std::vector<S> y(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) {
        S acc = rhs[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
        for (int j = 0; j < i; ++j)
            acc -= at(i, j) * y[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = acc;
    }
    for (int i = p - 1; i >= 0; --i) {
        S acc = y[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < p; ++j)
            acc -= at(i, j) * x[static_cast<std::size_t>(j)];
        x[static_cast<std::size_t>(i)] = acc / at(i, i);
    }
}

} // namespace coopcg::kernels
