// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "coopcg/dense.hpp"
#include "coopcg/errors.hpp"
#include "coopcg/kernels.hpp"
#include "coopcg/scalar.hpp"

namespace coopcg {

/// A * D, column by column.
template <ScalarField S>
DenseBlock<S> matvec_block(const SpdMatrix<S>& A, const DenseBlock<S>& D) {
    if (D.rows() != A.dim())
        throw DimensionError("matvec_block: row count does not match matrix dimension");
    DenseBlock<S> out(D.rows(), D.cols());
    for (int j = 0; j < D.cols(); ++j)
        kernels::matvec_col<S>(A, D.col(j), out.col(j));
    return out;
}

/// Gram matrix D^T (A D) assembled row by row without symmetrization:
/// entry (i, j) = dot(D col i, AD col j).  This is exactly what the
/// runtime's per-worker Gram phase produces.
template <ScalarField S>
SmallSpd<S> gram_raw(const DenseBlock<S>& D, const DenseBlock<S>& AD) {
    if (D.rows() != AD.rows() || D.cols() != AD.cols())
        throw DimensionError("gram: D and AD shapes differ");
    const int p = D.cols();
    SmallSpd<S> m(p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            m(i, j) = kernels::dot<S>(D.col(i), AD.col(j));
    return m;
}

/// Gram matrix D^T A D.  Float mode averages the off-diagonal pair so the
/// result is symmetric to the last bit; rational mode is symmetric already.
template <ScalarField S>
SmallSpd<S> gram(const DenseBlock<S>& D, const DenseBlock<S>& AD) {
    SmallSpd<S> m = gram_raw(D, AD);
    if constexpr (!scalar_traits<S>::is_exact) {
        const int p = m.dim();
        SmallSpd<S> sym(p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j)
                sym(i, j) = (m(i, j) + m(j, i)) / 2.0;
        return sym;
    }
    return m;
}

namespace detail {

/// Pivot floor used when factoring a small system: exact zero in rational
/// mode, a relative floor off the largest entry in float mode.
template <ScalarField S>
S small_pivot_floor(const SmallSpd<S>& m) {
    if constexpr (scalar_traits<S>::is_exact) {
        return S{};
    } else {
        S maxabs{};
        for (const S& v : m.data())
            maxabs = std::max(maxabs, scalar_traits<S>::abs(v));
        return maxabs * 1e-14;
    }
}

} // namespace detail

/// Solve M X = B by LU with partial pivoting, one right-hand side at a
/// time.  Throws SingularMatrixError when a pivot dies, which callers read
/// as rank degeneracy of the block that generated M.
template <ScalarField S>
DenseBlock<S> solve_small(const SmallSpd<S>& M, const DenseBlock<S>& B) {
    const int p = M.dim();
    if (B.rows() != p)
        throw DimensionError("solve_small: right-hand side rows do not match");
    std::vector<S> lu = M.data();
    std::vector<int> perm;
    if (!kernels::lu_factor<S>(lu, p, perm, detail::small_pivot_floor(M)))
        throw SingularMatrixError("solve_small: pivot vanished (rank-degenerate Gram matrix)");
    DenseBlock<S> X(p, B.cols());
    for (int j = 0; j < B.cols(); ++j)
        kernels::lu_solve_vec<S>(lu, p, perm, B.col(j), X.col(j));
    return X;
}

struct RankResult {
    int rank = 0;
    /// Column indices chosen greedily, largest pivot first; size == rank.
    std::vector<int> columns;
};

/// Numerical rank of a block by column-pivoted Gram-Schmidt.  A step is
/// accepted while its pivot norm exceeds tol * (largest pivot norm).  The
/// comparison is done on squared norms so the rational mode stays exact
/// (tol must be 0 there).
template <ScalarField S>
RankResult numerical_rank(const DenseBlock<S>& D, const S& tol) {
    const int n = D.rows();
    const int p = D.cols();
    RankResult res;
    if (n == 0 || p == 0)
        return res;

    // Working copy of the columns; chosen pivots stay as an unnormalized
    // orthogonal basis (no square roots needed).
    DenseBlock<S> V = D;
    std::vector<bool> used(static_cast<std::size_t>(p), false);
    std::vector<std::vector<S>> basis;
    std::vector<S> basis_nsq;
    S max_pivot_sq{};
    const S tol_sq = tol * tol;

    for (int step = 0; step < p; ++step) {
        int best = -1;
        S best_sq{};
        for (int j = 0; j < p; ++j) {
            if (used[static_cast<std::size_t>(j)])
                continue;
            const S nsq = kernels::norm_sq<S>(V.col(j));
            if (best < 0 || nsq > best_sq) {
                best = j;
                best_sq = nsq;
            }
        }
        if (step == 0)
            max_pivot_sq = best_sq;
        if (!(best_sq > tol_sq * max_pivot_sq))
            break;
        used[static_cast<std::size_t>(best)] = true;
        res.columns.push_back(best);
        ++res.rank;
        basis.push_back(V.column_copy(best));
        basis_nsq.push_back(best_sq);
        // Project the chosen direction out of every remaining column.
        const auto& q = basis.back();
        const S& qsq = basis_nsq.back();
        for (int j = 0; j < p; ++j) {
            if (used[static_cast<std::size_t>(j)])
                continue;
            auto c = V.col(j);
            const S coef = kernels::dot<S>(std::span<const S>(q.data(), q.size()),
                                           std::span<const S>(c.data(), c.size())) /
                           qsq;
            for (int i = 0; i < n; ++i)
                c[static_cast<std::size_t>(i)] -= coef * q[static_cast<std::size_t>(i)];
        }
    }
    return res;
}

/// Exact quadratic form x^T A x (the squared A-norm).
template <ScalarField S>
S a_norm_sq(const SpdMatrix<S>& A, const Vec<S>& x) {
    if (static_cast<int>(x.size()) != A.dim())
        throw DimensionError("a_norm: vector length does not match matrix dimension");
    std::vector<S> ax(x.size());
    kernels::matvec_col<S>(A, std::span<const S>(x.data(), x.size()),
                           std::span<S>(ax.data(), ax.size()));
    return kernels::dot<S>(std::span<const S>(x.data(), x.size()),
                           std::span<const S>(ax.data(), ax.size()));
}

/// A-norm (x^T A x)^(1/2), reported as double.  A radicand that goes
/// negative beyond round-off scale is an SPD violation; small negative
/// round-off is clamped to zero.
template <ScalarField S>
double a_norm(const SpdMatrix<S>& A, const Vec<S>& x) {
    const S q = a_norm_sq(A, x);
    if constexpr (scalar_traits<S>::is_exact) {
        if (sgn(q) < 0)
            throw SpdViolationError("a_norm: negative quadratic form in exact mode");
        return std::sqrt(scalar_traits<S>::to_double(q));
    } else {
        if (q < 0) {
            // scale: sum |x_i| * |(A x)_i|
            std::vector<S> ax(x.size());
            kernels::matvec_col<S>(A, std::span<const S>(x.data(), x.size()),
                                   std::span<S>(ax.data(), ax.size()));
            S scale{};
            for (std::size_t i = 0; i < x.size(); ++i)
                scale += scalar_traits<S>::abs(x[i]) * scalar_traits<S>::abs(ax[i]);
            if (q < -1e-12 * scale)
                throw SpdViolationError("a_norm: quadratic form negative beyond round-off");
            return 0.0;
        }
        return std::sqrt(q);
    }
}

} // namespace coopcg
