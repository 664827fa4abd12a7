// SPDX-License-Identifier: Apache-2.0

// Test-side oracles, independent of the library's solver path: a cyclic
// Jacobi eigensolver, characteristic-polynomial coefficients via the
// trace-recursion method, exact fraction-free determinants and ranks over
// rationals, and the quadratic objective.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "coopcg/dense.hpp"
#include "coopcg/kernels.hpp"
#include "coopcg/scalar.hpp"

namespace oracle {

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> jacobi_eigenvalues(std::vector<double> a, int n) {
    auto at = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                off += at(i, j) * at(i, j);
        if (off < 1e-28)
            break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (at(p, q) == 0.0)
                    continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        ev[static_cast<std::size_t>(i)] = at(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

template <coopcg::ScalarField S>
std::vector<double> jacobi_eigenvalues(const coopcg::SpdMatrix<S>& A) {
    const int n = A.dim();
    std::vector<double> grid(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            grid[static_cast<std::size_t>(i) * n + j] = coopcg::scalar_traits<S>::to_double(A(i, j));
    return jacobi_eigenvalues(std::move(grid), n);
}

/// Coefficients of det(tI - A) = t^n + c[n-1] t^(n-1) + ... + c[0], by the
/// trace recursion (small n only).
inline std::vector<double> char_poly(const std::vector<double>& a, int n) {
    auto mul = [&](const std::vector<double>& x, const std::vector<double>& y) {
        std::vector<double> z(static_cast<std::size_t>(n) * n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < n; ++k) {
                const double xik = x[static_cast<std::size_t>(i) * n + k];
                if (xik == 0.0)
                    continue;
                for (int j = 0; j < n; ++j)
                    z[static_cast<std::size_t>(i) * n + j] +=
                        xik * y[static_cast<std::size_t>(k) * n + j];
            }
        return z;
    };
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0); // M_0 = I
    for (int i = 0; i < n; ++i)
        m[static_cast<std::size_t>(i) * n + i] = 1.0;
    std::vector<double> c(static_cast<std::size_t>(n), 0.0);
    std::vector<double> am = a;
    for (int k = 1; k <= n; ++k) {
        am = mul(a, m);
        double tr = 0.0;
        for (int i = 0; i < n; ++i)
            tr += am[static_cast<std::size_t>(i) * n + i];
        const double ck = -tr / k;
        c[static_cast<std::size_t>(n - k)] = ck;
        m = am;
        for (int i = 0; i < n; ++i)
            m[static_cast<std::size_t>(i) * n + i] += ck;
    }
    return c;
}

/// Monic polynomial with the given roots, same coefficient layout.
inline std::vector<double> poly_from_roots(const std::vector<double>& roots) {
    std::vector<double> c = {1.0}; // degree 0: constant 1
    for (double r : roots) {
        std::vector<double> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i + 1] += c[i];
            next[i] -= r * c[i];
        }
        c = std::move(next);
    }
    c.pop_back(); // drop the leading 1 to match char_poly layout
    return c;
}

/// Exact determinant by Bareiss fraction-free elimination.
inline coopcg::Rational exact_det(std::vector<coopcg::Rational> a, int n) {
    using coopcg::Rational;
    auto at = [&](int i, int j) -> Rational& { return a[static_cast<std::size_t>(i) * n + j]; };
    Rational sign(1);
    Rational prev(1);
    for (int k = 0; k < n - 1; ++k) {
        if (sgn(at(k, k)) == 0) {
            int piv = -1;
            for (int i = k + 1; i < n; ++i)
                if (sgn(at(i, k)) != 0) {
                    piv = i;
                    break;
                }
            if (piv < 0)
                return Rational(0);
            for (int j = 0; j < n; ++j)
                std::swap(at(k, j), at(piv, j));
            sign = -sign;
        }
        for (int i = k + 1; i < n; ++i)
            for (int j = k + 1; j < n; ++j)
                at(i, j) = (at(i, j) * at(k, k) - at(i, k) * at(k, j)) / prev;
        prev = at(k, k);
    }
    return sign * at(n - 1, n - 1);
}

/// Exact column rank over the rationals (plain Gaussian elimination).
inline int exact_rank(std::vector<coopcg::Rational> a, int rows, int cols) {
    using coopcg::Rational;
    auto at = [&](int i, int j) -> Rational& { return a[static_cast<std::size_t>(i) * cols + j]; };
    int rank = 0;
    for (int col = 0; col < cols && rank < rows; ++col) {
        int piv = -1;
        for (int i = rank; i < rows; ++i)
            if (sgn(at(i, col)) != 0) {
                piv = i;
                break;
            }
        if (piv < 0)
            continue;
        if (piv != rank)
            for (int j = 0; j < cols; ++j)
                std::swap(at(rank, j), at(piv, j));
        for (int i = rank + 1; i < rows; ++i) {
            if (sgn(at(i, col)) == 0)
                continue;
            const Rational f = at(i, col) / at(rank, col);
            for (int j = col; j < cols; ++j)
                at(i, j) -= f * at(rank, j);
        }
        ++rank;
    }
    return rank;
}

template <coopcg::ScalarField S>
int exact_rank_of_blocks(const std::vector<coopcg::DenseBlock<S>>& blocks, int upto) {
    static_assert(coopcg::scalar_traits<S>::is_exact);
    const int rows = blocks.front().rows();
    int cols = 0;
    for (int b = 0; b <= upto; ++b)
        cols += blocks[static_cast<std::size_t>(b)].cols();
    std::vector<coopcg::Rational> grid(static_cast<std::size_t>(rows) * cols);
    int c0 = 0;
    for (int b = 0; b <= upto; ++b) {
        const auto& blk = blocks[static_cast<std::size_t>(b)];
        for (int j = 0; j < blk.cols(); ++j)
            for (int i = 0; i < rows; ++i)
                grid[static_cast<std::size_t>(i) * cols + (c0 + j)] = blk(i, j);
        c0 += blk.cols();
    }
    return exact_rank(std::move(grid), rows, cols);
}

/// Quadratic objective f(x) = x^T A x / 2 - b^T x.
template <coopcg::ScalarField S>
S objective(const coopcg::SpdMatrix<S>& A, const coopcg::Vec<S>& b, std::span<const S> x) {
    const int n = A.dim();
    std::vector<S> ax(static_cast<std::size_t>(n));
    coopcg::kernels::matvec_col<S>(A, x, std::span<S>(ax.data(), ax.size()));
    S quad{};
    S lin{};
    for (int i = 0; i < n; ++i) {
        quad += x[static_cast<std::size_t>(i)] * ax[static_cast<std::size_t>(i)];
        lin += b[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
    }
    if constexpr (coopcg::scalar_traits<S>::is_exact)
        return quad / 2 - lin;
    else
        return quad / 2.0 - lin;
}

} // namespace oracle
