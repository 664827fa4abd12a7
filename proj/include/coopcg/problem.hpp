// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "coopcg/dense.hpp"
#include "coopcg/dense_ops.hpp"
#include "coopcg/errors.hpp"
#include "coopcg/kernels.hpp"
#include "coopcg/rng.hpp"
#include "coopcg/scalar.hpp"

// Seeded problem generation: random SPD systems with a prescribed condition
// number for float experiments, and exact integer SPD fixtures for the
// rational mode.  All generators are pure functions of (parameters, seed),
// with one RNG stream per artifact so e.g. changing p never perturbs A.

namespace coopcg {

enum class Mode { float64, rational };

inline Mode parse_mode(const std::string& s) {
    if (s == "float" || s == "float64")
        return Mode::float64;
    if (s == "rational" || s == "exact")
        return Mode::rational;
    throw ParseError("unknown mode '" + s + "' (expected float or rational)");
}

struct ProblemSpec {
    int n = 0;
    int p = 1;
    double cond = 1.0;
    std::uint64_t seed = 0;
    Mode mode = Mode::float64;

    void validate() const {
        if (n < 1)
            throw DimensionError("problem: n must be positive");
        if (p < 1 || p >= std::max(n, 2))
            throw DimensionError("problem: need 1 <= p < n");
        if (cond < 1.0)
            throw Error("problem: condition number must be >= 1");
    }
};

template <ScalarField S>
struct ProblemInstance {
    SpdMatrix<S> A;
    Vec<S> b;
    DenseBlock<S> X0;
    std::optional<Vec<S>> x_star; // oracle solution, when requested
    double realized_cond = 0.0;   // extreme-eigenvalue ratio (float mode)
};

/// Haar-distributed random orthogonal matrix, returned as a row-major
/// n x n grid.  Implementation: modified Gram-Schmidt on an i.i.d.
/// standard-normal matrix; every orthogonalization pivot (column norm) is
/// positive, which is the sign convention that makes the distribution
/// uniform over the orthogonal group.  n == 1 returns exactly (1).
inline std::vector<double> haar_orthogonal(int n, std::uint64_t seed) {
    if (n < 1)
        throw DimensionError("haar_orthogonal: n must be positive");
    std::vector<double> q(static_cast<std::size_t>(n) * n);
    if (n == 1) {
        q[0] = 1.0;
        return q;
    }
    auto stream = rng::make_stream(seed, rng::StreamId::orthogonal);
    // Column-major scratch for the Gaussian sample, filled column by column.
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(n),
                                          std::vector<double>(static_cast<std::size_t>(n)));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = stream.next_normal();
    for (int j = 0; j < n; ++j) {
        auto& v = cols[static_cast<std::size_t>(j)];
        for (int i = 0; i < j; ++i) {
            const auto& u = cols[static_cast<std::size_t>(i)];
            double coef = 0.0;
            for (int r = 0; r < n; ++r)
                coef += u[static_cast<std::size_t>(r)] * v[static_cast<std::size_t>(r)];
            for (int r = 0; r < n; ++r)
                v[static_cast<std::size_t>(r)] -= coef * u[static_cast<std::size_t>(r)];
        }
        double nsq = 0.0;
        for (int r = 0; r < n; ++r)
            nsq += v[static_cast<std::size_t>(r)] * v[static_cast<std::size_t>(r)];
        double norm = std::sqrt(nsq);
        if (norm == 0.0) {
            // Measure-zero degenerate draw; fall back to a fresh normal column.
            for (int r = 0; r < n; ++r)
                v[static_cast<std::size_t>(r)] = stream.next_normal();
            --j;
            continue;
        }
        for (int r = 0; r < n; ++r)
            v[static_cast<std::size_t>(r)] /= norm;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            q[static_cast<std::size_t>(i) * n + j] = cols[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    return q;
}

struct SpdWithSpectrum {
    SpdMatrix<double> A;
    std::vector<double> spectrum; // the diagonal of the factor before rotation
};

/// A = U diag(spectrum) U^T with U Haar orthogonal and spectrum entries
/// i.i.d. uniform on [1, cond], except that the smallest draw is clamped
/// to 1 and the largest to cond so the condition number is exactly cond.
inline SpdWithSpectrum random_spd_with_spectrum(int n, double cond, std::uint64_t seed) {
    if (n < 1)
        throw DimensionError("random_spd: n must be positive");
    if (cond < 1.0)
        throw Error("random_spd: condition number must be >= 1");
    std::vector<double> lambda(static_cast<std::size_t>(n), 1.0);
    if (n >= 2) {
        auto stream = rng::make_stream(seed, rng::StreamId::spectrum);
        for (int i = 0; i < n; ++i)
            lambda[static_cast<std::size_t>(i)] = stream.next_uniform(1.0, cond);
        const auto lo = std::min_element(lambda.begin(), lambda.end());
        const auto hi = std::max_element(lambda.begin(), lambda.end());
        if (lo == hi) {
            lambda.front() = 1.0;
            lambda.back() = cond;
        } else {
            *lo = 1.0;
            *hi = cond;
        }
    }
    const std::vector<double> u = haar_orthogonal(n, seed);
    // A = (U Lambda) U^T, then the SpdMatrix constructor symmetrizes.
    std::vector<double> a(static_cast<std::size_t>(n) * n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += u[static_cast<std::size_t>(i) * n + k] * lambda[static_cast<std::size_t>(k)] *
                       u[static_cast<std::size_t>(j) * n + k];
            a[static_cast<std::size_t>(i) * n + j] = acc;
        }
    }
    return {SpdMatrix<double>(n, std::move(a)), std::move(lambda)};
}

inline SpdMatrix<double> random_spd(int n, double cond, std::uint64_t seed) {
    return random_spd_with_spectrum(n, cond, seed).A;
}

/// Exactly symmetric, exactly positive definite rational fixture:
/// A = B^T B + n I for B with integer entries in [-3, 3].
inline SpdMatrix<Rational> integer_spd(int n, std::uint64_t seed) {
    if (n < 1)
        throw DimensionError("integer_spd: n must be positive");
    if (n > 64)
        throw Error("integer_spd: n > 64 is too expensive in exact arithmetic");
    auto stream = rng::make_stream(seed, rng::StreamId::integer_entries);
    std::vector<long> b(static_cast<std::size_t>(n) * n);
    for (auto& v : b)
        v = stream.next_int(-3, 3);
    std::vector<Rational> a(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            long acc = 0;
            for (int k = 0; k < n; ++k)
                acc += b[static_cast<std::size_t>(k) * n + i] * b[static_cast<std::size_t>(k) * n + j];
            if (i == j)
                acc += n;
            a[static_cast<std::size_t>(i) * n + j] = Rational(acc);
            a[static_cast<std::size_t>(j) * n + i] = Rational(acc);
        }
    return SpdMatrix<Rational>(n, std::move(a));
}

namespace detail {

template <ScalarField S>
S draw_entry(rng::Stream& stream) {
    if constexpr (scalar_traits<S>::is_exact) {
        // Sixteenths on [-10, 10]: exact, small denominators.
        return scalar_traits<S>::from_ratio(stream.next_int(-160, 160), 16);
    } else {
        return stream.next_uniform(-10.0, 10.0);
    }
}

} // namespace detail

/// Right-hand side and starting block, every entry i.i.d. uniform on
/// [-10, 10].  b and X0 come from separate streams; X0 is filled column by
/// column so growing p appends columns without changing the earlier ones.
template <ScalarField S>
std::pair<Vec<S>, DenseBlock<S>> random_rhs_and_starts(int n, int p, std::uint64_t seed) {
    auto rhs_stream = rng::make_stream(seed, rng::StreamId::rhs);
    Vec<S> b(static_cast<std::size_t>(n));
    for (auto& v : b)
        v = detail::draw_entry<S>(rhs_stream);
    auto start_stream = rng::make_stream(seed, rng::StreamId::starts);
    DenseBlock<S> x0(n, p);
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < n; ++i)
            x0(i, j) = detail::draw_entry<S>(start_stream);
    return {std::move(b), std::move(x0)};
}

/// Direct dense solve (LU, partial pivoting) used to attach oracle
/// solutions to generated problems.
template <ScalarField S>
Vec<S> solve_dense(const SpdMatrix<S>& A, const Vec<S>& b) {
    const int n = A.dim();
    if (static_cast<int>(b.size()) != n)
        throw DimensionError("solve_dense: right-hand side length mismatch");
    std::vector<S> lu = A.entries();
    std::vector<int> perm;
    if (!kernels::lu_factor<S>(lu, n, perm, S{}))
        throw SingularMatrixError("solve_dense: matrix is singular");
    Vec<S> x(static_cast<std::size_t>(n));
    kernels::lu_solve_vec<S>(lu, n, perm, std::span<const S>(b.data(), b.size()),
                             std::span<S>(x.data(), x.size()));
    return x;
}

template <ScalarField S>
ProblemInstance<S> make_problem(const ProblemSpec& spec, bool with_oracle = false);

template <>
inline ProblemInstance<double> make_problem<double>(const ProblemSpec& spec, bool with_oracle) {
    spec.validate();
    auto gen = random_spd_with_spectrum(spec.n, spec.cond, spec.seed);
    auto [b, x0] = random_rhs_and_starts<double>(spec.n, spec.p, spec.seed);
    const auto [lo, hi] = std::minmax_element(gen.spectrum.begin(), gen.spectrum.end());
    ProblemInstance<double> inst{std::move(gen.A), std::move(b), std::move(x0), std::nullopt,
                                 *hi / *lo};
    if (with_oracle)
        inst.x_star = solve_dense(inst.A, inst.b);
    return inst;
}

template <>
inline ProblemInstance<Rational> make_problem<Rational>(const ProblemSpec& spec, bool with_oracle) {
    spec.validate();
    auto A = integer_spd(spec.n, spec.seed);
    auto [b, x0] = random_rhs_and_starts<Rational>(spec.n, spec.p, spec.seed);
    ProblemInstance<Rational> inst{std::move(A), std::move(b), std::move(x0), std::nullopt, 0.0};
    if (with_oracle)
        inst.x_star = solve_dense(inst.A, inst.b);
    return inst;
}

} // namespace coopcg
