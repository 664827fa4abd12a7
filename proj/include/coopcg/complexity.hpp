// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "coopcg/scalar.hpp"
#include "coopcg/workplan.hpp"

// Exact worst-case cost model for the multithread block solver: per-worker
// multiplication counts, the always-beneficial-parallelism predicate, and
// the optimal agent count.  Everything is evaluated over rationals; no
// float round-off enters any comparison.

namespace coopcg {

struct ComplexityEstimate {
    long n = 0;
    long p = 0;
    /// N(p) = n^3/p + 6 n^2 + n (p+1)(2p+1)/3, evaluated exactly with p
    /// treated continuously (n/p iterations, not floor(n/p)).
    Rational total_mults;
    std::uint64_t per_iteration = 0; ///< count_iteration_mults(n, p)
    long iterations_assumed = 0;     ///< floor(n / p)
};

/// Exact N(p).
Rational worst_case_value(long n, long p);

ComplexityEstimate worst_case_mults(long n, long p);

struct GainResult {
    bool holds = false;     ///< N(1) >= N(p) for every integer p in [1, n]
    Rational witness;       ///< N(1) - N(n), equals n(n-1)(n-5)/3 exactly
};

/// Exhaustive check for n <= 10^4; witness sign plus convexity beyond.
GainResult gain_holds(long n);

struct OptimalP {
    long p_star = 1;
    Rational n_star; ///< N(p_star)
};

/// Integer argmin of N over [1, n]: the stationarity relation
/// n^2 = p^2 (4/3 p + 1) brackets the real optimum, the neighboring
/// integers are compared exactly, ties break toward smaller p.
OptimalP optimal_p(long n);

/// Independent verifier: plain scan over every p in [1, n].
OptimalP optimal_p_bruteforce(long n);

enum class BoundMethod { steepest_descent, conjugate_gradient };

/// Worst-case A-norm error bound after k steps from initial error e0_A:
/// ((kappa-1)/(kappa+1))^k e0 for steepest descent,
/// 2 ((sqrt(kappa)-1)/(sqrt(kappa)+1))^k e0 for conjugate gradient.
double error_bound(double kappa, long k, double e0_A, BoundMethod method);

} // namespace coopcg
