// SPDX-License-Identifier: Apache-2.0

#include "coopcg/complexity.hpp"

#include <algorithm>
#include <cmath>

#include "coopcg/errors.hpp"

namespace coopcg {

Rational worst_case_value(long n, long p) {
    if (n < 1 || p < 1)
        throw Error("worst_case_value: need n, p >= 1");
    const mpz_class zn(n), zp(p);
    Rational term1(zn * zn * zn, zp);
    term1.canonicalize();
    const Rational term2(6 * zn * zn);
    Rational term3(zn * (zp + 1) * (2 * zp + 1), 3);
    term3.canonicalize();
    return term1 + term2 + term3;
}

ComplexityEstimate worst_case_mults(long n, long p) {
    if (p > n)
        throw Error("worst_case_mults: need p <= n");
    ComplexityEstimate est;
    est.n = n;
    est.p = p;
    est.total_mults = worst_case_value(n, p);
    est.per_iteration = count_iteration_mults(static_cast<int>(n), static_cast<int>(p));
    est.iterations_assumed = n / p;
    return est;
}

GainResult gain_holds(long n) {
    if (n < 1)
        throw Error("gain_holds: need n >= 1");
    GainResult res;
    res.witness = worst_case_value(n, 1) - worst_case_value(n, n);
    if (n <= 10000) {
        const Rational n1 = worst_case_value(n, 1);
        res.holds = true;
        for (long p = 1; p <= n; ++p) {
            if (worst_case_value(n, p) > n1) {
                res.holds = false;
                break;
            }
        }
    } else {
        // N is strictly convex in p, so its maximum over [1, n] sits at an
        // endpoint; the witness sign settles the comparison.
        res.holds = sgn(res.witness) >= 0;
    }
    return res;
}

namespace {

/// Real root of (4/3) p^3 + p^2 = n^2 (the stationarity relation).
double stationary_point(long n) {
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    double p = std::cbrt(0.75 * n2);
    for (int it = 0; it < 60; ++it) {
        const double f = (4.0 / 3.0) * p * p * p + p * p - n2;
        const double df = 4.0 * p * p + 2.0 * p;
        if (df <= 0.0)
            break;
        const double next = p - f / df;
        if (!(next > 0.0))
            break;
        if (std::abs(next - p) <= 1e-9 * p) {
            p = next;
            break;
        }
        p = next;
    }
    return p;
}

} // namespace

OptimalP optimal_p(long n) {
    if (n < 1)
        throw Error("optimal_p: need n >= 1");
    const double root = stationary_point(n);
    long lo = std::max(1L, static_cast<long>(std::floor(root)) - 2);
    long hi = std::min(n, static_cast<long>(std::ceil(root)) + 2);
    if (lo > hi) {
        lo = 1;
        hi = std::min(n, 4L);
    }
    OptimalP best;
    best.p_star = lo;
    best.n_star = worst_case_value(n, lo);
    for (long p = lo + 1; p <= hi; ++p) {
        const Rational v = worst_case_value(n, p);
        if (v < best.n_star) { // ties keep the smaller p
            best.p_star = p;
            best.n_star = v;
        }
    }
    return best;
}

OptimalP optimal_p_bruteforce(long n) {
    if (n < 1)
        throw Error("optimal_p_bruteforce: need n >= 1");
    OptimalP best;
    best.p_star = 1;
    best.n_star = worst_case_value(n, 1);
    for (long p = 2; p <= n; ++p) {
        const Rational v = worst_case_value(n, p);
        if (v < best.n_star) {
            best.p_star = p;
            best.n_star = v;
        }
    }
    return best;
}

double error_bound(double kappa, long k, double e0_A, BoundMethod method) {
    if (!(kappa >= 1.0))
        throw Error("error_bound: condition number must be >= 1");
    if (k < 0 || e0_A < 0.0)
        throw Error("error_bound: need k >= 0 and e0 >= 0");
    switch (method) {
    case BoundMethod::steepest_descent: {
        const double rho = (kappa - 1.0) / (kappa + 1.0);
        return std::pow(rho, static_cast<double>(k)) * e0_A;
    }
    case BoundMethod::conjugate_gradient: {
        const double s = std::sqrt(kappa);
        const double rho = (s - 1.0) / (s + 1.0);
        return 2.0 * std::pow(rho, static_cast<double>(k)) * e0_A;
    }
    }
    throw Error("error_bound: unknown method");
}

} // namespace coopcg
