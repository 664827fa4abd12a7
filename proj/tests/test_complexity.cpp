// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "coopcg/complexity.hpp"
#include "coopcg/errors.hpp"

using namespace coopcg;

TEST_CASE("count_iteration_mults: closed-form spot values") {
    CHECK(count_iteration_mults(100, 2) == 10000 + 1200 + 10);
    for (int n : {5, 20, 100})
        CHECK(count_iteration_mults(n, 1) ==
              static_cast<std::uint64_t>(n) * n + 6 * static_cast<std::uint64_t>(n) + 2);
}

TEST_CASE("worst_case_mults: endpoint values and identities") {
    // n = 5: N(1) = N(5) = 285
    CHECK(worst_case_value(5, 1) == Rational(285));
    CHECK(worst_case_value(5, 5) == Rational(285));
    // n = 6: using six workers beats one
    CHECK(worst_case_value(6, 1) == Rational(444));
    CHECK(worst_case_value(6, 6) == Rational(434));
    // p = 1 closed form: n^3 + 6 n^2 + 2n
    for (long n : {2L, 7L, 31L, 1000L}) {
        const mpz_class zn(n);
        CHECK(worst_case_value(n, 1) == Rational(zn * zn * zn + 6 * zn * zn + 2 * zn));
    }
}

TEST_CASE("worst_case_mults: N(p) = (n/p) * per-iteration count, exactly") {
    for (long n : {7L, 20L, 60L, 101L})
        for (long p : {1L, 2L, 3L, 4L, 7L}) {
            const auto est = worst_case_mults(n, p);
            Rational ratio(n, p);
            ratio.canonicalize();
            const Rational per_iter(static_cast<long>(
                count_iteration_mults(static_cast<int>(n), static_cast<int>(p))));
            CHECK(est.total_mults == ratio * per_iter);
            CHECK(est.iterations_assumed == n / p);
        }
}

TEST_CASE("N is strictly convex in p") {
    for (long n : {2L, 10L, 137L, 1000L})
        for (long p = 2; p < n; ++p) {
            const Rational second_diff = worst_case_value(n, p - 1) -
                                         2 * worst_case_value(n, p) +
                                         worst_case_value(n, p + 1);
            CHECK(sgn(second_diff) > 0);
        }
}

TEST_CASE("gain_holds: witness identity and threshold at n = 5") {
    const auto g5 = gain_holds(5);
    CHECK(g5.holds);
    CHECK(g5.witness == Rational(0));

    const auto g4 = gain_holds(4);
    CHECK(!g4.holds);
    CHECK(g4.witness == Rational(-4)); // (1/3) * 4 * 3 * (-1)

    const auto g100 = gain_holds(100);
    CHECK(g100.holds);

    // witness equals n(n-1)(n-5)/3 exactly, for every n up to 200 here
    for (long n = 1; n <= 200; ++n) {
        Rational expect(mpz_class(n) * (n - 1) * (n - 5), 3);
        expect.canonicalize();
        CHECK(gain_holds(n).witness == expect);
    }
}

TEST_CASE("optimal_p: n = 5 picks two workers") {
    const auto opt = optimal_p(5);
    CHECK(opt.p_star == 2);
    CHECK(opt.n_star == Rational(475, 2)); // 237.5
    CHECK(worst_case_value(5, 3) > opt.n_star);
    CHECK(worst_case_value(5, 1) > opt.n_star);
}

TEST_CASE("optimal_p agrees with brute force over a dense range") {
    for (long n = 1; n <= 400; ++n) {
        const auto fast = optimal_p(n);
        const auto brute = optimal_p_bruteforce(n);
        CHECK(fast.p_star == brute.p_star);
        CHECK(fast.n_star == brute.n_star);
    }
}

TEST_CASE("optimal_p at n = 10^6 follows the asymptotic rule") {
    const long n = 1000000;
    const auto opt = optimal_p(n);
    const double asymptotic = std::cbrt(0.75) * std::pow(static_cast<double>(n), 2.0 / 3.0);
    CHECK(std::abs(static_cast<double>(opt.p_star) - asymptotic) <= 0.01 * asymptotic);

    // the leading two terms of N(p*) approach the 1.651 n^(7/3) constant;
    // the full value carries the +6 n^2 term, which is 0.06 n^(7/3) here
    const double n73 = std::pow(static_cast<double>(n), 7.0 / 3.0);
    const double full_ratio = opt.n_star.get_d() / n73;
    const Rational leading = opt.n_star - Rational(6 * mpz_class(n) * mpz_class(n));
    const double leading_ratio = leading.get_d() / n73;
    CHECK(leading_ratio >= 1.60);
    CHECK(leading_ratio <= 1.70);
    CHECK(full_ratio == doctest::Approx(leading_ratio + 0.06).epsilon(1e-6));
}

TEST_CASE("N(p*)/n^(7/3) enters [1.60, 1.70] once n is large enough") {
    const long n = 1000000000; // 6 n^2 / n^(7/3) = 0.006 here
    const auto opt = optimal_p(n);
    const double ratio = opt.n_star.get_d() / std::pow(static_cast<double>(n), 7.0 / 3.0);
    CHECK(ratio >= 1.60);
    CHECK(ratio <= 1.70);
}

TEST_CASE("error_bound: edge cases and the large-kappa comparison") {
    CHECK(error_bound(1.0, 5, 3.0, BoundMethod::steepest_descent) == 0.0);
    CHECK(error_bound(1.0, 5, 3.0, BoundMethod::conjugate_gradient) == 0.0);
    CHECK(error_bound(10.0, 0, 3.0, BoundMethod::steepest_descent) == 3.0);
    CHECK(error_bound(10.0, 0, 3.0, BoundMethod::conjugate_gradient) == 6.0);

    const double cg = error_bound(1e6, 100, 1.0, BoundMethod::conjugate_gradient);
    const double sd = error_bound(1e6, 100, 1.0, BoundMethod::steepest_descent);
    CHECK(cg == doctest::Approx(2.0 * std::pow(999.0 / 1001.0, 100)).epsilon(1e-12));
    CHECK(cg == doctest::Approx(1.637).epsilon(1e-3));
    CHECK(sd == doctest::Approx(0.9998).epsilon(1e-4));
    CHECK(cg < 2.0);
    CHECK(sd < 1.0);

    CHECK_THROWS_AS(error_bound(0.5, 1, 1.0, BoundMethod::conjugate_gradient), Error);
}
