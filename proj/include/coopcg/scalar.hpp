// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gmpxx.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "coopcg/errors.hpp"

namespace coopcg {

/// Exact scalar type for the rational mode.  GMP's canonical mpq wrapper;
/// every constructed value must be kept canonicalized.
using Rational = mpq_class;

template <typename S>
struct scalar_traits;

template <>
struct scalar_traits<double> {
    static constexpr bool is_exact = false;

    static double from_int(long v) { return static_cast<double>(v); }
    static double from_ratio(long num, long den) {
        return static_cast<double>(num) / static_cast<double>(den);
    }
    static double abs(double v) { return std::fabs(v); }
    static double to_double(double v) { return v; }
    static bool is_zero(double v) { return v == 0.0; }

    /// Shortest exact round-trip form.
    static std::string to_string(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    static double parse(const std::string& text) {
        char* end = nullptr;
        double v = std::strtod(text.c_str(), &end);
        if (end == text.c_str() || (end != nullptr && *end != '\0'))
            throw ParseError("bad numeric literal: '" + text + "'");
        return v;
    }
};

template <>
struct scalar_traits<Rational> {
    static constexpr bool is_exact = true;

    static Rational from_int(long v) { return Rational(v); }
    static Rational from_ratio(long num, long den) {
        Rational q(num, den);
        q.canonicalize();
        return q;
    }
    static Rational abs(const Rational& v) { return ::abs(v); }
    static double to_double(const Rational& v) { return v.get_d(); }
    static bool is_zero(const Rational& v) { return sgn(v) == 0; }

    /// "num/den" with decimal numerator and denominator ("3/4", "-2/1").
    static std::string to_string(const Rational& v) {
        return v.get_num().get_str() + "/" + v.get_den().get_str();
    }

    /// Accepts "num/den", plain integers, and decimal/scientific literals
    /// ("0.125" -> 1/8, "1e-3" -> 1/1000), all converted exactly.
    static Rational parse(const std::string& text);
};

template <typename S>
concept ScalarField = requires {
    { scalar_traits<S>::is_exact } -> std::convertible_to<bool>;
};

namespace detail {

inline Rational pow10_rational(long e) {
    mpz_class p10;
    mpz_ui_pow_ui(p10.get_mpz_t(), 10, static_cast<unsigned long>(e < 0 ? -e : e));
    Rational q = (e < 0) ? Rational(1, p10) : Rational(p10, 1);
    q.canonicalize();
    return q;
}

} // namespace detail

inline Rational scalar_traits<Rational>::parse(const std::string& text) {
    if (text.empty())
        throw ParseError("empty rational literal");
    if (text.find('/') != std::string::npos) {
        Rational q;
        if (q.set_str(text, 10) != 0)
            throw ParseError("bad rational literal: '" + text + "'");
        if (sgn(q.get_den()) == 0)
            throw ParseError("zero denominator: '" + text + "'");
        q.canonicalize();
        return q;
    }
    // Decimal / scientific form, converted without rounding.
    std::size_t i = 0;
    bool neg = false;
    if (text[i] == '+' || text[i] == '-') {
        neg = (text[i] == '-');
        ++i;
    }
    std::string digits;
    long frac_len = 0;
    bool seen_digit = false, seen_dot = false;
    for (; i < text.size() && (std::isdigit(static_cast<unsigned char>(text[i])) || text[i] == '.'); ++i) {
        if (text[i] == '.') {
            if (seen_dot)
                throw ParseError("bad rational literal: '" + text + "'");
            seen_dot = true;
        } else {
            digits.push_back(text[i]);
            seen_digit = true;
            if (seen_dot)
                ++frac_len;
        }
    }
    long exp10 = 0;
    if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        ++i;
        char* end = nullptr;
        exp10 = std::strtol(text.c_str() + i, &end, 10);
        if (end == text.c_str() + i)
            throw ParseError("bad exponent: '" + text + "'");
        i = static_cast<std::size_t>(end - text.c_str());
    }
    if (!seen_digit || i != text.size())
        throw ParseError("bad rational literal: '" + text + "'");
    mpz_class mantissa(digits.empty() ? "0" : digits, 10);
    Rational q(mantissa, 1);
    q.canonicalize();
    q *= detail::pow10_rational(exp10 - frac_len);
    if (neg)
        q = -q;
    return q;
}

} // namespace coopcg
