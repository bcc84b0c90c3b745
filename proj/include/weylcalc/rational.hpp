#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>

namespace weylcalc {

using Int = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline std::string to_string(const Rational &r) { return r.str(); }

inline Rational rational_pow(const Rational &base, unsigned e) {
    Rational acc(1);
    Rational b = base;
    unsigned k = e;
    while (k > 0) {
        if (k & 1u) acc *= b;
        b *= b;
        k >>= 1u;
    }
    return acc;
}

inline Rational factorial(unsigned n) {
    Int acc(1);
    for (unsigned k = 2; k <= n; ++k) acc *= k;
    return Rational(acc);
}

/// gcd on Q, normalized positive: gcd(p/q, r/s) = gcd(ps, rq)/(qs).
/// Used to scale polynomials to coprime integer coefficients.
inline Rational rational_gcd(const Rational &a, const Rational &b) {
    if (a == 0) return b < 0 ? Rational(-b) : b;
    if (b == 0) return a < 0 ? Rational(-a) : a;
    Int p = numerator(a), q = denominator(a);
    Int r = numerator(b), s = denominator(b);
    Int g = boost::multiprecision::gcd(p * s, r * q);
    if (g < 0) g = -g;
    return Rational(g, q * s);
}

}  // namespace weylcalc
