#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace scexp {

using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

// Parses "num/den", "num", or a decimal literal such as "0.25" into an exact rational.
inline Rat parse_rational(const std::string& text) {
    const auto slash = text.find('/');
    if (slash != std::string::npos) {
        BigInt num(text.substr(0, slash));
        BigInt den(text.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("rational with zero denominator: " + text);
        return Rat(num, den);
    }
    const auto dot = text.find('.');
    if (dot == std::string::npos) {
        return Rat(BigInt(text), BigInt(1));
    }
    std::string digits = text.substr(0, dot) + text.substr(dot + 1);
    if (digits.empty() || digits == "-" || digits == "+") {
        throw std::invalid_argument("malformed rational: " + text);
    }
    BigInt den = 1;
    for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
    return Rat(BigInt(digits), den);
}

// Every finite double is a dyadic rational; the conversion is exact.
inline Rat rat_from_double(double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("cannot convert non-finite double to rational");
    if (v == 0.0) return Rat(0);
    int exp = 0;
    double m = std::frexp(v, &exp);           // v = m * 2^exp, |m| in [0.5, 1)
    auto mant = static_cast<std::int64_t>(std::ldexp(m, 53));
    exp -= 53;
    Rat r(mant);
    if (exp >= 0) {
        r *= Rat(BigInt(1) << exp);
    } else {
        r /= Rat(BigInt(1) << (-exp));
    }
    return r;
}

inline double to_double(const Rat& r) { return static_cast<double>(r); }

// log2 of a positive rational, robust to magnitudes far outside double range.
inline double log2_rat(const Rat& r) {
    if (r <= 0) {
        if (r == 0) return -std::numeric_limits<double>::infinity();
        throw std::domain_error("log2 of negative rational");
    }
    const BigInt num = boost::multiprecision::numerator(r);
    const BigInt den = boost::multiprecision::denominator(r);
    auto log2_big = [](const BigInt& b) {
        const auto bits = boost::multiprecision::msb(b);  // floor(log2 b)
        if (bits <= 1000) return std::log2(static_cast<double>(b));
        const BigInt scaled = b >> (bits - 512);
        return std::log2(static_cast<double>(scaled)) + static_cast<double>(bits - 512);
    };
    return log2_big(num) - log2_big(den);
}

inline std::string rat_to_string(const Rat& r) {
    return boost::multiprecision::numerator(r).str() + "/" +
           boost::multiprecision::denominator(r).str();
}

inline BigInt pow_int(BigInt base, unsigned exp) {
    BigInt out = 1;
    while (exp) {
        if (exp & 1u) out *= base;
        base *= base;
        exp >>= 1u;
    }
    return out;
}

inline Rat pow_rat(const Rat& base, unsigned exp) {
    return Rat(pow_int(boost::multiprecision::numerator(base), exp),
               pow_int(boost::multiprecision::denominator(base), exp));
}

}  // namespace scexp
