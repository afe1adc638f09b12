#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/functional/hash.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace l1weaver {

using BigInt = boost::multiprecision::number<boost::multiprecision::cpp_int_backend<>,
                                              boost::multiprecision::et_off>;
using Rational =
    boost::multiprecision::number<boost::multiprecision::backends::rational_adaptor<
                                      boost::multiprecision::cpp_int_backend<>>,
                                  boost::multiprecision::et_off>;

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad user input (files, flags, malformed documents). CLI exit code 2.
struct InputError : Error {
    explicit InputError(const std::string& what) : Error(what) {}
};

/// A requested computation is out of the supported range (support blow-up,
/// missing level, unsafe query point). CLI exit code 2 as well.
struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error(what) {}
};

/// m^e for integer e (e may be negative).
inline Rational rational_pow(int base, int exp) {
    if (base <= 0) throw DomainError("rational_pow: base must be positive");
    BigInt p = 1;
    for (int k = 0; k < (exp < 0 ? -exp : exp); ++k) p *= base;
    return exp >= 0 ? Rational(p) : Rational(BigInt(1), p);
}

inline BigInt int_pow(int base, int exp) {
    BigInt p = 1;
    for (int k = 0; k < exp; ++k) p *= base;
    return p;
}

/// Canonical exact text form: "p" or "p/q" with q > 0.
inline std::string to_string(const Rational& r) {
    if (denominator(r) == 1) return numerator(r).str();
    return numerator(r).str() + "/" + denominator(r).str();
}

/// Parses "p" or "p/q". Anything else (including floating point) is rejected.
inline Rational parse_rational(const std::string& text) {
    auto bad = [&] { return InputError("not an exact rational: '" + text + "'"); };
    if (text.empty()) throw bad();
    auto slash = text.find('/');
    auto check_int = [&](const std::string& s) {
        if (s.empty()) throw bad();
        std::size_t start = (s[0] == '-' || s[0] == '+') ? 1 : 0;
        if (start == s.size()) throw bad();
        for (std::size_t i = start; i < s.size(); ++i)
            if (s[i] < '0' || s[i] > '9') throw bad();
    };
    try {
        if (slash == std::string::npos) {
            check_int(text);
            return Rational(BigInt(text));
        }
        std::string num = text.substr(0, slash), den = text.substr(slash + 1);
        check_int(num);
        check_int(den);
        BigInt q(den);
        if (q == 0) throw bad();
        return Rational(BigInt(num), q);
    } catch (const std::exception&) {
        throw bad();
    }
}

/// Largest integer n with n <= r.
inline BigInt rational_floor(const Rational& r) {
    BigInt q = numerator(r) / denominator(r);
    if (numerator(r) < 0 && q * denominator(r) != numerator(r)) --q;
    return q;
}

inline BigInt rational_ceil(const Rational& r) { return -rational_floor(-r); }

inline bool is_integer(const Rational& r) { return denominator(r) == 1; }

inline double to_double(const Rational& r) { return r.template convert_to<double>(); }

struct RationalHash {
    std::size_t operator()(const Rational& r) const {
        std::size_t seed = 0;
        boost::hash_combine(seed, hash_value(numerator(r)));
        boost::hash_combine(seed, hash_value(denominator(r)));
        return seed;
    }
};

}  // namespace l1weaver
