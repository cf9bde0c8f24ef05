#pragma once

// Exact rational scalar type and small helpers shared by the whole library.
// All measures, cell sizes and polytope coordinates are bm::Rat; floating
// point only enters where a d-th root or a fitted coefficient is inherently
// irrational, and such values never feed back into an exact assertion.

#include <boost/multiprecision/cpp_int.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bm {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

enum class Errc {
    capacity,     // lattice coordinate or bitmap size limit exceeded
    dimension,    // dimension mismatch or unsupported dimension
    empty_input,  // operation undefined on the empty set
    contract,     // precondition violated (caller error)
    degenerate,   // degenerate geometry (zero volume, collinear data)
    io,           // parse / format / version problems
};

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    Errc code() const { return code_; }

private:
    Errc code_;
};

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

inline Rat rat_abs(const Rat& r) { return r < 0 ? Rat(-r) : r; }

inline Rat rat_pow(const Rat& base, int exp) {
    if (exp < 0) {
        if (base == 0) throw Error(Errc::contract, "rat_pow: zero base with negative exponent");
        return Rat(1) / rat_pow(base, -exp);
    }
    Rat out = 1;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

// Nearest rational with the given power-of-two denominator. Used when an
// irrational scale (d-th root, fitted slope) must become an exact affine map.
inline Rat rationalize(double x, std::int64_t denom = (std::int64_t{1} << 26)) {
    if (!std::isfinite(x)) throw Error(Errc::contract, "rationalize: non-finite value");
    const double scaled = x * static_cast<double>(denom);
    if (std::abs(scaled) > 9.0e18) throw Error(Errc::capacity, "rationalize: value too large");
    return Rat(Int(static_cast<std::int64_t>(std::llround(scaled))), Int(denom));
}

// d-th root of a nonnegative rational, in double precision.
inline double root_d(const Rat& r, int d) {
    if (r < 0) throw Error(Errc::contract, "root_d: negative radicand");
    if (d == 1) return to_double(r);
    return std::pow(to_double(r), 1.0 / static_cast<double>(d));
}

// Parses "p", "-p", or "p/q" with q > 0.
inline Rat parse_rat(const std::string& text) {
    const auto slash = text.find('/');
    try {
        if (slash == std::string::npos) return Rat(Int(text));
        Int num(text.substr(0, slash));
        Int den(text.substr(slash + 1));
        if (den <= 0) throw Error(Errc::io, "rational denominator must be positive: " + text);
        return Rat(num, den);
    } catch (const std::runtime_error&) {
        throw Error(Errc::io, "malformed rational: '" + text + "'");
    }
}

inline std::string rat_str(const Rat& r) {
    const Int num = numerator(r);
    const Int den = denominator(r);
    if (den == 1) return num.str();
    return num.str() + "/" + den.str();
}

}  // namespace bm
