#pragma once

// Fixed-point coordinates for deep-scale grid counting.
//
// A Fixed96 stores a value in [0,1] as an integer mantissa with a fixed
// base-2 exponent of -96, i.e. value = mantissa / 2^96.  Grid counting at
// scale r compares integer cell indices floor(mantissa / r.mantissa), so
// two points land in the same cell iff their exact fixed-point values do.
// 96 bits comfortably separates the deepest configurations we instrument
// (cell side ~2^-66, point gaps ~2^-65).

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace boxlab {

using u128 = unsigned __int128;

namespace detail {

// 256-bit unsigned value as two 128-bit limbs.
struct U256 {
    u128 hi = 0;
    u128 lo = 0;
};

inline U256 mul_u128(u128 a, u128 b) {
    const u128 mask = (u128{1} << 64) - 1;
    u128 a0 = a & mask, a1 = a >> 64;
    u128 b0 = b & mask, b1 = b >> 64;
    u128 p00 = a0 * b0;
    u128 p01 = a0 * b1;
    u128 p10 = a1 * b0;
    u128 p11 = a1 * b1;
    u128 mid = p01 + p10;
    u128 mid_carry = (mid < p01) ? (u128{1} << 64) : 0;
    u128 lo = p00 + (mid << 64);
    u128 lo_carry = (lo < p00) ? 1 : 0;
    U256 out;
    out.lo = lo;
    out.hi = p11 + (mid >> 64) + mid_carry + lo_carry;
    return out;
}

// a + b, reporting overflow past 256 bits.
inline bool add_u256(const U256& a, const U256& b, U256* out) {
    out->lo = a.lo + b.lo;
    u128 carry = (out->lo < a.lo) ? 1 : 0;
    out->hi = a.hi + b.hi + carry;
    return out->hi < a.hi || (carry && out->hi == a.hi && b.hi == ~u128{0});
}

inline int cmp_u256(const U256& a, const U256& b) {
    if (a.hi != b.hi) return a.hi < b.hi ? -1 : 1;
    if (a.lo != b.lo) return a.lo < b.lo ? -1 : 1;
    return 0;
}

// Shift left by k in [0,128), reporting overflow.
inline bool shl_u256(const U256& a, int k, U256* out) {
    if (k == 0) { *out = a; return false; }
    bool overflow = (a.hi >> (128 - k)) != 0;
    out->hi = (a.hi << k) | (a.lo >> (128 - k));
    out->lo = a.lo << k;
    return overflow;
}

}  // namespace detail

struct Fixed96 {
    static constexpr int kFracBits = 96;
    u128 m = 0;  // value = m / 2^96, m in [0, 2^96]

    static constexpr u128 one_raw() { return u128{1} << kFracBits; }

    static Fixed96 zero() { return Fixed96{0}; }
    static Fixed96 one() { return Fixed96{one_raw()}; }

    static Fixed96 from_raw(u128 raw) { return Fixed96{raw}; }

    static Fixed96 from_double(double x) {
        if (!(x >= 0.0) || x > 1.0 + 1e-12)
            throw std::invalid_argument("coordinate outside [0,1]");
        if (x >= 1.0) return one();
        // ldexp(x,96) < 2^96 is exactly convertible once truncated.
        long double scaled = std::ldexp(static_cast<long double>(x), kFracBits);
        u128 raw = static_cast<u128>(scaled);
        if (raw > one_raw()) raw = one_raw();
        return Fixed96{raw};
    }

    // floor(num * 2^96 / den), exact; requires num <= den.
    static Fixed96 from_rational(std::uint64_t num, std::uint64_t den) {
        if (den == 0 || num > den)
            throw std::invalid_argument("rational coordinate outside [0,1]");
        u128 q = num / den;
        u128 rem = num % den;
        for (int i = 0; i < 3; ++i) {
            rem <<= 32;
            q = (q << 32) | static_cast<u128>(rem / den);
            rem %= den;
        }
        return Fixed96{q};
    }

    // 2^-k, exact for 0 <= k <= 96.
    static Fixed96 from_pow2(int k) {
        if (k < 0 || k > kFracBits)
            throw std::invalid_argument("pow2 scale outside fixed-point range");
        return Fixed96{u128{1} << (kFracBits - k)};
    }

    // Largest representable x with x^2 + b*x <= 1, i.e. floor(2^96 * x*)
    // where x* solves x = 1/(b + x).  Exact via 256-bit integer tests.
    static Fixed96 gauss_fixed_point(std::uint64_t b) {
        if (b == 0) throw std::invalid_argument("digit must be positive");
        auto admissible = [&](u128 cand) -> bool {
            using namespace detail;
            U256 sq = mul_u128(cand, cand);
            U256 lin = mul_u128(static_cast<u128>(b), cand);
            U256 lin_shift;
            if (shl_u256(lin, kFracBits - 64, &lin_shift)) return false;
            U256 lin_shift2;
            if (shl_u256(lin_shift, 64, &lin_shift2)) return false;
            U256 sum;
            if (add_u256(sq, lin_shift2, &sum)) return false;
            U256 limit{u128{1} << 64, 0};  // 2^192
            return cmp_u256(sum, limit) <= 0;
        };
        // Double seed is good to ~2^43 mantissa units; bracket around it and
        // finish with exact binary search.
        double approx = 2.0 / (static_cast<double>(b) +
                               std::sqrt(static_cast<double>(b) * static_cast<double>(b) + 4.0));
        u128 cand = from_double(approx).m;
        const u128 slack = u128{1} << 45;
        u128 lo = cand > slack ? cand - slack : 0;
        u128 hi = cand + slack < one_raw() ? cand + slack : one_raw();
        if (!admissible(lo) || admissible(hi)) {
            lo = 0;
            hi = one_raw();
        }
        // invariant: admissible(lo), !admissible(hi)
        while (hi - lo > 1) {
            u128 mid = lo + (hi - lo) / 2;
            if (admissible(mid)) lo = mid; else hi = mid;
        }
        return Fixed96{lo};
    }

    double to_double() const {
        return static_cast<double>(std::ldexp(static_cast<long double>(m), -kFracBits));
    }

    bool operator==(const Fixed96& o) const { return m == o.m; }
    bool operator<(const Fixed96& o) const { return m < o.m; }
};

// Grid cell index at scale r (and optional anchor offset), as an exact
// integer.  offset shifts the anchor: cell k covers [k*r - off, (k+1)*r - off).
inline u128 cell_index(const Fixed96& x, const Fixed96& r, const Fixed96& offset = Fixed96::zero()) {
    if (r.m == 0) throw std::invalid_argument("scale out of range");
    return (x.m + offset.m) / r.m;
}

}  // namespace boxlab
