// Integer helpers shared across the library: 128-bit intermediates,
// exact k-th roots, overflow-checked powers, modular products.
#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace divsum {

using u64 = std::uint64_t;
using i64 = std::int64_t;
using u128 = unsigned __int128;
using i128 = __int128_t;

namespace detail {

// x^k <= limit, evaluated without overflow.
inline bool pow_leq(u64 x, int k, u64 limit) {
    u128 p = 1;
    for (int i = 0; i < k; ++i) {
        p *= x;
        if (p > limit) return false;
    }
    return true;
}

} // namespace detail

// Largest x >= 1 with x^k <= n.  Binary search; never touches floating point,
// an off-by-one here silently breaks the decomposition split.
inline u64 kth_root_floor(u64 n, int k) {
    if (n == 0 || k <= 0) throw std::domain_error("kth_root_floor: need n >= 1, k >= 1");
    if (k == 1) return n;
    u64 lo = 1, hi = 2;
    while (detail::pow_leq(hi, k, n)) { lo = hi; hi *= 2; }
    // invariant: lo^k <= n < hi^k
    while (hi - lo > 1) {
        u64 mid = lo + (hi - lo) / 2;
        if (detail::pow_leq(mid, k, n)) lo = mid;
        else hi = mid;
    }
    return lo;
}

// Largest x with x^2 <= n.
inline u64 isqrt(u64 n) { return n == 0 ? 0 : kth_root_floor(n, 2); }

// (a * b) mod m for full 64-bit operands.
inline u64 mulmod(u64 a, u64 b, u64 m) {
    return static_cast<u64>((static_cast<u128>(a) * b) % m);
}

// q^k saturated to u128 max on overflow (enough headroom for regime tests).
inline u128 pow_u128_saturated(u64 x, int k) {
    u128 p = 1;
    const u128 cap = ~static_cast<u128>(0);
    for (int i = 0; i < k; ++i) {
        if (x != 0 && p > cap / x) return cap;
        p *= x;
    }
    return p;
}

} // namespace divsum
