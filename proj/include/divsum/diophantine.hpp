// Rational approximation and modular arithmetic: distance to the nearest
// integer, continued-fraction convergents, Dirichlet approximation
// witnesses, modular inverses, residue norms and Farey grids.
//
// Everything rational is exact; real inputs are carried at native double
// precision and their continued fractions stop once the remainder drops
// below 2^-40.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "divsum/intmath.hpp"

namespace divsum {

// Reduced fraction a/q with 0 <= a < q, gcd(a,q) = 1.  Value lies in [0,1).
struct ReducedFraction {
    u64 a{0};
    u64 q{1};

    ReducedFraction() = default;
    ReducedFraction(u64 num, u64 den) {
        if (den == 0) throw std::domain_error("ReducedFraction: q must be >= 1");
        num %= den;
        u64 g = std::gcd(num, den);
        if (num == 0) { a = 0; q = 1; }
        else { a = num / g; q = den / g; }
    }

    double value() const { return static_cast<double>(a) / static_cast<double>(q); }

    std::string str() const { return std::to_string(a) + "/" + std::to_string(q); }

    static ReducedFraction parse(const std::string& s) {
        size_t slash = s.find('/');
        if (slash == std::string::npos)
            throw std::invalid_argument("ReducedFraction: expected 'a/q', got '" + s + "'");
        u64 num = std::stoull(s.substr(0, slash));
        u64 den = std::stoull(s.substr(slash + 1));
        return ReducedFraction(num, den);
    }

    bool operator==(const ReducedFraction& o) const { return a == o.a && q == o.q; }

    // exact value comparison
    static bool value_less(const ReducedFraction& x, const ReducedFraction& y) {
        return static_cast<u128>(x.a) * y.q < static_cast<u128>(y.a) * x.q;
    }
};

// ||x||: distance from x to the nearest integer, in [0, 1/2].
inline double dist_to_nearest_int(double x) {
    if (!std::isfinite(x)) throw std::domain_error("dist_to_nearest_int: x must be finite");
    double f = x - std::floor(x);
    if (f >= 1.0) f = 0.0;          // rounding at the seam
    return std::min(f, 1.0 - f);
}

inline long double dist_to_nearest_int_l(long double x) {
    long double f = x - floorl(x);
    if (f >= 1.0L) f = 0.0L;
    return std::min(f, 1.0L - f);
}

// An admissible rational point for a real phase: |alpha - a/q| <= 1/q^2.
// The error is measured as distance on R/Z so that fractions near 1 reduce
// to their circle representative 0/1.
struct ApproxWitness {
    ReducedFraction fraction;
    double alpha{0.0};
    double error{0.0};
    double bound{1.0};

    ApproxWitness() = default;
    ApproxWitness(ReducedFraction f, double al, double err)
        : fraction(f), alpha(al), error(err),
          bound(1.0 / (static_cast<double>(f.q) * static_cast<double>(f.q))) {
        if (error > bound)
            throw std::domain_error("ApproxWitness: error exceeds 1/q^2");
    }
};

namespace detail {

// Shared continued-fraction walk.  Emits every convergent p_i/q_i with
// q_i <= max_q as its circle representative (p mod q)/q; the convergent 1/1
// coincides with 0/1 and is not emitted twice.  `digits` supplies partial
// quotients a_1, a_2, ... until exhausted.
template <typename DigitSource>
std::vector<ReducedFraction> cf_convergents(DigitSource next_digit, u64 max_q) {
    std::vector<ReducedFraction> out;
    out.push_back(ReducedFraction(0, 1));   // a_0 = 0 for alpha in (0,1)
    u64 p_prev = 1, q_prev = 0;             // p_{-1}/q_{-1}
    u64 p_cur = 0, q_cur = 1;
    u64 a;
    while (next_digit(a)) {
        if (a == 0) break;
        if (q_cur > (std::numeric_limits<u64>::max() - q_prev) / a) break;
        u64 p_next = a * p_cur + p_prev;
        u64 q_next = a * q_cur + q_prev;
        if (q_next > max_q) break;
        if (!(p_next == 1 && q_next == 1)) {
            ReducedFraction f;
            f.a = p_next % q_next;          // convergents are already reduced
            f.q = q_next;
            out.push_back(f);
        }
        p_prev = p_cur; q_prev = q_cur;
        p_cur = p_next; q_cur = q_next;
    }
    return out;
}

} // namespace detail

// Continued-fraction convergents of alpha in (0,1) with denominator <= max_q,
// in increasing-denominator order.  Each satisfies |alpha - p/q| < 1/q^2.
inline std::vector<ReducedFraction> convergents(double alpha, u64 max_q) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("convergents: alpha must lie in (0,1)");
    if (max_q < 1) throw std::domain_error("convergents: max_q must be >= 1");
    long double y = static_cast<long double>(alpha);
    const long double cutoff = ldexpl(1.0L, -40);
    auto digits = [&y, cutoff](u64& a) -> bool {
        if (y < cutoff) return false;
        long double z = 1.0L / y;
        long double fl = floorl(z);
        if (fl >= 0x1p62L) return false;
        a = static_cast<u64>(fl);
        y = z - fl;
        return true;
    };
    return detail::cf_convergents(digits, max_q);
}

// Exact variant: the expansion of a rational terminates at the fraction itself.
inline std::vector<ReducedFraction> convergents(const ReducedFraction& alpha, u64 max_q) {
    if (alpha.a == 0) throw std::domain_error("convergents: alpha must lie in (0,1)");
    u64 num = alpha.q, den = alpha.a;   // partial quotients of a/q: floor(q/a), ...
    auto digits = [&num, &den](u64& a) -> bool {
        if (den == 0) return false;
        a = num / den;
        u64 r = num % den;
        num = den; den = r;
        return true;
    };
    return detail::cf_convergents(digits, max_q);
}

// Dirichlet witness: a/q with q <= Q and |alpha - a/q| <= 1/(q(Q+1)) <= 1/q^2
// on the circle.  The last convergent with denominator <= Q realizes the bound.
inline ApproxWitness dirichlet_approx(double alpha, u64 Q) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("dirichlet_approx: alpha must lie in (0,1)");
    if (Q < 1) throw std::domain_error("dirichlet_approx: Q must be >= 1");
    std::vector<ReducedFraction> cs = convergents(alpha, Q);
    ReducedFraction best = cs.back();
    double err = dist_to_nearest_int(alpha - best.value());
    return ApproxWitness(best, alpha, err);
}

// Inverse of a modulo q, in [1, q-1].  Extended Euclid.
inline u64 mod_inverse(u64 a, u64 q) {
    if (q < 2) throw std::domain_error("mod_inverse: q must be >= 2");
    a %= q;
    i64 old_r = static_cast<i64>(q), r = static_cast<i64>(a);
    i64 old_s = 0, s = 1;
    while (r != 0) {
        i64 quo = old_r / r;
        i64 tmp = old_r - quo * r; old_r = r; r = tmp;
        tmp = old_s - quo * s; old_s = s; s = tmp;
    }
    if (old_r != 1) throw std::domain_error("mod_inverse: a is not invertible mod q");
    i64 inv = old_s % static_cast<i64>(q);
    if (inv < 0) inv += static_cast<i64>(q);
    return static_cast<u64>(inv);
}

// r in [0, q/2] with ||t * a/q|| = r/q exactly; t is congruent to +r*ainv or
// -r*ainv mod q.  Ties at q/2 take r = q/2.
inline u64 residue_norm(u64 t, const ReducedFraction& frac) {
    if (frac.q < 2) throw std::domain_error("residue_norm: q must be >= 2");
    u64 m = mulmod(t % frac.q, frac.a, frac.q);
    return std::min(m, frac.q - m);
}

// All reduced fractions a/q with 2 <= q <= Q, 0 < a < q, sorted by value.
inline std::vector<ReducedFraction> farey_grid(u64 Q) {
    if (Q < 2) throw std::domain_error("farey_grid: Q must be >= 2");
    std::vector<ReducedFraction> out;
    for (u64 q = 2; q <= Q; ++q)
        for (u64 a = 1; a < q; ++a)
            if (std::gcd(a, q) == 1) {
                ReducedFraction f; f.a = a; f.q = q;
                out.push_back(f);
            }
    std::sort(out.begin(), out.end(), ReducedFraction::value_less);
    return out;
}

} // namespace divsum
