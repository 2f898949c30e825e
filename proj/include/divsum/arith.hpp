// Exact integer arithmetic for divisor-type weights on windows (N, 2N]:
// the generalized divisor function d_k, its localization to a box of
// integer intervals, and the divisor-concentration function (max number
// of divisors in any window (x, e*x]).
//
// All weights are exact non-negative integers; products of tuple
// coordinates are pruned against 2N before they can overflow.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <mpfr.h>

#include "divsum/intmath.hpp"

namespace divsum {

// Closed integer interval [lo, hi], or the distinguished "all positive
// integers" marker.  lo >= 1 always.
struct Interval {
    static constexpr u64 kNoUpper = std::numeric_limits<u64>::max();

    u64 lo{1};
    u64 hi{kNoUpper};

    static Interval all() { return Interval{1, kNoUpper}; }
    static Interval closed(u64 lo, u64 hi) { return Interval{lo, hi}; }

    bool is_all() const { return lo == 1 && hi == kNoUpper; }
    bool contains(u64 v) const { return v >= lo && v <= hi; }
};

// The box I_1 x ... x I_{k-1} localizing the first k-1 divisors of an
// order-k divisor function.
class IntervalBox {
public:
    IntervalBox(int k, std::vector<Interval> intervals)
        : k_(k), intervals_(std::move(intervals)) {
        if (k_ < 2) throw std::domain_error("IntervalBox: k must be >= 2");
        if (intervals_.size() != static_cast<size_t>(k_ - 1))
            throw std::domain_error("IntervalBox: need exactly k-1 intervals");
        for (const Interval& iv : intervals_) {
            if (iv.lo < 1 || iv.lo > iv.hi)
                throw std::domain_error("IntervalBox: interval must satisfy 1 <= lo <= hi");
        }
    }

    static IntervalBox full(int k) {
        if (k < 2) throw std::domain_error("IntervalBox: k must be >= 2");
        return IntervalBox(k, std::vector<Interval>(k - 1, Interval::all()));
    }

    int k() const { return k_; }
    const std::vector<Interval>& intervals() const { return intervals_; }
    // coordinate j in [1, k-1]
    const Interval& interval(int j) const { return intervals_.at(j - 1); }

    bool is_full() const {
        return std::all_of(intervals_.begin(), intervals_.end(),
                           [](const Interval& iv) { return iv.is_all(); });
    }

    // "lo:hi,*,lo:hi" -- the CLI/report syntax, '*' marks an unbounded factor.
    std::string describe() const {
        std::string s;
        for (size_t i = 0; i < intervals_.size(); ++i) {
            if (i) s += ',';
            if (intervals_[i].is_all()) s += '*';
            else s += std::to_string(intervals_[i].lo) + ":" + std::to_string(intervals_[i].hi);
        }
        return s;
    }

    static IntervalBox parse(const std::string& text);

private:
    int k_;
    std::vector<Interval> intervals_;
};

inline IntervalBox IntervalBox::parse(const std::string& text) {
    std::vector<Interval> ivs;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (part.empty()) throw std::invalid_argument("box: empty interval in '" + text + "'");
        if (part == "*") {
            ivs.push_back(Interval::all());
        } else {
            size_t colon = part.find(':');
            if (colon == std::string::npos)
                throw std::invalid_argument("box: expected 'lo:hi' or '*', got '" + part + "'");
            u64 lo = std::stoull(part.substr(0, colon));
            u64 hi = std::stoull(part.substr(colon + 1));
            ivs.push_back(Interval::closed(lo, hi));
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    const int k = static_cast<int>(ivs.size()) + 1;
    return IntervalBox(k, std::move(ivs));
}

// The window (N, 2N] of integers; element i (0-based) is N+1+i.
struct Window {
    u64 N;

    explicit Window(u64 n) : N(n) {
        if (N < 1) throw std::domain_error("Window: N must be >= 1");
        if (N > (std::numeric_limits<u64>::max() - 1) / 2)
            throw std::range_error("Window: 2N overflows");
    }

    u64 size() const { return N; }
    u64 first() const { return N + 1; }
    u64 last() const { return 2 * N; }
    bool contains(u64 n) const { return n > N && n <= 2 * N; }
    u64 element(u64 i) const { return N + 1 + i; }
    u64 index_of(u64 n) const { return n - N - 1; }
};

// A window together with one non-negative integer weight per element.
class WeightedWindow {
public:
    explicit WeightedWindow(Window w) : win_(w), weights_(w.size(), 0) {}

    WeightedWindow(Window w, std::vector<u64> weights)
        : win_(w), weights_(std::move(weights)) {
        if (weights_.size() != win_.size())
            throw std::domain_error("WeightedWindow: need exactly N weights");
    }

    const Window& window() const { return win_; }
    u64 N() const { return win_.N; }

    u64 weight(u64 n) const {
        if (!win_.contains(n)) throw std::domain_error("WeightedWindow: element outside (N,2N]");
        return weights_[win_.index_of(n)];
    }
    u64& weight_ref(u64 n) { return weights_[win_.index_of(n)]; }

    std::span<const u64> weights() const { return weights_; }
    std::span<u64> weights_mut() { return weights_; }

    u64 total_weight() const {
        u64 s = 0;
        for (u64 w : weights_) {
            if (w > std::numeric_limits<u64>::max() - s)
                throw std::range_error("WeightedWindow: total weight overflows");
            s += w;
        }
        return s;
    }

    bool operator==(const WeightedWindow& o) const {
        return win_.N == o.win_.N && weights_ == o.weights_;
    }

private:
    Window win_;
    std::vector<u64> weights_;
};

// All divisors of n in increasing order.  Trial division up to sqrt(n).
inline std::vector<u64> divisor_list(u64 n) {
    if (n == 0) throw std::domain_error("divisor_list: n must be >= 1");
    std::vector<u64> small, large;
    for (u64 d = 1; d <= n / d; ++d) {
        if (n % d == 0) {
            small.push_back(d);
            if (d != n / d) large.push_back(n / d);
        }
    }
    small.insert(small.end(), large.rbegin(), large.rend());
    return small;
}

namespace detail {

// Enumerate tuples (n_1,...,n_m) with n_j in ivs[j], product <= 2N,
// lexicographically with product pruning; add +1 at every multiple of the
// product inside (N, 2N].  m = 0 contributes the empty product 1.
inline void add_box_tuples(WeightedWindow& w, std::span<const Interval> ivs,
                           size_t j, u64 prod) {
    const u64 N = w.N();
    const u64 twoN = 2 * N;
    if (j == ivs.size()) {
        u64* wp = w.weights_mut().data();
        for (u64 m = N / prod + 1, e = twoN / prod; m <= e; ++m)
            ++wp[m * prod - N - 1];
        return;
    }
    const Interval& iv = ivs[j];
    u64 cap = twoN / prod;          // keeps prod * v <= 2N, no overflow possible
    if (iv.lo > cap) return;
    u64 hi = std::min(iv.hi, cap);
    for (u64 v = iv.lo; v <= hi; ++v)
        add_box_tuples(w, ivs, j + 1, prod * v);
}

} // namespace detail

// Weight at n = number of (k-1)-tuples in the box whose product divides n,
// for every n in (N, 2N].  Enumerates box tuples with product <= 2N and
// increments their multiples; cost is sum over products P of (1 + N/P).
inline WeightedWindow sieve_localized(u64 N, const IntervalBox& box) {
    WeightedWindow w{Window(N)};
    detail::add_box_tuples(w, box.intervals(), 0, 1);
    return w;
}

// Weight at n = d_k(n), the number of ordered k-tuples with product n,
// for every n in (N, 2N].  Same segmented increment scheme as the
// localized sieve with every factor unrestricted; d_k(n) equals the number
// of (k-1)-tuples whose product divides n, the k-th factor being the
// cofactor.
inline WeightedWindow sieve_dk(u64 N, int k) {
    if (k < 1) throw std::domain_error("sieve_dk: k must be >= 1");
    if (k > 63) throw std::range_error("sieve_dk: k out of supported range");
    WeightedWindow w{Window(N)};
    std::vector<Interval> ivs(static_cast<size_t>(k - 1), Interval::all());
    detail::add_box_tuples(w, ivs, 0, 1);
    return w;
}

namespace detail {

// Decide dj <= e * di exactly.  Divisor ratios can never equal e, so the
// comparison is always decidable; the long double path settles everything
// except ratios within 1e-9 of e, which fall back to comparing
// ln(dj) - ln(di) against 1 with MPFR directed rounding (256 bits and up,
// beyond the 50 digits the guard requires).
inline bool ratio_le_e_exact(u64 dj, u64 di) {
    for (mpfr_prec_t prec = 256;; prec *= 2) {
        mpfr_t lj_lo, lj_hi, li_lo, li_hi;
        mpfr_inits2(prec, lj_lo, lj_hi, li_lo, li_hi, static_cast<mpfr_ptr>(nullptr));
        mpfr_set_ui(lj_lo, static_cast<unsigned long>(dj), MPFR_RNDD);
        mpfr_set_ui(lj_hi, static_cast<unsigned long>(dj), MPFR_RNDU);
        mpfr_set_ui(li_lo, static_cast<unsigned long>(di), MPFR_RNDD);
        mpfr_set_ui(li_hi, static_cast<unsigned long>(di), MPFR_RNDU);
        mpfr_log(lj_lo, lj_lo, MPFR_RNDD);
        mpfr_log(lj_hi, lj_hi, MPFR_RNDU);
        mpfr_log(li_lo, li_lo, MPFR_RNDD);
        mpfr_log(li_hi, li_hi, MPFR_RNDU);
        mpfr_sub(lj_lo, lj_lo, li_hi, MPFR_RNDD);   // lower bound of ln dj - ln di
        mpfr_sub(lj_hi, lj_hi, li_lo, MPFR_RNDU);   // upper bound
        int hi_cmp = mpfr_cmp_ui(lj_hi, 1);
        int lo_cmp = mpfr_cmp_ui(lj_lo, 1);
        mpfr_clears(lj_lo, lj_hi, li_lo, li_hi, static_cast<mpfr_ptr>(nullptr));
        if (hi_cmp < 0) return true;    // ln ratio certainly < 1
        if (lo_cmp > 0) return false;   // certainly > 1
        if (prec > 1u << 16) throw std::logic_error("ratio_le_e_exact: undecidable");
    }
}

inline bool ratio_le_e(u64 dj, u64 di) {
    constexpr long double kE = 2.718281828459045235360287471352662498L;
    long double rhs = kE * static_cast<long double>(di);
    long double lhs = static_cast<long double>(dj);
    long double diff = rhs - lhs;
    if (fabsl(diff) >= 1e-9L * static_cast<long double>(dj)) return diff > 0;
    return ratio_le_e_exact(dj, di);
}

} // namespace detail

// Maximum number of divisors of n in any window (x, e*x]: slide the window
// start just below each divisor and count divisors d' with d' <= e*d.
// Two-pointer over the sorted divisor list.
inline u64 hooley_delta(u64 n) {
    if (n == 0) throw std::domain_error("hooley_delta: n must be >= 1");
    std::vector<u64> div = divisor_list(n);
    u64 best = 1;
    size_t j = 0;
    for (size_t i = 0; i < div.size(); ++i) {
        if (j < i) j = i;
        while (j + 1 < div.size() && detail::ratio_le_e(div[j + 1], div[i])) ++j;
        best = std::max(best, static_cast<u64>(j - i + 1));
    }
    return best;
}

} // namespace divsum
