// Exponential sums over the window (N, 2N] weighted by localized divisor
// functions, evaluated two ways:
//
//   * direct summation of w(n) e(n alpha) with compensated accumulation and
//     exact phase indices for rational alpha;
//   * the k-way decomposition that splits every product tuple at the first
//     coordinate exceeding floor(N^{1/k}) and evaluates each inner range as
//     a closed-form geometric sum, touching only O(N^{1-1/k} polylog) terms.
//
// Plus the intermediate majorant k * sum_{t < 2N/N_k} d_{k-1}(t) min(N/t, 1/||t alpha||).
#pragma once

#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "divsum/arith.hpp"
#include "divsum/diophantine.hpp"
#include "divsum/intmath.hpp"

namespace divsum {

// A phase in [0,1): either an exact reduced rational a/q or a native double.
// The two forms take different arithmetic paths throughout; rational phases
// are reduced in integers and never lose precision.
class AlphaValue {
public:
    AlphaValue() = default;   // rational 0/1

    static AlphaValue from_fraction(const ReducedFraction& f) {
        AlphaValue v;
        v.rational_ = true;
        v.frac_ = f;
        return v;
    }
    static AlphaValue from_rational(u64 a, u64 q) { return from_fraction(ReducedFraction(a, q)); }

    static AlphaValue from_real(double x) {
        if (!std::isfinite(x)) throw std::domain_error("AlphaValue: real phase must be finite");
        double f = x - std::floor(x);
        if (f >= 1.0) f = 0.0;
        AlphaValue v;
        v.rational_ = false;
        v.x_ = f;
        return v;
    }

    // "a/q" -> rational, decimal literal -> real
    static AlphaValue parse(const std::string& s) {
        if (s.find('/') != std::string::npos)
            return from_fraction(ReducedFraction::parse(s));
        size_t used = 0;
        double x = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("alpha: cannot parse '" + s + "'");
        return from_real(x);
    }

    bool is_rational() const { return rational_; }
    const ReducedFraction& fraction() const {
        if (!rational_) throw std::logic_error("AlphaValue: not rational");
        return frac_;
    }
    u64 numerator() const { return fraction().a; }
    u64 denominator() const { return fraction().q; }

    double value() const { return rational_ ? frac_.value() : x_; }

    std::string str() const {
        if (rational_) return frac_.str();
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x_);
        return buf;
    }

private:
    bool rational_{true};
    ReducedFraction frac_{};
    double x_{0.0};
};

enum class SumMethod { direct, decomposed };

inline const char* method_name(SumMethod m) {
    return m == SumMethod::direct ? "direct" : "decomposed";
}

// Result of an exponential-sum evaluation.  `terms` follows the method:
// unit exponentials accumulated for `direct`, geometric sums evaluated for
// `decomposed`.  `unit_terms` always counts represented unit exponentials,
// so |value| <= unit_terms + err_budget either way.
struct ExpSumResult {
    std::complex<double> value{0.0, 0.0};
    SumMethod method{SumMethod::direct};
    u64 terms{0};
    u64 unit_terms{0};
    double err_budget{0.0};
    AlphaValue alpha{};

    double abs() const { return std::abs(value); }
};

namespace detail {

constexpr long double kTwoPiL = 6.283185307179586476925286766559005768L;
constexpr long double kPiL = 3.141592653589793238462643383279502884L;

// Neumaier-compensated accumulator; fixed insertion order makes results
// bit-reproducible.
struct Neumaier {
    double s{0.0}, c{0.0};
    void add(double x) {
        double t = s + x;
        if (std::fabs(s) >= std::fabs(x)) c += (s - t) + x;
        else c += (x - t) + s;
        s = t;
    }
    double get() const { return s + c; }
};

inline long double frac1l(long double x) {
    long double f = x - floorl(x);
    if (f < 0.0L) f += 1.0L;
    if (f >= 1.0L) f = 0.0L;
    return f;
}

// e(f) for f in [0,1)
inline std::complex<double> unit_from_frac(long double f) {
    long double ang = kTwoPiL * f;
    return {static_cast<double>(cosl(ang)), static_cast<double>(sinl(ang))};
}

// sin(pi x) for x in [0,2), sign included
inline long double sinpi02(long double x) {
    long double sign = 1.0L;
    if (x >= 1.0L) { x -= 1.0L; sign = -1.0L; }
    if (x > 0.5L) x = 1.0L - x;
    return sign * sinl(kPiL * x);
}

constexpr u64 kMaxRootTable = 1000000;

inline std::vector<std::complex<double>> root_table(u64 q) {
    std::vector<std::complex<double>> roots(q);
    for (u64 j = 0; j < q; ++j)
        roots[j] = unit_from_frac(static_cast<long double>(j) / static_cast<long double>(q));
    return roots;
}

// Tabulated phases for the closed-form geometric sum at a fixed rational
// alpha: roots2q[j] = e(j/(2q)), so its imaginary part is sin(pi j / q) and
// every quantity in the sin-ratio form becomes a lookup.  Arguments stay
// exact because everything is reduced mod 2q in integers first.
struct RationalGeomTable {
    u64 q{1};
    u64 a{0};
    u64 twoq{2};
    std::vector<std::complex<double>> roots2q;

    RationalGeomTable() = default;
    RationalGeomTable(u64 num, u64 den) : q(den), a(num), twoq(2 * den), roots2q(2 * den) {
        for (u64 j = 0; j < twoq; ++j)
            roots2q[j] = unit_from_frac(static_cast<long double>(j) / static_cast<long double>(twoq));
    }

    // sum over (A, B] of e((a/q) t m)
    std::complex<double> sum(u64 t, u64 A, u64 B) const {
        const u64 L = B - A;
        const u64 c = mulmod(t % q, a, q);
        if (c == 0) return {static_cast<double>(L), 0.0};
        const u64 lin = (2 * (A % twoq) + L % twoq + 1) % twoq;
        const u64 M = mulmod(c, lin, twoq);
        const u64 Lm = mulmod(c, L % twoq, twoq);
        const double num = roots2q[Lm].imag();
        const double den = roots2q[std::min(c, q - c)].imag();
        const double ratio = num / den;
        const std::complex<double>& ph = roots2q[M];
        return {ratio * ph.real(), ratio * ph.imag()};
    }
};

} // namespace detail

// Sum over (A, B] of e(alpha * t * m), in closed form.  ||t alpha|| = 0 gives
// B - A (decided exactly in integers for rational alpha); otherwise the
// sin-ratio form of e(beta(A+1)) (e(beta L) - 1)/(e(beta) - 1) with all phase
// arguments reduced mod 1 before exponentiation.  O(1) except for the
// near-singular real-alpha fallback.
inline std::complex<double> geometric_interval_sum(u64 t, const AlphaValue& alpha,
                                                   u64 A, u64 B) {
    if (A > B) throw std::invalid_argument("geometric_interval_sum: need A <= B");
    if (A == B) return {0.0, 0.0};
    const u64 L = B - A;

    if (alpha.is_rational()) {
        const u64 q = alpha.denominator();
        const u64 c = mulmod(t % q, alpha.numerator(), q);
        if (c == 0) return {static_cast<double>(L), 0.0};
        const u128 twoq = 2 * static_cast<u128>(q);
        // theta = c (2A + L + 1) / (2q) mod 1, as an integer residue mod 2q
        u128 lin = (2 * (static_cast<u128>(A) % twoq) + static_cast<u128>(L % twoq) + 1) % twoq;
        const u64 M = static_cast<u64>((static_cast<u128>(c) * lin) % twoq);
        const u64 Lm = static_cast<u64>((static_cast<u128>(c) * (L % twoq)) % twoq);
        long double num = detail::sinpi02(static_cast<long double>(Lm) / static_cast<long double>(q));
        long double den = sinl(detail::kPiL * static_cast<long double>(std::min(c, q - c)) /
                               static_cast<long double>(q));
        long double ratio = num / den;
        long double ang = detail::kPiL * static_cast<long double>(M) / static_cast<long double>(q);
        return {static_cast<double>(ratio * cosl(ang)), static_cast<double>(ratio * sinl(ang))};
    }

    const long double beta = detail::frac1l(static_cast<long double>(t) *
                                            static_cast<long double>(alpha.value()));
    const long double nrm = std::min(beta, 1.0L - beta);
    if (nrm == 0.0L) return {static_cast<double>(L), 0.0};
    if (nrm < 1e-12L) {
        // e(beta) - 1 is hopeless this close to an integer; sum the <= L terms.
        detail::Neumaier re, im;
        for (u64 m = A + 1; m <= B; ++m) {
            std::complex<double> z =
                detail::unit_from_frac(detail::frac1l(beta * static_cast<long double>(m)));
            re.add(z.real());
            im.add(z.imag());
        }
        return {re.get(), im.get()};
    }
    long double x1 = fmodl(beta * static_cast<long double>(L), 2.0L);
    long double u = 2.0L * static_cast<long double>(A) + static_cast<long double>(L) + 1.0L;
    long double theta = detail::frac1l(fmodl(beta * u, 2.0L) / 2.0L);
    long double ratio = detail::sinpi02(x1) / sinl(detail::kPiL * nrm);
    std::complex<double> ph = detail::unit_from_frac(theta);
    return {static_cast<double>(ratio * ph.real()), static_cast<double>(ratio * ph.imag())};
}

// S = sum over n in (N, 2N] of w(n) e(n alpha), by direct summation in index
// order.  Rational phases index a table of q-th roots of unity through
// n*a mod q kept in integers; real phases are reduced mod 1 in long double.
inline ExpSumResult exp_sum_direct(const WeightedWindow& w, const AlphaValue& alpha) {
    const u64 N = w.N();
    std::span<const u64> ws = w.weights();
    detail::Neumaier re, im;
    u64 total = 0;

    if (alpha.is_rational()) {
        const u64 q = alpha.denominator();
        const u64 a = alpha.numerator();
        u64 idx = mulmod((N + 1) % q, a, q);
        if (q <= detail::kMaxRootTable) {
            std::vector<std::complex<double>> roots = detail::root_table(q);
            for (u64 i = 0; i < N; ++i) {
                const u64 wi = ws[i];
                if (wi) {
                    const std::complex<double>& z = roots[idx];
                    const double dw = static_cast<double>(wi);
                    re.add(dw * z.real());
                    im.add(dw * z.imag());
                    total += wi;
                }
                idx += a;
                if (idx >= q) idx -= q;
            }
        } else {
            for (u64 i = 0; i < N; ++i) {
                const u64 wi = ws[i];
                if (wi) {
                    std::complex<double> z = detail::unit_from_frac(
                        static_cast<long double>(idx) / static_cast<long double>(q));
                    const double dw = static_cast<double>(wi);
                    re.add(dw * z.real());
                    im.add(dw * z.imag());
                    total += wi;
                }
                idx += a;
                if (idx >= q) idx -= q;
            }
        }
    } else {
        const long double x = static_cast<long double>(alpha.value());
        for (u64 i = 0; i < N; ++i) {
            const u64 wi = ws[i];
            if (!wi) continue;
            const u64 n = N + 1 + i;
            std::complex<double> z =
                detail::unit_from_frac(detail::frac1l(static_cast<long double>(n) * x));
            const double dw = static_cast<double>(wi);
            re.add(dw * z.real());
            im.add(dw * z.imag());
            total += wi;
        }
    }

    ExpSumResult r;
    r.value = {re.get(), im.get()};
    r.method = SumMethod::direct;
    r.terms = total;
    r.unit_terms = total;
    r.err_budget = 8.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(total);
    r.alpha = alpha;
    return r;
}

// Per-branch bookkeeping of the decomposition; the branch unit counts must
// add up to sum of the window weights (the branches partition the tuples).
struct DecomposeStats {
    u64 geometric_sums{0};
    u64 unit_terms{0};
    std::vector<u64> branch_unit_terms;
    std::vector<u64> branch_geometric_sums;
};

namespace detail {

struct DecomposeWalk {
    u64 N, twoN, Nk, Tmax;
    int k, j;
    const IntervalBox* box;
    const AlphaValue* alpha;
    const RationalGeomTable* table{nullptr};
    std::vector<int> slots;     // outer coordinates, increasing
    Neumaier re, im;
    DecomposeStats stats;

    void leaf(u64 t) {
        u64 A = std::max(Nk, N / t);
        u64 B = twoN / t;
        if (j <= k - 1) {
            const Interval& iv = box->interval(j);
            A = std::max(A, iv.lo - 1);
            B = std::min(B, iv.hi);
        }
        if (B <= A) return;
        std::complex<double> g =
            table ? table->sum(t, A, B) : geometric_interval_sum(t, *alpha, A, B);
        re.add(g.real());
        im.add(g.imag());
        ++stats.geometric_sums;
        ++stats.branch_geometric_sums[j - 1];
        stats.unit_terms += B - A;
        stats.branch_unit_terms[j - 1] += B - A;
    }

    void dfs(size_t si, u64 t) {
        if (si == slots.size()) { leaf(t); return; }
        const int coord = slots[si];
        u64 lo = 1;
        u64 hi = Tmax / t;                   // keeps the outer product below 2N/N_k
        if (coord <= k - 1) {
            const Interval& iv = box->interval(coord);
            lo = std::max(lo, iv.lo);
            hi = std::min(hi, iv.hi);
        }
        if (coord < j) hi = std::min(hi, Nk);
        for (u64 v = lo; v <= hi; ++v) dfs(si + 1, t * v);
    }
};

} // namespace detail

// S_k(alpha, N) by the k-way split: branch j covers the tuples whose first
// coordinate above N_k = floor(N^{1/k}) is the j-th.  For each branch the
// remaining k-1 coordinates are enumerated depth-first (coordinates before j
// capped at N_k, the k-th coordinate a free cofactor) with the outer product
// pruned below 2N/N_k, and the inner coordinate, restricted to its box
// interval and to (max(N_k, N/t), 2N/t], is one geometric sum.
inline ExpSumResult exp_sum_decomposed(u64 N, const IntervalBox& box,
                                       const AlphaValue& alpha,
                                       DecomposeStats* stats_out = nullptr) {
    Window win(N);                           // validates N >= 1 and 2N range
    const int k = box.k();

    detail::DecomposeWalk walk;
    walk.N = N;
    walk.twoN = win.last();
    walk.Nk = kth_root_floor(N, k);
    walk.Tmax = (2 * N - 1) / walk.Nk;       // t <= Tmax  <=>  t * N_k < 2N
    walk.k = k;
    walk.box = &box;
    walk.alpha = &alpha;
    walk.stats.branch_unit_terms.assign(k, 0);
    walk.stats.branch_geometric_sums.assign(k, 0);

    detail::RationalGeomTable table;
    if (alpha.is_rational() && alpha.denominator() <= detail::kMaxRootTable) {
        table = detail::RationalGeomTable(alpha.numerator(), alpha.denominator());
        walk.table = &table;
    }

    for (int j = 1; j <= k; ++j) {
        walk.j = j;
        walk.slots.clear();
        for (int i = 1; i <= k; ++i)
            if (i != j) walk.slots.push_back(i);
        walk.dfs(0, 1);
    }

    ExpSumResult r;
    r.value = {walk.re.get(), walk.im.get()};
    r.method = SumMethod::decomposed;
    r.terms = walk.stats.geometric_sums;
    r.unit_terms = walk.stats.unit_terms;
    r.err_budget =
        8.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(walk.stats.unit_terms);
    r.alpha = alpha;
    if (stats_out) *stats_out = walk.stats;
    return r;
}

namespace detail {

// d_k(t) for t in [1, M], by repeated divisor convolution of the all-ones
// function; index 0 unused.
inline std::vector<u64> dk_prefix(u64 M, int k) {
    std::vector<u64> cur(M + 1, 1);
    cur[0] = 0;
    for (int level = 2; level <= k; ++level) {
        std::vector<u64> nxt(M + 1, 0);
        for (u64 d = 1; d <= M; ++d) {
            const u64 v = cur[d];
            if (!v) continue;
            for (u64 m = d; m <= M; m += d) nxt[m] += v;
        }
        cur.swap(nxt);
    }
    return cur;
}

// dtab[t] = d_{k-1}(t) for t <= Tmax = dtab.size() - 1.
inline double chain_bound_with_table(std::span<const u64> dtab, u64 N, int k,
                                     const AlphaValue& alpha) {
    const u64 Tmax = dtab.size() - 1;
    double sum = 0.0;
    if (alpha.is_rational()) {
        const u64 q = alpha.denominator();
        const u64 a = alpha.numerator();
        u64 ridx = 0;
        for (u64 t = 1; t <= Tmax; ++t) {
            ridx += a;
            if (ridx >= q) ridx -= q;
            const u64 r = std::min(ridx, q - ridx);
            const double nt = static_cast<double>(N) / static_cast<double>(t);
            const double term =
                (r == 0) ? nt : std::min(nt, static_cast<double>(q) / static_cast<double>(r));
            sum += static_cast<double>(dtab[t]) * term;
        }
    } else {
        const long double x = static_cast<long double>(alpha.value());
        for (u64 t = 1; t <= Tmax; ++t) {
            const long double nrm = dist_to_nearest_int_l(static_cast<long double>(t) * x);
            const double nt = static_cast<double>(N) / static_cast<double>(t);
            const double term =
                (nrm == 0.0L) ? nt : std::min(nt, static_cast<double>(1.0L / nrm));
            sum += static_cast<double>(dtab[t]) * term;
        }
    }
    return static_cast<double>(k) * sum;
}

} // namespace detail

// T = k * sum_{t < 2N/N_k} d_{k-1}(t) min(N/t, 1/||t alpha||), with
// min(N/t, 1/0) read as N/t.  ||t alpha|| is decided exactly in integers for
// rational alpha.
inline double chain_bound(u64 N, int k, const AlphaValue& alpha) {
    if (k < 2) throw std::domain_error("chain_bound: k must be >= 2");
    Window win(N);
    const u64 Nk = kth_root_floor(N, k);
    const u64 Tmax = (2 * N - 1) / Nk;
    std::vector<u64> dtab = detail::dk_prefix(Tmax, k - 1);
    return detail::chain_bound_with_table(dtab, N, k, alpha);
}

} // namespace divsum
