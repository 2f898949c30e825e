#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "divsum/expsum.hpp"
#include "oracles.hpp"

using namespace divsum;

namespace {

AlphaValue random_alpha(std::mt19937_64& rng, bool allow_real = true) {
    if (!allow_real || rng() % 2 == 0) {
        u64 q = 2 + rng() % 999;
        u64 a = 1 + rng() % (q - 1);
        return AlphaValue::from_rational(a, q);
    }
    return AlphaValue::from_real(std::ldexp(static_cast<double>(1 + rng() % ((1ull << 52) - 2)), -52));
}

IntervalBox random_box(int k, u64 N, std::mt19937_64& rng) {
    std::vector<Interval> ivs;
    const u64 cap = std::max<u64>(2, kth_root_floor(2 * N, k - 1));
    for (int j = 0; j + 1 < k; ++j) {
        if (rng() % 3 == 0) ivs.push_back(Interval::all());
        else {
            u64 lo = 1 + rng() % cap;
            ivs.push_back(Interval::closed(lo, lo + rng() % cap));
        }
    }
    return IntervalBox(k, ivs);
}

} // namespace

TEST_CASE("alpha parsing and reduction") {
    AlphaValue r = AlphaValue::parse("1/3");
    CHECK(r.is_rational());
    CHECK(r.numerator() == 1);
    CHECK(r.denominator() == 3);

    AlphaValue x = AlphaValue::parse("0.25");
    CHECK(!x.is_rational());
    CHECK(x.value() == 0.25);

    CHECK(AlphaValue::from_real(1.25).value() == 0.25);     // reduced mod 1
    CHECK(AlphaValue::from_real(-0.25).value() == 0.75);
    CHECK(AlphaValue::from_rational(5, 3).fraction() == ReducedFraction(2, 3));
    CHECK_THROWS_AS(AlphaValue::parse("abc"), std::exception);
    CHECK_THROWS_AS(AlphaValue::from_real(std::nan("")), std::domain_error);
}

TEST_CASE("exp_sum_direct pinned examples") {
    // alpha = 0: the sum collapses to the total weight
    WeightedWindow dw = sieve_localized(12, IntervalBox(2, {Interval::closed(2, 5)}));
    ExpSumResult r0 = exp_sum_direct(dw, AlphaValue::from_rational(0, 1));
    CHECK(r0.value.real() == static_cast<double>(dw.total_weight()));
    CHECK(r0.value.imag() == 0.0);
    CHECK(r0.terms == dw.total_weight());

    // all-ones on (2,4] at alpha = 1/2: e(3/2) + e(2) = 0
    WeightedWindow ones(Window(2), {1, 1});
    ExpSumResult r1 = exp_sum_direct(ones, AlphaValue::from_rational(1, 2));
    CHECK(std::abs(r1.value) < 1e-14);

    // d_2 on (2,4] at alpha = 1/2: 2*(-1) + 3*(+1) = 1
    ExpSumResult r2 = exp_sum_direct(sieve_dk(2, 2), AlphaValue::from_rational(1, 2));
    CHECK(r2.value.real() == Catch::Approx(1.0).margin(1e-13));
    CHECK(std::abs(r2.value.imag()) < 1e-13);
}

TEST_CASE("exp_sum_direct matches the naive oracle") {
    std::mt19937_64 rng(101);
    for (int trial = 0; trial < 40; ++trial) {
        const u64 N = 1 + rng() % 400;
        const int k = 2 + static_cast<int>(rng() % 2);
        WeightedWindow w = sieve_dk(N, k);
        AlphaValue alpha = random_alpha(rng);
        ExpSumResult r = exp_sum_direct(w, alpha);
        std::complex<double> naive = oracles::naive_exp_sum(w, alpha.value());
        const double tol = 1e-9 * (1.0 + static_cast<double>(w.total_weight()));
        REQUIRE(std::abs(r.value - naive) <= tol);
        REQUIRE(r.abs() <= static_cast<double>(r.unit_terms) + r.err_budget + 1e-9);
    }
}

TEST_CASE("geometric_interval_sum pinned examples") {
    // t*alpha integral: all phases 1
    std::complex<double> g1 = geometric_interval_sum(2, AlphaValue::from_rational(1, 2), 0, 5);
    CHECK(g1.real() == 5.0);
    CHECK(g1.imag() == 0.0);

    // full period of the cube roots of unity
    std::complex<double> g2 = geometric_interval_sum(1, AlphaValue::from_rational(1, 3), 0, 3);
    CHECK(std::abs(g2) < 1e-14);

    // matches direct unit-weight summation on (2,4]
    std::complex<double> g3 = geometric_interval_sum(1, AlphaValue::from_rational(1, 2), 2, 4);
    CHECK(std::abs(g3) < 1e-14);

    CHECK(geometric_interval_sum(3, AlphaValue::from_rational(1, 7), 5, 5) ==
          std::complex<double>{0.0, 0.0});
    CHECK_THROWS_AS(geometric_interval_sum(1, AlphaValue::from_rational(1, 2), 5, 4),
                    std::invalid_argument);
}

TEST_CASE("geometric_interval_sum matches term-by-term and obeys the norm bound") {
    std::mt19937_64 rng(777);
    for (int trial = 0; trial < 300; ++trial) {
        const u64 t = 1 + rng() % 500;
        const u64 A = rng() % 1000;
        const u64 B = A + rng() % 400;
        AlphaValue alpha = random_alpha(rng);
        std::complex<double> fast = geometric_interval_sum(t, alpha, A, B);
        std::complex<double> slow = oracles::naive_geometric(t, alpha, A, B);
        REQUIRE(std::abs(fast - slow) <= 1e-9 * (1.0 + static_cast<double>(B - A)));

        // |sum| <= min(B - A, 1/(2 ||t alpha||)) -- sharper than the 1/||.|| form
        double norm;
        if (alpha.is_rational()) {
            const u64 q = alpha.denominator();
            norm = static_cast<double>(residue_norm(t, alpha.fraction())) / static_cast<double>(q);
        } else {
            norm = dist_to_nearest_int(static_cast<double>(t) * alpha.value());
        }
        double bound = static_cast<double>(B - A);
        if (norm > 0.0) bound = std::min(bound, 1.0 / (2.0 * norm));
        REQUIRE(std::abs(fast) <= bound * (1.0 + 1e-9) + 1e-9);
    }
}

TEST_CASE("geometric sum survives a nearly-integral real phase") {
    // t*alpha within 1e-12 of an integer forces the term-by-term fallback
    const double alpha = 1.0 / 3.0 + 1e-14;
    AlphaValue a = AlphaValue::from_real(alpha);
    std::complex<double> fast = geometric_interval_sum(3, a, 10, 500);
    std::complex<double> slow = oracles::naive_geometric(3, a, 10, 500);
    CHECK(std::abs(fast - slow) <= 1e-8 * 490.0);
    // the sum is close to its length since all phases are nearly 1
    CHECK(fast.real() == Catch::Approx(490.0).epsilon(1e-6));
}

TEST_CASE("direct summation handles denominators beyond the root table") {
    const u64 q = 1000003;      // prime above the table cutoff
    WeightedWindow w = sieve_dk(500, 2);
    ExpSumResult big = exp_sum_direct(w, AlphaValue::from_rational(1, q));
    std::complex<double> naive = oracles::naive_exp_sum(w, 1.0 / static_cast<double>(q));
    CHECK(std::abs(big.value - naive) <= 1e-9 * (1.0 + static_cast<double>(big.terms)));
}

TEST_CASE("rational geometric table agrees with the generic closed form") {
    std::mt19937_64 rng(313);
    for (int trial = 0; trial < 200; ++trial) {
        const u64 q = 2 + rng() % 200;
        const u64 a = 1 + rng() % (q - 1);
        detail::RationalGeomTable table(a % q, q);
        AlphaValue alpha = AlphaValue::from_rational(a, q);
        const u64 t = 1 + rng() % 5000;
        const u64 A = rng() % 2000;
        const u64 B = A + rng() % 1000;
        if (A == B) continue;
        std::complex<double> via_table = table.sum(t, A, B);
        std::complex<double> generic = geometric_interval_sum(t, alpha, A, B);
        REQUIRE(std::abs(via_table - generic) <= 1e-10 * (1.0 + std::abs(generic)));
    }
}

TEST_CASE("exp_sum_decomposed pinned examples") {
    // alpha = 0 cross-checks the tuple covering: sum of d(n) over (10, 20]
    WeightedWindow w10 = sieve_dk(10, 2);
    ExpSumResult d0 = exp_sum_decomposed(10, IntervalBox::full(2), AlphaValue::from_rational(0, 1));
    CHECK(d0.value.real() == Catch::Approx(static_cast<double>(w10.total_weight())).margin(1e-9));
    CHECK(d0.value.imag() == 0.0);

    // N = 2, k = 2, alpha = 1/2 -> 1 (equals the direct example)
    ExpSumResult d1 = exp_sum_decomposed(2, IntervalBox::full(2), AlphaValue::from_rational(1, 2));
    CHECK(d1.value.real() == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::abs(d1.value.imag()) < 1e-12);

    // N = 10^4, k = 3, rational alpha: matches direct within 1e-8 (1 + sum w)
    WeightedWindow w3 = sieve_dk(10000, 3);
    AlphaValue a377 = AlphaValue::from_rational(377, 1000);
    ExpSumResult dir = exp_sum_direct(w3, a377);
    ExpSumResult dec = exp_sum_decomposed(10000, IntervalBox::full(3), a377);
    CHECK(std::abs(dir.value - dec.value) <= 1e-8 * (1.0 + static_cast<double>(dir.terms)));

    CHECK_THROWS_AS(exp_sum_decomposed(0, IntervalBox::full(2), AlphaValue::from_rational(0, 1)),
                    std::domain_error);
}

TEST_CASE("decomposition equals direct summation on random inputs") {
    std::mt19937_64 rng(909);
    for (int trial = 0; trial < 30; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 3);
        const u64 N = 4 + rng() % 1024;
        IntervalBox box = (rng() % 2 == 0) ? IntervalBox::full(k) : random_box(k, N, rng);
        AlphaValue alpha = random_alpha(rng);
        WeightedWindow w = sieve_localized(N, box);
        ExpSumResult dir = exp_sum_direct(w, alpha);
        ExpSumResult dec = exp_sum_decomposed(N, box, alpha);
        const double tol = 1e-8 * (1.0 + static_cast<double>(dir.terms));
        REQUIRE(std::abs(dir.value - dec.value) <= tol);
    }
}

TEST_CASE("the k branches partition the tuples exactly") {
    std::mt19937_64 rng(555);
    for (int trial = 0; trial < 25; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 3);
        const u64 N = 1 + rng() % 600;
        IntervalBox box = (rng() % 2 == 0) ? IntervalBox::full(k) : random_box(k, N, rng);
        WeightedWindow w = sieve_localized(N, box);
        DecomposeStats stats;
        exp_sum_decomposed(N, box, AlphaValue::from_rational(0, 1), &stats);
        u64 branch_total = 0;
        for (u64 b : stats.branch_unit_terms) branch_total += b;
        REQUIRE(stats.unit_terms == branch_total);
        REQUIRE(stats.unit_terms == w.total_weight());   // exact integer identity
    }
}

TEST_CASE("conjugate symmetry S(1 - alpha) = conj(S(alpha))") {
    std::mt19937_64 rng(2718);
    for (int trial = 0; trial < 12; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 2);
        const u64 N = 16 + rng() % 500;
        IntervalBox box = IntervalBox::full(k);
        WeightedWindow w = sieve_dk(N, k);

        AlphaValue alpha, mirror;
        if (rng() % 2 == 0) {
            u64 q = 3 + rng() % 97;
            u64 a = 1 + rng() % (q - 1);
            alpha = AlphaValue::from_rational(a, q);
            mirror = AlphaValue::from_rational(q - a, q);
        } else {
            double x = 0.1 + 0.8 * std::ldexp(static_cast<double>(rng() >> 11), -53);
            alpha = AlphaValue::from_real(x);
            mirror = AlphaValue::from_real(1.0 - x);
        }

        for (bool decomposed : {false, true}) {
            std::complex<double> s = decomposed
                ? exp_sum_decomposed(N, box, alpha).value
                : exp_sum_direct(w, alpha).value;
            std::complex<double> sm = decomposed
                ? exp_sum_decomposed(N, box, mirror).value
                : exp_sum_direct(w, mirror).value;
            const double scale = std::max(1.0, std::abs(s));
            REQUIRE(std::abs(sm - std::conj(s)) <= 1e-10 * scale);
        }
    }
}

TEST_CASE("chain_bound pinned examples") {
    // N = 2, k = 2: t in {1,2,3}, d_1 = 1: 2 (min(2,2) + 1 + min(2/3,2)) = 22/3
    CHECK(chain_bound(2, 2, AlphaValue::from_rational(1, 2)) ==
          Catch::Approx(22.0 / 3.0).epsilon(1e-14));
    CHECK(chain_bound(2, 2, AlphaValue::from_rational(0, 1)) ==
          Catch::Approx(22.0 / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(chain_bound(10, 1, AlphaValue::from_rational(1, 2)), std::domain_error);
}

TEST_CASE("chain_bound dominates the exponential sum") {
    WeightedWindow w = sieve_dk(1000, 2);
    AlphaValue alpha = AlphaValue::from_rational(1, 7);
    ExpSumResult s = exp_sum_direct(w, alpha);
    CHECK(s.abs() <= chain_bound(1000, 2, alpha));

    std::mt19937_64 rng(808);
    for (int trial = 0; trial < 20; ++trial) {
        const int k = 2 + static_cast<int>(rng() % 3);
        const u64 N = 4 + rng() % 800;
        AlphaValue a = random_alpha(rng);
        WeightedWindow dw = sieve_dk(N, k);
        REQUIRE(exp_sum_direct(dw, a).abs() <= chain_bound(N, k, a) + 1e-6);
    }
}

TEST_CASE("prefix divisor table matches the window sieve") {
    std::vector<u64> d3 = detail::dk_prefix(256, 3);
    for (u64 n = 1; n <= 256; ++n)
        REQUIRE(d3[n] == oracles::ordered_tuple_count(n, 3));
}
