#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "divsum/harness.hpp"
#include "oracles.hpp"

using namespace divsum;

TEST_CASE("envelope pinned values") {
    EnvelopeParams flat(0.0, 1.0);
    // N = q^2, k = 2, eps = 0: N/q + q + sqrt(N) = 3q
    CHECK(envelope(10000, 100, 2, flat) == Catch::Approx(300.0).epsilon(1e-12));
    CHECK(envelope_core(10000, 100, 2) == Catch::Approx(300.0).epsilon(1e-12));

    EnvelopeParams p(0.1, 1.0);
    // (10^8)^0.1 (10^4 + 10^2 + 10^4) ~ 1.268e5
    CHECK(envelope(1000000, 100, 3, p) == Catch::Approx(126822.0).epsilon(1e-3));

    CHECK_THROWS_AS(EnvelopeParams(0.5, 1.0), std::domain_error);
    CHECK_THROWS_AS(EnvelopeParams(0.1, 0.0), std::domain_error);
    CHECK_THROWS_AS(envelope_core(100, 1, 2), std::domain_error);
}

TEST_CASE("regime flag boundaries are exact") {
    // N = 2^12, k = 2: regime is exactly q = 64
    CHECK(regime_flag(1 << 12, 64, 2));
    CHECK(!regime_flag(1 << 12, 63, 2));
    CHECK(!regime_flag(1 << 12, 65, 2));
    // N = 2^12, k = 3: 16 <= q <= 256
    CHECK(regime_flag(1 << 12, 16, 3));
    CHECK(regime_flag(1 << 12, 256, 3));
    CHECK(!regime_flag(1 << 12, 15, 3));
    CHECK(!regime_flag(1 << 12, 257, 3));
}

TEST_CASE("scan: the 21-point grid") {
    GridSpec spec;
    spec.plans = {{2, {1024}}};
    spec.qmax = 8;
    spec.random_boxes = 0;
    ScanOutput so = scan(spec);
    REQUIRE(so.records.size() == 21);           // sum of phi(q), q = 2..8
    for (const ScanRecord& r : so.records) {
        CHECK(r.S_abs <= r.chain + 1e-6);
        CHECK(r.ratio_chain >= 0.0);
        CHECK(std::isfinite(r.ratio_envelope));
        CHECK(r.box_id == "full");
    }
    ChainVerdict v = verify_chain(so.records);
    CHECK(v.pass);
    CHECK(v.max_ratio <= 1.0);
}

TEST_CASE("scan: single point (k=2, N=4, q=2) has |S| = 4") {
    GridSpec spec;
    spec.plans = {{2, {4}}};
    spec.qmax = 2;
    spec.random_boxes = 0;
    ScanOutput so = scan(spec);
    REQUIRE(so.records.size() == 1);
    const ScanRecord& r = so.records[0];
    CHECK(r.a == 1);
    CHECK(r.q == 2);
    CHECK(r.S_abs == Catch::Approx(4.0).margin(1e-9));   // |-2 + 4 - 2 + 4|
    CHECK(r.in_regime);                                  // 2 = sqrt(4) = 4/2
}

TEST_CASE("scan: empty grid and skip logging") {
    GridSpec empty;
    empty.plans = {};
    ScanOutput so = scan(empty);
    CHECK(so.records.empty());

    GridSpec skip;
    skip.plans = {{4, {8, 4096}}};      // 8 < 2^4 must be skipped, not dropped silently
    skip.qmax = 4;
    skip.random_boxes = 0;
    ScanOutput so2 = scan(skip);
    REQUIRE(so2.skipped.size() == 1);
    CHECK(so2.skipped[0].find("N < 2^k") != std::string::npos);
    for (const ScanRecord& r : so2.records) CHECK(r.N == 4096);

    GridSpec bad;
    bad.qmax = 1;
    CHECK_THROWS_AS(scan(bad), std::invalid_argument);
}

TEST_CASE("scan: perturbed points carry admissible witnesses") {
    GridSpec spec;
    spec.plans = {{2, {256}}};
    spec.qmax = 6;
    spec.random_boxes = 0;
    spec.perturb_pairs = 3;
    ScanOutput so = scan(spec);

    size_t perturbed = 0;
    for (const ScanRecord& r : so.records) {
        const double exact = static_cast<double>(r.a) / static_cast<double>(r.q);
        if (r.alpha != exact) {
            ++perturbed;
            const double dd = 1.0 / (static_cast<double>(r.q) * static_cast<double>(r.q));
            CHECK(std::fabs(r.alpha - exact) <= dd * (1.0 + 1e-12));
            CHECK(std::isfinite(r.ratio_envelope));
        }
    }
    CHECK(perturbed >= 3 * 4);   // 3 fractions x at least 4 nonzero deltas
}

TEST_CASE("scan is deterministic and thread-count independent") {
    GridSpec spec;
    spec.plans = {{2, {128}}, {3, {256}}};
    spec.qmax = 6;
    spec.random_boxes = 2;
    spec.perturb_pairs = 2;

    ScanOutput a = scan(spec);
    ScanOutput b = scan(spec);
    GridSpec threaded = spec;
    threaded.threads = 4;
    ScanOutput c = scan(threaded);

    std::ostringstream sa, sb, sc;
    write_records_csv(sa, a.records);
    write_records_csv(sb, b.records);
    write_records_csv(sc, c.records);
    REQUIRE(sa.str() == sb.str());
    REQUIRE(sa.str() == sc.str());
}

TEST_CASE("verify_chain flags fabricated violations") {
    GridSpec spec;
    spec.plans = {{2, {64}}};
    spec.qmax = 4;
    spec.random_boxes = 0;
    ScanOutput so = scan(spec);
    ChainVerdict ok = verify_chain(so.records);
    CHECK(ok.pass);

    std::vector<ScanRecord> tampered = so.records;
    tampered[1].S_abs = tampered[1].chain + 1.0;
    ChainVerdict bad = verify_chain(tampered);
    CHECK(!bad.pass);
    REQUIRE(bad.violations.size() == 1);
    CHECK(bad.summary().find("CHAIN VIOLATION") != std::string::npos);
    CHECK(bad.summary().find(record_brief(tampered[1])) != std::string::npos);

    CHECK_THROWS_AS(verify_chain(std::span<const ScanRecord>{}), std::domain_error);
}

TEST_CASE("constant_report growth, degeneracy, span refusal") {
    auto rec = [](int k, u64 N, double ratio, bool regime) {
        ScanRecord r;
        r.k = k; r.N = N; r.q = 3; r.ratio_envelope = ratio; r.in_regime = regime;
        return r;
    };

    std::vector<ScanRecord> recs = {
        rec(2, 1000, 0.5, false), rec(2, 1000, 0.25, true),
        rec(2, 100000, 0.75, false), rec(2, 100000, 0.1, false),
    };
    ConstantReport rep = constant_report(recs, EnvelopeParams());
    REQUIRE(rep.entries.size() == 1);
    const ConstantEntry& e = rep.entries[0];
    CHECK(e.k == 2);
    CHECK(e.max_ratio_overall == 0.75);
    CHECK(e.has_regime);
    CHECK(e.max_ratio_regime == 0.25);
    CHECK(e.growth == Catch::Approx(1.5));
    CHECK(!e.degenerate);

    std::vector<ScanRecord> zero = {rec(3, 1000, 0.0, false), rec(3, 100000, 0.0, false)};
    ConstantReport repz = constant_report(zero, EnvelopeParams());
    CHECK(repz.entries[0].degenerate);
    CHECK(repz.csv().find("degenerate") != std::string::npos);

    std::vector<ScanRecord> narrow = {rec(2, 1024, 0.5, false), rec(2, 4096, 0.6, false)};
    CHECK_THROWS_AS(constant_report(narrow, EnvelopeParams()), std::invalid_argument);
}

TEST_CASE("records CSV round-trips exactly") {
    GridSpec spec;
    spec.plans = {{2, {64}}};
    spec.qmax = 5;
    spec.random_boxes = 1;
    spec.perturb_pairs = 1;
    ScanOutput so = scan(spec);

    std::ostringstream os;
    write_records_csv(os, so.records);
    std::istringstream is(os.str());
    std::vector<ScanRecord> back = read_records_csv(is);
    REQUIRE(back.size() == so.records.size());
    for (size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].k == so.records[i].k);
        CHECK(back[i].N == so.records[i].N);
        CHECK(back[i].a == so.records[i].a);
        CHECK(back[i].q == so.records[i].q);
        CHECK(back[i].alpha == so.records[i].alpha);       // shortest repr round-trips
        CHECK(back[i].box_id == so.records[i].box_id);
        CHECK(back[i].S_abs == so.records[i].S_abs);
        CHECK(back[i].chain == so.records[i].chain);
        CHECK(back[i].ratio_envelope == so.records[i].ratio_envelope);
        CHECK(back[i].in_regime == so.records[i].in_regime);
    }

    std::istringstream badhdr("nope\n1,2\n");
    CHECK_THROWS_AS(read_records_csv(badhdr), std::invalid_argument);
}

TEST_CASE("manifest carries grid, seed, epsilon, version") {
    GridSpec spec;
    spec.plans = {{2, {64}}};
    spec.qmax = 4;
    spec.random_boxes = 1;
    spec.seed = 42;
    ScanOutput so = scan(spec);
    std::ostringstream os;
    write_manifest_json(os, spec, so);
    const std::string m = os.str();
    CHECK(m.find("\"grid\"") != std::string::npos);
    CHECK(m.find("\"seed\":42") != std::string::npos);
    CHECK(m.find("\"epsilon\":0.1") != std::string::npos);
    CHECK(m.find(std::string("\"version\":\"") + kVersion + "\"") != std::string::npos);
    CHECK(m.find("\"id\":\"rb0\"") != std::string::npos);
}

TEST_CASE("random boxes are reproducible for a fixed seed") {
    std::mt19937_64 r1(99), r2(99);
    IntervalBox b1 = make_random_box(3, 4096, r1);
    IntervalBox b2 = make_random_box(3, 4096, r2);
    CHECK(b1.describe() == b2.describe());
}
