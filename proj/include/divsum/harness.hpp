// Grid scans over (k, N, a/q, box): evaluates the exponential sum by the
// decomposition (cross-checked against direct summation up to a cap),
// the intermediate chain bound and the envelope (Nq)^eps (N/q + q + N^{1-1/k}),
// then verifies the bound chain and tracks the envelope ratio across
// N-decades.  Scan output is deterministic for a fixed spec: records appear
// in grid enumeration order regardless of thread count.
#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "divsum/arith.hpp"
#include "divsum/diophantine.hpp"
#include "divsum/expsum.hpp"
#include "divsum/io.hpp"
#include "divsum/version.hpp"

namespace divsum {

struct verification_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EnvelopeParams {
    double epsilon{0.1};
    double C{1.0};

    EnvelopeParams() = default;
    EnvelopeParams(double eps, double c) : epsilon(eps), C(c) {
        if (!(epsilon >= 0.0 && epsilon < 0.5))
            throw std::domain_error("EnvelopeParams: epsilon must lie in [0, 1/2)");
        if (!(C > 0.0)) throw std::domain_error("EnvelopeParams: C must be positive");
    }
};

// N/q + q + N^{1-1/k}, the unscaled right-hand side.
inline double envelope_core(u64 N, u64 q, int k) {
    if (N < 1 || q < 2 || k < 2) throw std::domain_error("envelope_core: need N >= 1, q >= 2, k >= 2");
    const double dN = static_cast<double>(N);
    const double dq = static_cast<double>(q);
    const double power = std::exp((1.0 - 1.0 / static_cast<double>(k)) * std::log(dN));
    return dN / dq + dq + power;
}

inline double envelope(u64 N, u64 q, int k, const EnvelopeParams& params) {
    const double core = envelope_core(N, q, k);
    return params.C * std::pow(static_cast<double>(N) * static_cast<double>(q), params.epsilon) * core;
}

// N^{1/k} <= q <= N^{1-1/k}, decided in integers: N <= q^k and q^k <= N^{k-1}.
inline bool regime_flag(u64 N, u64 q, int k) {
    if (k < 2) throw std::domain_error("regime_flag: k must be >= 2");
    const u128 qk = pow_u128_saturated(q, k);
    const u128 nk1 = pow_u128_saturated(N, k - 1);
    return qk >= static_cast<u128>(N) && qk <= nk1;
}

// One grid point's full audit.
struct ScanRecord {
    int k{0};
    u64 N{0};
    u64 a{0};
    u64 q{1};
    double alpha{0.0};
    std::string box_id;
    double S_re{0.0};
    double S_im{0.0};
    double S_abs{0.0};
    double chain{0.0};
    double envelope_core{0.0};
    double ratio_chain{0.0};
    double ratio_envelope{0.0};
    bool in_regime{false};
    double eval_ms{0.0};
};

inline std::string record_brief(const ScanRecord& r) {
    std::ostringstream os;
    os << "k=" << r.k << " N=" << r.N << " a/q=" << r.a << "/" << r.q
       << " alpha=" << fmt_shortest(r.alpha) << " box=" << r.box_id
       << " |S|=" << fmt_shortest(r.S_abs) << " chain=" << fmt_shortest(r.chain);
    return os.str();
}

struct KPlan {
    int k{2};
    std::vector<u64> Ns;
};

struct GridSpec {
    std::vector<KPlan> plans;
    u64 qmax{64};
    int random_boxes{3};
    double epsilon{0.1};
    u64 seed{123456789};
    u64 direct_cap{100000};
    int perturb_pairs{0};
    int threads{1};

    // k = 2 up to 2^22, higher orders capped where a decomposed evaluation
    // stays well under a minute.
    static GridSpec default_grid() {
        GridSpec g;
        g.plans = {
            {2, {1u << 10, 1u << 12, 1u << 14, 1u << 16, 1u << 18, 1u << 20, 1u << 22}},
            {3, {1u << 12, 1u << 14, 1u << 16, 1u << 18}},
            {4, {1u << 12, 1u << 14}},
        };
        return g;
    }
};

struct ScanBoxDef {
    int k{0};
    u64 N{0};
    std::string id;
    std::string box;
};

struct ScanOutput {
    std::vector<ScanRecord> records;
    std::vector<std::string> skipped;
    std::vector<ScanBoxDef> boxes;
};

namespace detail {

inline u64 mix64(u64 x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline u64 point_seed(u64 seed, u64 k, u64 n, u64 a, u64 q) {
    return mix64(seed ^ mix64(k ^ mix64(n ^ mix64(a ^ mix64(q)))));
}

inline double unit_double(u64 bits) {   // [0, 1)
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

} // namespace detail

// Seeded box with intervals scaled so that typical tuple products land
// inside (N, 2N]; roughly a quarter of the factors stay unbounded.
inline IntervalBox make_random_box(int k, u64 N, std::mt19937_64& rng) {
    std::vector<Interval> ivs;
    const u64 cap = std::max<u64>(2, kth_root_floor(2 * N, k - 1));
    for (int j = 0; j + 1 < k; ++j) {
        if (rng() % 4 == 0) {
            ivs.push_back(Interval::all());
        } else {
            const u64 lo = 1 + rng() % cap;
            const u64 len = rng() % cap;
            ivs.push_back(Interval::closed(lo, lo + len));
        }
    }
    return IntervalBox(k, std::move(ivs));
}

namespace detail {

struct ScanPoint {
    int k{0};
    u64 N{0};
    size_t box_index{0};
    std::string box_id;
    ReducedFraction frac;
    int delta_index{-1};    // -1: exact rational, 0..4: perturbed
    double delta{0.0};
};

// deltas covering the admissibility boundary and interior: +-1/q^2,
// +-1/(2q^2), and one seeded uniform draw from (-1/q^2, 1/q^2).
inline std::vector<double> perturbation_deltas(const ReducedFraction& f, u64 seed) {
    const double dd = 1.0 / (static_cast<double>(f.q) * static_cast<double>(f.q));
    std::mt19937_64 rng(seed);
    const double u = (2.0 * unit_double(rng()) - 1.0) * dd;
    return {dd, -dd, dd / 2.0, -dd / 2.0, u};
}

} // namespace detail

// Runs the grid.  Points violating preconditions are skipped with a logged
// reason; a decomposed/direct mismatch beyond 1e-8 (1 + sum w) is a hard
// verification failure.
inline ScanOutput scan(const GridSpec& spec) {
    if (spec.qmax < 2)
        throw std::invalid_argument("scan: q must exceed 1 (Qmax >= 2 required)");
    if (spec.random_boxes < 0 || spec.perturb_pairs < 0 || spec.threads < 1)
        throw std::invalid_argument("scan: counts must be non-negative, threads >= 1");
    EnvelopeParams params(spec.epsilon, 1.0);

    ScanOutput out;

    // Boxes per (k, N): full plus seeded random ones.
    struct BoxSet {
        std::vector<IntervalBox> boxes;
        std::vector<std::string> ids;
    };
    std::map<std::pair<int, u64>, BoxSet> box_sets;

    std::vector<detail::ScanPoint> points;

    for (const KPlan& plan : spec.plans) {
        const int k = plan.k;
        if (k < 2) throw std::invalid_argument("scan: k must be >= 2");
        for (const u64 N : plan.Ns) {
            if (!detail::pow_leq(2, k, N)) {
                out.skipped.push_back("k=" + std::to_string(k) + " N=" + std::to_string(N) +
                                      ": skipped, N < 2^k");
                continue;
            }
            const u64 qcap = std::min<u64>(spec.qmax, isqrt(N));
            if (qcap < 2) {
                out.skipped.push_back("k=" + std::to_string(k) + " N=" + std::to_string(N) +
                                      ": skipped, no admissible q <= min(Qmax, sqrt(N))");
                continue;
            }

            BoxSet bs;
            bs.boxes.push_back(IntervalBox::full(k));
            bs.ids.push_back("full");
            std::mt19937_64 rng(detail::point_seed(spec.seed, static_cast<u64>(k), N, 0, 0));
            for (int b = 0; b < spec.random_boxes; ++b) {
                bs.boxes.push_back(make_random_box(k, N, rng));
                bs.ids.push_back("rb" + std::to_string(b));
            }
            for (size_t b = 0; b < bs.boxes.size(); ++b)
                out.boxes.push_back({k, N, bs.ids[b], bs.boxes[b].describe()});
            box_sets.emplace(std::make_pair(k, N), std::move(bs));
            const BoxSet& placed = box_sets.at({k, N});

            const std::vector<ReducedFraction> fractions = farey_grid(qcap);

            // evenly index-spaced fractions get the |delta| <= 1/q^2 perturbations
            std::vector<size_t> perturb_sel;
            if (spec.perturb_pairs > 0) {
                const size_t F = fractions.size();
                const size_t P = std::min<size_t>(spec.perturb_pairs, F);
                for (size_t i = 0; i < P; ++i) {
                    size_t idx = (P == 1) ? 0 : (i * (F - 1)) / (P - 1);
                    if (perturb_sel.empty() || perturb_sel.back() != idx)
                        perturb_sel.push_back(idx);
                }
            }

            for (size_t b = 0; b < placed.boxes.size(); ++b) {
                for (size_t fi = 0; fi < fractions.size(); ++fi) {
                    const ReducedFraction& f = fractions[fi];
                    detail::ScanPoint p;
                    p.k = k;
                    p.N = N;
                    p.box_index = b;
                    p.box_id = placed.ids[b];
                    p.frac = f;
                    points.push_back(p);
                    const bool perturb_here =
                        b == 0 && std::binary_search(perturb_sel.begin(), perturb_sel.end(), fi);
                    if (perturb_here) {
                        std::vector<double> deltas = detail::perturbation_deltas(
                            f, detail::point_seed(spec.seed, static_cast<u64>(k), N, f.a, f.q));
                        for (int di = 0; di < static_cast<int>(deltas.size()); ++di) {
                            detail::ScanPoint pp = p;
                            pp.delta_index = di;
                            pp.delta = deltas[di];
                            // admissibility |delta| <= 1/q^2 by construction
                            ApproxWitness(f, f.value() + deltas[di], std::fabs(deltas[di]));
                            points.push_back(pp);
                        }
                    }
                }
            }
        }
    }

    // Shared tables, built serially so evaluation is embarrassingly parallel.
    std::map<std::pair<int, u64>, std::vector<u64>> chain_tables;
    std::map<std::tuple<int, u64, size_t>, WeightedWindow> windows;
    for (const auto& [key, bs] : box_sets) {
        const auto [k, N] = key;
        const u64 Nk = kth_root_floor(N, k);
        chain_tables.emplace(key, detail::dk_prefix((2 * N - 1) / Nk, k - 1));
        if (N <= spec.direct_cap)
            for (size_t b = 0; b < bs.boxes.size(); ++b)
                windows.emplace(std::make_tuple(k, N, b), sieve_localized(N, bs.boxes[b]));
    }

    out.records.resize(points.size());

    auto eval_point = [&](size_t i) {
        const detail::ScanPoint& p = points[i];
        const IntervalBox& box = box_sets.at({p.k, p.N}).boxes[p.box_index];
        const AlphaValue alpha = (p.delta_index < 0)
                                     ? AlphaValue::from_fraction(p.frac)
                                     : AlphaValue::from_real(p.frac.value() + p.delta);

        const auto t0 = std::chrono::steady_clock::now();
        ExpSumResult dec = exp_sum_decomposed(p.N, box, alpha);
        if (p.N <= spec.direct_cap) {
            const WeightedWindow& w = windows.at(std::make_tuple(p.k, p.N, p.box_index));
            ExpSumResult dir = exp_sum_direct(w, alpha);
            const double tol = 1e-8 * (1.0 + static_cast<double>(dir.terms));
            if (std::abs(dec.value - dir.value) > tol) {
                ScanRecord bad;
                bad.k = p.k; bad.N = p.N; bad.a = p.frac.a; bad.q = p.frac.q;
                bad.alpha = alpha.value(); bad.box_id = p.box_id;
                throw verification_error("scan: decomposed/direct mismatch at " + record_brief(bad) +
                                         " |diff|=" + fmt_shortest(std::abs(dec.value - dir.value)) +
                                         " tol=" + fmt_shortest(tol));
            }
        }
        const std::vector<u64>& dtab = chain_tables.at({p.k, p.N});
        const double chain = detail::chain_bound_with_table(dtab, p.N, p.k, alpha);
        const auto t1 = std::chrono::steady_clock::now();

        ScanRecord r;
        r.k = p.k;
        r.N = p.N;
        r.a = p.frac.a;
        r.q = p.frac.q;
        r.alpha = alpha.value();
        r.box_id = p.box_id;
        r.S_re = dec.value.real();
        r.S_im = dec.value.imag();
        r.S_abs = dec.abs();
        r.chain = chain;
        r.envelope_core = envelope_core(p.N, p.frac.q, p.k);
        r.ratio_chain = r.S_abs / chain;
        r.ratio_envelope =
            r.S_abs / (std::pow(static_cast<double>(p.N) * static_cast<double>(p.frac.q),
                                params.epsilon) *
                       r.envelope_core);
        r.in_regime = regime_flag(p.N, p.frac.q, p.k);
        r.eval_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        out.records[i] = std::move(r);
    };

    if (spec.threads <= 1 || points.size() < 2) {
        for (size_t i = 0; i < points.size(); ++i) eval_point(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::exception_ptr> errors(static_cast<size_t>(spec.threads));
        std::vector<std::thread> pool;
        for (int ti = 0; ti < spec.threads; ++ti) {
            pool.emplace_back([&, slot = static_cast<size_t>(ti)] {
                try {
                    for (size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1))
                        eval_point(i);
                } catch (...) {
                    errors[slot] = std::current_exception();
                }
            });
        }
        for (std::thread& th : pool) th.join();
        for (const std::exception_ptr& e : errors)
            if (e) std::rethrow_exception(e);
    }

    return out;
}

// ---------------------------------------------------------------------------
// Chain verification

struct ChainVerdict {
    bool pass{true};
    double max_ratio{0.0};
    ScanRecord argmax{};
    std::vector<ScanRecord> violations;

    std::string summary() const {
        std::ostringstream os;
        if (pass) {
            os << "chain bound holds for all records; max ratio_chain = "
               << fmt_sig12(max_ratio) << " at " << record_brief(argmax);
        } else {
            os << "CHAIN VIOLATION at " << violations.size() << " record(s):";
            for (const ScanRecord& v : violations) os << "\n  " << record_brief(v);
        }
        return os.str();
    }
};

// |S| <= chain + 1e-6 for every record; the slack covers floating point only.
inline ChainVerdict verify_chain(std::span<const ScanRecord> records) {
    if (records.empty()) throw std::domain_error("verify_chain: no records");
    ChainVerdict v;
    for (const ScanRecord& r : records) {
        if (r.ratio_chain >= v.max_ratio) {
            v.max_ratio = r.ratio_chain;
            v.argmax = r;
        }
        if (r.S_abs > r.chain + 1e-6) v.violations.push_back(r);
    }
    v.pass = v.violations.empty();
    return v;
}

// ---------------------------------------------------------------------------
// Envelope-constant report

struct ConstantEntry {
    int k{0};
    u64 N_min{0}, N_max{0};
    double max_ratio_overall{0.0};
    bool has_regime{false};
    double max_ratio_regime{0.0};
    double ratio_at_Nmin{0.0};
    double ratio_at_Nmax{0.0};
    bool degenerate{false};
    double growth{0.0};     // g(k); meaningless when degenerate
};

struct ConstantReport {
    std::vector<ConstantEntry> entries;

    std::string csv() const {
        std::ostringstream os;
        os << "k,N_min,N_max,max_ratio_overall,max_ratio_regime,ratio_at_Nmin,ratio_at_Nmax,growth\n";
        for (const ConstantEntry& e : entries) {
            os << e.k << ',' << e.N_min << ',' << e.N_max << ',' << fmt_shortest(e.max_ratio_overall)
               << ',' << (e.has_regime ? fmt_shortest(e.max_ratio_regime) : std::string())
               << ',' << fmt_shortest(e.ratio_at_Nmin) << ',' << fmt_shortest(e.ratio_at_Nmax)
               << ',' << (e.degenerate ? std::string("degenerate") : fmt_shortest(e.growth))
               << '\n';
        }
        return os.str();
    }

    std::string table() const {
        std::ostringstream os;
        char line[256];
        std::snprintf(line, sizeof line, "%3s %10s %10s %16s %16s %16s\n",
                      "k", "N_min", "N_max", "max ratio", "max ratio(reg)", "g(k)");
        os << line;
        for (const ConstantEntry& e : entries) {
            std::snprintf(line, sizeof line, "%3d %10llu %10llu %16s %16s %16s\n", e.k,
                          static_cast<unsigned long long>(e.N_min),
                          static_cast<unsigned long long>(e.N_max),
                          fmt_sig12(e.max_ratio_overall).c_str(),
                          e.has_regime ? fmt_sig12(e.max_ratio_regime).c_str() : "-",
                          e.degenerate ? "degenerate" : fmt_sig12(e.growth).c_str());
            os << line;
        }
        return os.str();
    }
};

// Per k: max envelope ratio overall and inside the regime N^{1/k} <= q <=
// N^{1-1/k}, plus the growth diagnostic g(k) = (max ratio at largest N) /
// (max ratio at smallest N).  Refuses record sets that do not span at least
// two decades of N.
inline ConstantReport constant_report(std::span<const ScanRecord> records,
                                      const EnvelopeParams& params) {
    (void)params;   // ratios are carried by the records; params kept for symmetry
    if (records.empty()) throw std::invalid_argument("constant_report: no records");
    std::vector<int> decades;
    for (const ScanRecord& r : records)
        decades.push_back(static_cast<int>(std::floor(std::log10(static_cast<double>(r.N)))));
    std::sort(decades.begin(), decades.end());
    decades.erase(std::unique(decades.begin(), decades.end()), decades.end());
    if (decades.size() < 2)
        throw std::invalid_argument(
            "constant_report: records must span at least two decades of N");

    std::map<int, std::vector<const ScanRecord*>> by_k;
    for (const ScanRecord& r : records) by_k[r.k].push_back(&r);

    ConstantReport rep;
    for (const auto& [k, recs] : by_k) {
        ConstantEntry e;
        e.k = k;
        e.N_min = std::numeric_limits<u64>::max();
        e.N_max = 0;
        for (const ScanRecord* r : recs) {
            e.N_min = std::min(e.N_min, r->N);
            e.N_max = std::max(e.N_max, r->N);
        }
        for (const ScanRecord* r : recs) {
            e.max_ratio_overall = std::max(e.max_ratio_overall, r->ratio_envelope);
            if (r->in_regime) {
                e.has_regime = true;
                e.max_ratio_regime = std::max(e.max_ratio_regime, r->ratio_envelope);
            }
            if (r->N == e.N_min) e.ratio_at_Nmin = std::max(e.ratio_at_Nmin, r->ratio_envelope);
            if (r->N == e.N_max) e.ratio_at_Nmax = std::max(e.ratio_at_Nmax, r->ratio_envelope);
        }
        if (e.ratio_at_Nmin == 0.0) {
            e.degenerate = (e.ratio_at_Nmax == 0.0);
            e.growth = e.degenerate ? 0.0 : std::numeric_limits<double>::infinity();
        } else {
            e.growth = e.ratio_at_Nmax / e.ratio_at_Nmin;
        }
        rep.entries.push_back(e);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr const char* kRecordsCsvHeader =
    "k,N,a,q,alpha,box_id,S_re,S_im,S_abs,chain,envelope_core,ratio_chain,ratio_envelope,"
    "in_regime,eval_ms";

// Timings default to 0 in the CSV so that identical specs produce
// byte-identical files; pass include_timings for profiling output.
inline void write_records_csv(std::ostream& out, std::span<const ScanRecord> records,
                              bool include_timings = false) {
    out << kRecordsCsvHeader << '\n';
    for (const ScanRecord& r : records) {
        out << r.k << ',' << r.N << ',' << r.a << ',' << r.q << ',' << fmt_shortest(r.alpha)
            << ',' << r.box_id << ',' << fmt_shortest(r.S_re) << ',' << fmt_shortest(r.S_im)
            << ',' << fmt_shortest(r.S_abs) << ',' << fmt_shortest(r.chain) << ','
            << fmt_shortest(r.envelope_core) << ',' << fmt_shortest(r.ratio_chain) << ','
            << fmt_shortest(r.ratio_envelope) << ',' << (r.in_regime ? 1 : 0) << ','
            << (include_timings ? fmt_shortest(r.eval_ms) : std::string("0")) << '\n';
    }
}

inline std::vector<ScanRecord> read_records_csv(std::istream& in) {
    std::vector<ScanRecord> records;
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("records csv: empty input");
    if (line != kRecordsCsvHeader)
        throw std::invalid_argument("records csv: unexpected header '" + line + "'");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        size_t pos = 0;
        while (true) {
            size_t c = line.find(',', pos);
            f.push_back(line.substr(pos, c == std::string::npos ? std::string::npos : c - pos));
            if (c == std::string::npos) break;
            pos = c + 1;
        }
        if (f.size() != 15) throw std::invalid_argument("records csv: malformed row '" + line + "'");
        ScanRecord r;
        r.k = std::stoi(f[0]);
        r.N = std::stoull(f[1]);
        r.a = std::stoull(f[2]);
        r.q = std::stoull(f[3]);
        r.alpha = std::stod(f[4]);
        r.box_id = f[5];
        r.S_re = std::stod(f[6]);
        r.S_im = std::stod(f[7]);
        r.S_abs = std::stod(f[8]);
        r.chain = std::stod(f[9]);
        r.envelope_core = std::stod(f[10]);
        r.ratio_chain = std::stod(f[11]);
        r.ratio_envelope = std::stod(f[12]);
        r.in_regime = f[13] == "1";
        r.eval_ms = std::stod(f[14]);
        records.push_back(std::move(r));
    }
    return records;
}

inline void write_manifest_json(std::ostream& out, const GridSpec& spec, const ScanOutput& so) {
    out << "{\"grid\":{\"plans\":[";
    for (size_t i = 0; i < spec.plans.size(); ++i) {
        if (i) out << ',';
        out << "{\"k\":" << spec.plans[i].k << ",\"Ns\":[";
        for (size_t j = 0; j < spec.plans[i].Ns.size(); ++j) {
            if (j) out << ',';
            out << spec.plans[i].Ns[j];
        }
        out << "]}";
    }
    out << "],\"qmax\":" << spec.qmax << ",\"random_boxes\":" << spec.random_boxes
        << ",\"direct_cap\":" << spec.direct_cap << ",\"perturb_pairs\":" << spec.perturb_pairs
        << ",\"boxes\":[";
    for (size_t i = 0; i < so.boxes.size(); ++i) {
        if (i) out << ',';
        out << "{\"k\":" << so.boxes[i].k << ",\"N\":" << so.boxes[i].N << ",\"id\":\""
            << so.boxes[i].id << "\",\"box\":\"" << so.boxes[i].box << "\"}";
    }
    out << "]},\"seed\":" << spec.seed << ",\"epsilon\":" << fmt_shortest(spec.epsilon)
        << ",\"version\":\"" << kVersion << "\"}";
}

} // namespace divsum
