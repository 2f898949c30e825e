// Command-line front end.  Subcommands: sieve, localized, hooley, expsum,
// chain, approx, scan, report.  Exit codes: 0 success, 1 precondition or
// usage error, 2 verification failure.
#pragma once

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "divsum/arith.hpp"
#include "divsum/diophantine.hpp"
#include "divsum/expsum.hpp"
#include "divsum/harness.hpp"
#include "divsum/io.hpp"
#include "divsum/version.hpp"

namespace divsum::cli {

namespace detail {

// Output sink: --out path or the caller's stream.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw std::invalid_argument("cannot open output file '" + path + "'");
        } else {
            stream_ = &fallback;
        }
    }
    std::ostream& get() { return file_ ? *file_ : *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_{nullptr};
};

inline void print_window(std::ostream& os, const WeightedWindow& w, u64 k,
                         const std::string& format) {
    if (format == "json") {
        write_window_json(os, w, k);
        os << '\n';
    } else if (format == "table") {
        std::span<const u64> ws = w.weights();
        os << "n weight\n";
        for (u64 i = 0; i < ws.size(); ++i) os << (w.N() + 1 + i) << ' ' << ws[i] << '\n';
    } else {
        write_window_csv(os, w);
    }
}

inline void print_expsum_line(std::ostream& os, const char* label, const ExpSumResult& r) {
    os << label << ": re=" << fmt_sig12(r.value.real()) << " im=" << fmt_sig12(r.value.imag())
       << " |S|=" << fmt_sig12(r.abs()) << " terms=" << r.terms << '\n';
}

inline void write_record_json(std::ostream& os, const ScanRecord& r, bool include_timings) {
    os << "{\"k\":" << r.k << ",\"N\":" << r.N << ",\"a\":" << r.a << ",\"q\":" << r.q
       << ",\"alpha\":" << fmt_shortest(r.alpha) << ",\"box_id\":\"" << r.box_id << "\""
       << ",\"S_re\":" << fmt_shortest(r.S_re) << ",\"S_im\":" << fmt_shortest(r.S_im)
       << ",\"S_abs\":" << fmt_shortest(r.S_abs) << ",\"chain\":" << fmt_shortest(r.chain)
       << ",\"envelope_core\":" << fmt_shortest(r.envelope_core)
       << ",\"ratio_chain\":" << fmt_shortest(r.ratio_chain)
       << ",\"ratio_envelope\":" << fmt_shortest(r.ratio_envelope)
       << ",\"in_regime\":" << (r.in_regime ? "true" : "false")
       << ",\"eval_ms\":" << (include_timings ? fmt_shortest(r.eval_ms) : std::string("0")) << "}";
}

} // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"exponential sums of localized divisor functions over (N, 2N]", "divsum"};
    app.require_subcommand(1);

    // --- sieve ---
    auto* sieve_cmd = app.add_subcommand("sieve", "weights d_k(n) on the window (N, 2N]");
    u64 sieve_N = 0;
    int sieve_k = 2;
    std::string sieve_out, sieve_format = "csv";
    sieve_cmd->add_option("--N", sieve_N, "window parameter")->required();
    sieve_cmd->add_option("--k", sieve_k, "order of the divisor function")->required();
    sieve_cmd->add_option("--out", sieve_out, "output path (default stdout)");
    sieve_cmd->add_option("--format", sieve_format, "csv|json|table")
        ->check(CLI::IsMember({"csv", "json", "table"}));

    // --- localized ---
    auto* loc_cmd = app.add_subcommand("localized", "weights of the box-localized divisor count");
    u64 loc_N = 0;
    std::string loc_box, loc_out, loc_format = "csv";
    loc_cmd->add_option("--N", loc_N, "window parameter")->required();
    loc_cmd->add_option("--box", loc_box, "intervals 'lo:hi,lo:hi,...' with '*' unbounded")
        ->required();
    loc_cmd->add_option("--out", loc_out, "output path (default stdout)");
    loc_cmd->add_option("--format", loc_format, "csv|json|table")
        ->check(CLI::IsMember({"csv", "json", "table"}));

    // --- hooley ---
    auto* hoo_cmd = app.add_subcommand("hooley", "divisor concentration: max divisors in (x, e*x]");
    u64 hoo_n = 0;
    bool hoo_divisors = false;
    hoo_cmd->add_option("--n", hoo_n, "integer to analyze")->required();
    hoo_cmd->add_flag("--divisors", hoo_divisors, "print the sorted divisor list instead");

    // --- expsum ---
    auto* exp_cmd = app.add_subcommand("expsum", "evaluate the exponential sum S_k(alpha, N)");
    u64 exp_N = 0;
    int exp_k = 0;
    std::string exp_box, exp_alpha, exp_method = "both", exp_geom, exp_out, exp_format = "table";
    exp_cmd->add_option("--N", exp_N, "window parameter");
    exp_cmd->add_option("--k", exp_k, "order (full box)");
    exp_cmd->add_option("--box", exp_box, "explicit box intervals");
    exp_cmd->add_option("--alpha", exp_alpha, "phase: 'a/q' or decimal")->required();
    exp_cmd->add_option("--method", exp_method, "direct|decomposed|both")
        ->check(CLI::IsMember({"direct", "decomposed", "both"}));
    exp_cmd->add_option("--geom", exp_geom, "geometric sum over (A,B]: 't:A:B'");
    exp_cmd->add_option("--out", exp_out, "output path (default stdout)");
    exp_cmd->add_option("--format", exp_format, "json|table")
        ->check(CLI::IsMember({"json", "table"}));

    // --- chain ---
    auto* chain_cmd = app.add_subcommand("chain", "intermediate bound k sum d_{k-1}(t) min(N/t, 1/||t alpha||)");
    u64 chain_N = 0, chain_q = 0;
    int chain_k = 2;
    std::string chain_alpha;
    double chain_eps = -1.0;
    chain_cmd->add_option("--N", chain_N, "window parameter")->required();
    chain_cmd->add_option("--k", chain_k, "order")->required();
    chain_cmd->add_option("--alpha", chain_alpha, "phase: 'a/q' or decimal")->required();
    chain_cmd->add_option("--epsilon", chain_eps, "also print the envelope at this epsilon");
    chain_cmd->add_option("--q", chain_q, "denominator for the envelope (defaults to rational alpha's)");

    // --- approx ---
    auto* apx_cmd = app.add_subcommand("approx", "rational approximation utilities");
    std::string apx_alpha;
    u64 apx_Q = 1000, apx_residue_t = 0;
    bool apx_convergents = false, apx_farey = false, apx_inverse = false;
    double apx_dist = std::numeric_limits<double>::quiet_NaN();
    apx_cmd->add_option("--alpha", apx_alpha, "phase: 'a/q' or decimal");
    apx_cmd->add_option("--Qmax", apx_Q, "denominator bound (default 1000)");
    apx_cmd->add_flag("--convergents", apx_convergents, "list convergents with q <= Qmax");
    apx_cmd->add_flag("--farey", apx_farey, "list all reduced a/q with 2 <= q <= Qmax");
    apx_cmd->add_flag("--inverse", apx_inverse, "modular inverse of a mod q (alpha must be a/q)");
    apx_cmd->add_option("--residue", apx_residue_t, "residue norm r with ||t a/q|| = r/q for this t");
    apx_cmd->add_option("--dist", apx_dist, "distance of this value to the nearest integer");

    // --- scan ---
    auto* scan_cmd = app.add_subcommand("scan", "grid scan over (k, N, a/q, box)");
    std::vector<int> scan_ks;
    std::vector<u64> scan_Ns;
    u64 scan_qmax = 64, scan_seed = 123456789, scan_cap = 100000;
    int scan_boxes = 3, scan_perturb = 0, scan_threads = 1;
    double scan_eps = 0.1;
    bool scan_timings = false;
    std::string scan_out, scan_format = "csv";
    scan_cmd->add_option("--k", scan_ks, "orders to scan (default: the full default grid)");
    scan_cmd->add_option("--N", scan_Ns, "window parameters (requires --k)");
    scan_cmd->add_option("--Qmax", scan_qmax, "denominator cap (also capped at sqrt(N))");
    scan_cmd->add_option("--boxes", scan_boxes, "random boxes per (k, N) besides the full box");
    scan_cmd->add_option("--epsilon", scan_eps, "envelope exponent (default 0.1)");
    scan_cmd->add_option("--seed", scan_seed, "seed for boxes and perturbations");
    scan_cmd->add_option("--direct-cap", scan_cap, "cross-check against direct summation up to this N");
    scan_cmd->add_option("--perturb", scan_perturb, "rational points per (k,N) to perturb by |delta| <= 1/q^2");
    scan_cmd->add_option("--threads", scan_threads, "worker threads (records stay in grid order)");
    scan_cmd->add_flag("--timings", scan_timings, "emit measured eval_ms (breaks byte-for-byte determinism)");
    scan_cmd->add_option("--out", scan_out, "records path; manifest goes to <out>.manifest.json");
    scan_cmd->add_option("--format", scan_format, "csv|json|table")
        ->check(CLI::IsMember({"csv", "json", "table"}));

    // --- report ---
    auto* rep_cmd = app.add_subcommand("report", "verify the chain bound and summarize envelope ratios");
    std::string rep_in, rep_out, rep_format = "table";
    rep_cmd->add_option("--in", rep_in, "records CSV produced by scan")->required();
    rep_cmd->add_option("--out", rep_out, "output path (default stdout)");
    rep_cmd->add_option("--format", rep_format, "csv|table")
        ->check(CLI::IsMember({"csv", "table"}));

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return 1;
    }

    try {
        if (*sieve_cmd) {
            WeightedWindow w = sieve_dk(sieve_N, sieve_k);
            detail::Sink sink(sieve_out, out);
            detail::print_window(sink.get(), w, static_cast<u64>(sieve_k), sieve_format);
            return 0;
        }

        if (*loc_cmd) {
            IntervalBox box = IntervalBox::parse(loc_box);
            WeightedWindow w = sieve_localized(loc_N, box);
            detail::Sink sink(loc_out, out);
            detail::print_window(sink.get(), w, static_cast<u64>(box.k()), loc_format);
            return 0;
        }

        if (*hoo_cmd) {
            if (hoo_divisors) {
                std::vector<u64> ds = divisor_list(hoo_n);
                for (size_t i = 0; i < ds.size(); ++i) out << (i ? "," : "") << ds[i];
                out << '\n';
            } else {
                out << hooley_delta(hoo_n) << '\n';
            }
            return 0;
        }

        if (*exp_cmd) {
            AlphaValue alpha = AlphaValue::parse(exp_alpha);
            detail::Sink sink(exp_out, out);
            std::ostream& os = sink.get();

            if (!exp_geom.empty()) {
                unsigned long long t = 0, A = 0, B = 0;
                if (std::sscanf(exp_geom.c_str(), "%llu:%llu:%llu", &t, &A, &B) != 3)
                    throw std::invalid_argument("--geom expects 't:A:B'");
                std::complex<double> g = geometric_interval_sum(t, alpha, A, B);
                if (exp_format == "json")
                    os << "{\"re\":" << fmt_shortest(g.real()) << ",\"im\":" << fmt_shortest(g.imag())
                       << "}\n";
                else
                    os << "re=" << fmt_sig12(g.real()) << " im=" << fmt_sig12(g.imag()) << '\n';
                return 0;
            }

            if (exp_N == 0) throw std::invalid_argument("expsum: --N is required");
            if ((exp_k != 0) == (!exp_box.empty()))
                throw std::invalid_argument("expsum: give exactly one of --k or --box");
            IntervalBox box = exp_box.empty() ? IntervalBox::full(exp_k) : IntervalBox::parse(exp_box);

            std::optional<ExpSumResult> direct, decomposed;
            if (exp_method != "decomposed") {
                WeightedWindow w = sieve_localized(exp_N, box);
                direct = exp_sum_direct(w, alpha);
            }
            if (exp_method != "direct") decomposed = exp_sum_decomposed(exp_N, box, alpha);

            if (exp_format == "json") {
                os << "{";
                if (direct) { os << "\"direct\":"; write_expsum_json(os, *direct); }
                if (direct && decomposed) os << ",";
                if (decomposed) { os << "\"decomposed\":"; write_expsum_json(os, *decomposed); }
                if (direct && decomposed)
                    os << ",\"abs_diff\":" << fmt_shortest(std::abs(direct->value - decomposed->value));
                os << "}\n";
            } else {
                if (direct) detail::print_expsum_line(os, "direct", *direct);
                if (decomposed) detail::print_expsum_line(os, "decomposed", *decomposed);
                if (direct && decomposed)
                    os << "abs_diff=" << fmt_sig12(std::abs(direct->value - decomposed->value)) << '\n';
            }
            return 0;
        }

        if (*chain_cmd) {
            AlphaValue alpha = AlphaValue::parse(chain_alpha);
            double bound = chain_bound(chain_N, chain_k, alpha);
            out << "chain=" << fmt_sig12(bound) << '\n';
            if (chain_eps >= 0.0) {
                u64 q = chain_q;
                if (q == 0) {
                    if (!alpha.is_rational())
                        throw std::invalid_argument("chain: --q is required for a real alpha envelope");
                    q = alpha.denominator();
                }
                EnvelopeParams params(chain_eps, 1.0);
                out << "envelope_core=" << fmt_sig12(envelope_core(chain_N, q, chain_k)) << '\n';
                out << "envelope=" << fmt_sig12(envelope(chain_N, q, chain_k, params)) << '\n';
                out << "in_regime=" << (regime_flag(chain_N, q, chain_k) ? 1 : 0) << '\n';
            }
            return 0;
        }

        if (*apx_cmd) {
            if (apx_farey) {
                for (const ReducedFraction& f : farey_grid(apx_Q)) out << f.str() << '\n';
                return 0;
            }
            if (!std::isnan(apx_dist)) {
                out << fmt_sig12(dist_to_nearest_int(apx_dist)) << '\n';
                return 0;
            }
            if (apx_alpha.empty())
                throw std::invalid_argument("approx: --alpha is required for this mode");
            AlphaValue alpha = AlphaValue::parse(apx_alpha);
            if (apx_inverse) {
                if (!alpha.is_rational())
                    throw std::invalid_argument("approx --inverse: alpha must be 'a/q'");
                out << mod_inverse(alpha.numerator(), alpha.denominator()) << '\n';
                return 0;
            }
            if (apx_residue_t > 0) {
                if (!alpha.is_rational())
                    throw std::invalid_argument("approx --residue: alpha must be 'a/q'");
                out << residue_norm(apx_residue_t, alpha.fraction()) << '\n';
                return 0;
            }
            if (apx_convergents) {
                std::vector<ReducedFraction> cs =
                    alpha.is_rational() ? convergents(alpha.fraction(), apx_Q)
                                        : convergents(alpha.value(), apx_Q);
                for (const ReducedFraction& f : cs) out << f.str() << '\n';
                return 0;
            }
            ApproxWitness wit = dirichlet_approx(alpha.value(), apx_Q);
            out << "witness=" << wit.fraction.str() << '\n';
            out << "error=" << fmt_sig12(wit.error) << '\n';
            out << "bound=" << fmt_sig12(wit.bound) << '\n';
            return 0;
        }

        if (*scan_cmd) {
            GridSpec spec = GridSpec::default_grid();
            if (!scan_ks.empty()) {
                GridSpec defaults = GridSpec::default_grid();
                spec.plans.clear();
                for (int k : scan_ks) {
                    KPlan plan;
                    plan.k = k;
                    if (!scan_Ns.empty()) {
                        plan.Ns = scan_Ns;
                    } else {
                        bool found = false;
                        for (const KPlan& d : defaults.plans)
                            if (d.k == k) { plan.Ns = d.Ns; found = true; }
                        if (!found)
                            throw std::invalid_argument("scan: no default N list for k=" +
                                                        std::to_string(k) + "; give --N");
                    }
                    spec.plans.push_back(std::move(plan));
                }
            } else if (!scan_Ns.empty()) {
                throw std::invalid_argument("scan: --N requires --k");
            }
            spec.qmax = scan_qmax;
            spec.random_boxes = scan_boxes;
            spec.epsilon = scan_eps;
            spec.seed = scan_seed;
            spec.direct_cap = scan_cap;
            spec.perturb_pairs = scan_perturb;
            spec.threads = scan_threads;

            ScanOutput so = scan(spec);
            for (const std::string& s : so.skipped) err << "skipped: " << s << '\n';

            detail::Sink sink(scan_out, out);
            std::ostream& os = sink.get();
            if (scan_format == "json") {
                os << "{\"manifest\":";
                write_manifest_json(os, spec, so);
                os << ",\"records\":[";
                for (size_t i = 0; i < so.records.size(); ++i) {
                    if (i) os << ',';
                    detail::write_record_json(os, so.records[i], scan_timings);
                }
                os << "]}\n";
            } else if (scan_format == "table") {
                os << "records=" << so.records.size() << '\n';
                if (!so.records.empty()) {
                    ChainVerdict v = verify_chain(so.records);
                    os << v.summary() << '\n';
                    try {
                        ConstantReport rep = constant_report(so.records, EnvelopeParams(spec.epsilon, 1.0));
                        os << rep.table();
                    } catch (const std::invalid_argument& e) {
                        err << "note: " << e.what() << '\n';
                    }
                }
            } else {
                write_records_csv(os, so.records, scan_timings);
            }
            if (!scan_out.empty()) {
                std::ofstream mf(scan_out + ".manifest.json", std::ios::binary);
                if (!mf) throw std::invalid_argument("cannot open manifest file");
                write_manifest_json(mf, spec, so);
                mf << '\n';
            }
            return 0;
        }

        if (*rep_cmd) {
            std::ifstream in(rep_in, std::ios::binary);
            if (!in) throw std::invalid_argument("cannot open records file '" + rep_in + "'");
            std::vector<ScanRecord> records = read_records_csv(in);
            detail::Sink sink(rep_out, out);
            std::ostream& os = sink.get();
            ChainVerdict v = verify_chain(records);
            // csv output stays machine-readable; the verdict goes to stderr there
            (rep_format == "csv" ? err : os) << v.summary() << '\n';
            try {
                ConstantReport rep = constant_report(records, EnvelopeParams());
                os << (rep_format == "csv" ? rep.csv() : rep.table());
            } catch (const std::invalid_argument& e) {
                err << "note: " << e.what() << '\n';
            }
            if (!v.pass) {
                err << "verification failure: chain bound violated\n";
                return 2;
            }
            return 0;
        }

        err << "error: no subcommand given\n" << app.help();
        return 1;
    } catch (const verification_error& e) {
        err << "verification failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace divsum::cli
