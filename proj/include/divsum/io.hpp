// Serialization helpers: deterministic float formatting (shortest
// round-trip for CSV/JSON, 12 significant digits for human tables),
// window weights as CSV/JSON, exponential-sum results as JSON.
#pragma once

#include <charconv>
#include <cstdio>
#include <ostream>
#include <string>

#include "divsum/arith.hpp"
#include "divsum/expsum.hpp"

namespace divsum {

// Shortest representation that round-trips through a double.
inline std::string fmt_shortest(double x) {
    char buf[40];
    std::to_chars_result r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

// Fixed 12-significant-digit form for aligned tables.
inline std::string fmt_sig12(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline void write_window_csv(std::ostream& out, const WeightedWindow& w) {
    out << "n,weight\n";
    const u64 N = w.N();
    std::span<const u64> ws = w.weights();
    for (u64 i = 0; i < N; ++i)
        out << (N + 1 + i) << ',' << ws[i] << '\n';
}

inline void write_window_json(std::ostream& out, const WeightedWindow& w, u64 k) {
    out << "{\"N\":" << w.N() << ",\"k\":" << k << ",\"weights\":[";
    std::span<const u64> ws = w.weights();
    for (u64 i = 0; i < ws.size(); ++i) {
        if (i) out << ',';
        out << ws[i];
    }
    out << "]}";
}

inline void write_expsum_json(std::ostream& out, const ExpSumResult& r) {
    out << "{\"re\":" << fmt_shortest(r.value.real())
        << ",\"im\":" << fmt_shortest(r.value.imag())
        << ",\"method\":\"" << method_name(r.method) << "\""
        << ",\"terms\":" << r.terms << "}";
}

} // namespace divsum
