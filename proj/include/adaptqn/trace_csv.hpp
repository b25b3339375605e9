#pragma once

/// \file trace_csv.hpp
///
/// CSV serialization of traces and benchmark summaries. Floats use %.17g so
/// values round-trip; absent optionals become empty fields.

#include "adaptqn/driver.hpp"

#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace adaptqn {

inline constexpr const char* kTraceCsvHeader =
    "k,f,gnorm,t,eta,step_kind,evals_f,evals_g,evals_hv,elapsed_s,log_gap,err_ratio";

inline constexpr const char* kSummaryCsvHeader =
    "method,identity_scaling,iters,final_gnorm,termination,iters_until_t_near_1";

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string{};
}

inline std::string trace_csv_row(const IterationRecord& r) {
    std::string row;
    row += std::to_string(r.k);
    row += ',' + format_double(r.f);
    row += ',' + format_double(r.gnorm);
    row += ',' + format_optional(r.t);
    row += ',' + format_optional(r.eta);
    row += ',';
    row += to_string(r.step_kind);
    row += ',' + std::to_string(r.cum_evals_f);
    row += ',' + std::to_string(r.cum_evals_g);
    row += ',' + std::to_string(r.cum_evals_hv);
    row += ',' + format_double(r.elapsed);
    row += ',' + format_optional(r.log_gap);
    row += ',' + format_optional(r.err_ratio);
    return row;
}

inline void write_trace_csv(std::ostream& out, const Trace& trace) {
    out << kTraceCsvHeader << '\n';
    for (const auto& r : trace.records) {
        out << trace_csv_row(r) << '\n';
    }
}

struct SummaryRow {
    std::string method;
    std::string identity_scaling;  ///< "on", "off" or "n/a"
    std::size_t iters = 0;
    double final_gnorm = 0.0;
    std::string termination;
    std::optional<std::size_t> iters_until_t_near_1;
};

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << kSummaryCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.method << ',' << r.identity_scaling << ',' << r.iters << ',' << format_double(r.final_gnorm) << ','
            << r.termination << ',' << (r.iters_until_t_near_1 ? std::to_string(*r.iters_until_t_near_1) : "")
            << '\n';
    }
}

}  // namespace adaptqn
