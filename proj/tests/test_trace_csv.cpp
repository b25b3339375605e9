#include "adaptqn/trace_csv.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

using namespace adaptqn;

TEST(TraceCsv, HeaderAndTerminalRow) {
    Trace tr;
    IterationRecord a;
    a.k = 0;
    a.f = 0.5;
    a.gnorm = 2.0;
    a.t = 0.25;
    a.eta = 3.0;
    a.step_kind = StepKind::adaptive;
    a.cum_evals_f = 1;
    a.cum_evals_g = 1;
    a.log_gap = -1.5;
    a.err_ratio = 0.1;
    IterationRecord b;
    b.k = 1;
    b.f = 0.125;
    b.gnorm = 1e-8;
    b.cum_evals_f = 2;
    b.cum_evals_g = 2;
    b.cum_evals_hv = 1;
    tr.records = {a, b};

    std::ostringstream out;
    write_trace_csv(out, tr);
    const std::string expected =
        "k,f,gnorm,t,eta,step_kind,evals_f,evals_g,evals_hv,elapsed_s,log_gap,err_ratio\n"
        "0,0.5,2,0.25,3,adaptive,1,1,0,0,-1.5,0.10000000000000001\n"
        "1,0.125,1e-08,,,none,2,2,1,0,,\n";
    EXPECT_EQ(out.str(), expected);
}

TEST(TraceCsv, DoublesRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.2250738585072014e-308, 4.9406564584124654e-324}) {
        EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(format_optional(std::nullopt), "");
}

TEST(SummaryCsv, Rows) {
    std::ostringstream out;
    write_summary_csv(out, {{"bfgs-a", "off", 140, 2.5e-8, "grad_tol", 12}, {"gd-a", "n/a", 7, 1.0, "max_iters", {}}});
    EXPECT_EQ(out.str(),
              "method,identity_scaling,iters,final_gnorm,termination,iters_until_t_near_1\n"
              "bfgs-a,off,140,2.4999999999999999e-08,grad_tol,12\n"
              "gd-a,n/a,7,1,max_iters,\n");
}
