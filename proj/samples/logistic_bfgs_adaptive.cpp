// Adaptive BFGS on a synthetic logistic-regression problem, printing the
// step size and log gap per iteration.

#include "adaptqn/adaptqn.hpp"

#include <cstdio>

int main() {
    using namespace adaptqn;

    const LogisticObjective objective(synth_logistic(500, 50, 42, 1.0));

    RunConfig config;
    config.direction = BfgsDense{};
    config.step = Adaptive{};
    config.reference = solve_reference(objective);
    const Trace trace = run(config, objective);

    for (const auto& r : trace.records) {
        std::printf("%4zu  f=%.12e  |g|=%.3e  t=%.4f  log_gap=%s\n", r.k, r.f, r.gnorm, r.t.value_or(0.0),
                    format_optional(r.log_gap).c_str());
    }
    std::printf("termination: %s after %zu iterations\n", to_string(trace.termination.reason), trace.iterations());
    return 0;
}
