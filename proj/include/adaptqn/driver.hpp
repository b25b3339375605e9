#pragma once

/// \file driver.hpp
///
/// Deterministic iteration loop x_{k+1} = x_k + t_k·d_k over any combination
/// of direction engine and step rule, with per-iteration tracing and a
/// post-run convergence-rate report.

#include "adaptqn/directions.hpp"
#include "adaptqn/errors.hpp"
#include "adaptqn/oracles.hpp"
#include "adaptqn/steps.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace adaptqn {

/// Known minimizer used for log-gap and error-ratio columns.
struct ReferenceOptimum {
    Vector x;
    double f = 0.0;
};

struct RunConfig {
    DirectionRule direction = GradientDescent{};
    StepRule step = Adaptive{};
    double grad_tol = 1e-7;
    std::size_t max_iters = 10000;
    double max_seconds = std::numeric_limits<double>::infinity();
    std::optional<Vector> x0;  ///< zero vector when absent
    std::optional<ReferenceOptimum> reference;
    /// Dense BFGS is refused above this dimension.
    Eigen::Index dense_bfgs_max_dim = 5000;
    /// Keep x_k and d_k for every iteration in the trace.
    bool keep_iterates = false;
};

enum class TerminationReason { grad_tol, max_iters, time_budget, numerical_error };

inline const char* to_string(TerminationReason r) {
    switch (r) {
        case TerminationReason::grad_tol: return "grad_tol";
        case TerminationReason::max_iters: return "max_iters";
        case TerminationReason::time_budget: return "time_budget";
        case TerminationReason::numerical_error: return "numerical_error";
    }
    return "unknown";
}

struct Termination {
    TerminationReason reason = TerminationReason::max_iters;
    std::string detail;
};

/// State at x_k and, unless k is terminal, the step taken from it.
struct IterationRecord {
    std::size_t k = 0;
    double f = 0.0;
    double gnorm = 0.0;
    std::optional<double> t;
    std::optional<double> eta;
    StepKind step_kind = StepKind::none;
    std::size_t cum_evals_f = 0;  ///< evaluations spent up to and including x_k
    std::size_t cum_evals_g = 0;
    std::size_t cum_evals_hv = 0;
    double elapsed = 0.0;  ///< seconds since the run started
    std::optional<double> log_gap;
    std::optional<double> err_ratio;  ///< ‖x_{k+1} − x*‖ / ‖x_k − x*‖

    // Not serialized; kept for diagnostics and property checks.
    std::optional<double> rho;
    std::optional<double> delta;
    std::optional<double> f_next;
    std::optional<double> gd_next;  ///< g(x_{k+1})ᵀd_k
    std::optional<double> err_dist;  ///< ‖x_k − x*‖
    std::optional<double> batch_f;       ///< stochastic runs: sampled objective at x_k
    std::optional<double> batch_f_next;  ///< stochastic runs: same sample at x_{k+1}
    bool line_search_warning = false;
};

struct Trace {
    RunConfig config;
    std::vector<IterationRecord> records;
    Termination termination;
    std::size_t skipped_pairs = 0;
    std::size_t monotone_violations = 0;
    std::vector<Vector> iterates;   ///< only with keep_iterates
    std::vector<Vector> directions;  ///< only with keep_iterates

    /// Steps taken (index of the final record).
    std::size_t iterations() const { return records.empty() ? 0 : records.back().k; }
    const IterationRecord& last() const { return records.back(); }
};

/// Relative slack used when checking that f never increases.
inline constexpr double kMonotoneTolerance = 1e-10;

inline bool is_monotone_rule(const StepRule& step) {
    return !std::holds_alternative<Constant>(step);
}

namespace detail {

inline std::optional<double> log_gap(double f, const std::optional<ReferenceOptimum>& ref) {
    if (!ref) {
        return std::nullopt;
    }
    const double gap = f - ref->f;
    if (!(gap > 0.0)) {
        return std::nullopt;
    }
    return std::log10(gap);
}

}  // namespace detail

/// Runs the method described by `config` on `oracle`. Errors end the run with
/// TerminationReason::numerical_error; nothing is thrown past this boundary
/// except allocation failure.
inline Trace run(const RunConfig& config, const Objective& oracle) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

    Trace trace;
    trace.config = config;
    const Eigen::Index n = oracle.dimension();

    auto fail_before_start = [&](const std::string& why) {
        IterationRecord rec;
        rec.f = std::numeric_limits<double>::quiet_NaN();
        rec.gnorm = std::numeric_limits<double>::quiet_NaN();
        trace.records.push_back(rec);
        trace.termination = {TerminationReason::numerical_error, why};
        return trace;
    };

    if (config.x0 && config.x0->size() != n) {
        return fail_before_start("x0 has dimension " + std::to_string(config.x0->size()) + ", oracle has " +
                                 std::to_string(n));
    }
    if (config.reference && config.reference->x.size() != n) {
        return fail_before_start("reference optimum has the wrong dimension");
    }
    if (!(config.grad_tol > 0.0)) {
        return fail_before_start("grad_tol must be positive");
    }
    if (std::holds_alternative<Newton>(config.direction) && !oracle.has_hessian()) {
        return fail_before_start("Newton direction requires an oracle with a dense Hessian");
    }
    if (std::holds_alternative<BfgsDense>(config.direction) && n > config.dense_bfgs_max_dim) {
        return fail_before_start("dense BFGS refused for n = " + std::to_string(n) +
                                 " (limit " + std::to_string(config.dense_bfgs_max_dim) +
                                 "); use BfgsTwoLoopUnlimited");
    }

    std::optional<InverseHessianState> state;
    try {
        state.emplace(config.direction, n);
    } catch (const std::exception& e) {
        return fail_before_start(e.what());
    }

    Vector x = config.x0 ? *config.x0 : Vector::Zero(n);
    std::size_t evals_f = 0, evals_g = 0, evals_hv = 0;
    double f = 0.0;
    Vector g;
    try {
        f = oracle.value(x);
        ++evals_f;
        g = oracle.gradient(x);
        ++evals_g;
    } catch (const std::exception& e) {
        return fail_before_start(e.what());
    }

    const auto& ref = config.reference;
    for (std::size_t k = 0;; ++k) {
        IterationRecord rec;
        rec.k = k;
        rec.f = f;
        rec.gnorm = g.norm();
        rec.cum_evals_f = evals_f;
        rec.cum_evals_g = evals_g;
        rec.cum_evals_hv = evals_hv;
        rec.elapsed = elapsed();
        rec.log_gap = detail::log_gap(f, ref);
        if (ref) {
            rec.err_dist = (x - ref->x).norm();
        }

        if (!std::isfinite(f) || !std::isfinite(rec.gnorm)) {
            trace.termination = {TerminationReason::numerical_error, "non-finite objective or gradient"};
            trace.records.push_back(rec);
            break;
        }
        if (rec.gnorm < config.grad_tol) {
            trace.termination = {TerminationReason::grad_tol, {}};
            trace.records.push_back(rec);
            break;
        }
        if (k >= config.max_iters) {
            trace.termination = {TerminationReason::max_iters, {}};
            trace.records.push_back(rec);
            break;
        }
        if (rec.elapsed >= config.max_seconds) {
            trace.termination = {TerminationReason::time_budget, {}};
            trace.records.push_back(rec);
            break;
        }

        Vector x_next;
        double f_next = 0.0;
        Vector g_next;
        Vector d;
        try {
            DirectionResult dir = state->compute_direction(oracle, x, g);
            d = std::move(dir.d);
            const double gd = g.dot(d);
            StepOutcome step = choose_step(config.step, oracle, x, d, f, gd, dir.rho);
            evals_f += step.evals_f;
            evals_g += step.evals_g;
            evals_hv += step.evals_hv;

            x_next = x + step.t * d;
            if (step.f_new) {
                f_next = *step.f_new;
            } else {
                f_next = oracle.value(x_next);
                ++evals_f;
            }
            if (step.g_new) {
                g_next = std::move(*step.g_new);
            } else {
                g_next = oracle.gradient(x_next);
                ++evals_g;
            }

            rec.t = step.t;
            rec.step_kind = step.kind;
            rec.rho = dir.rho;
            if (step.adaptive) {
                rec.eta = step.adaptive->eta;
                rec.delta = step.adaptive->delta;
            }
            rec.f_next = f_next;
            rec.gd_next = g_next.dot(d);
            rec.line_search_warning = step.budget_warning || step.approximate_armijo;
            if (ref && rec.err_dist && *rec.err_dist > 0.0) {
                rec.err_ratio = (x_next - ref->x).norm() / *rec.err_dist;
            }

            state->ingest_pair(step.t * d, g_next - g);
        } catch (const std::exception& e) {
            trace.termination = {TerminationReason::numerical_error, e.what()};
            trace.records.push_back(rec);
            break;
        }

        if (config.keep_iterates) {
            trace.iterates.push_back(x);
            trace.directions.push_back(d);
        }
        trace.records.push_back(rec);
        x = std::move(x_next);
        f = f_next;
        g = std::move(g_next);
    }
    if (config.keep_iterates) {
        trace.iterates.push_back(x);
    }

    trace.skipped_pairs = state->skipped_pairs();
    if (is_monotone_rule(config.step)) {
        for (std::size_t i = 1; i < trace.records.size(); ++i) {
            const double prev = trace.records[i - 1].f;
            if (trace.records[i].f > prev + kMonotoneTolerance * (1.0 + std::abs(prev))) {
                ++trace.monotone_violations;
            }
        }
    }
    return trace;
}

/// High-accuracy minimizer for log-gap columns: damped Newton when the oracle
/// has a dense Hessian of at most `newton_max_dim` rows, line-search BFGS
/// otherwise. Throws NumericalError if the solve ends in an error.
inline ReferenceOptimum solve_reference(const Objective& oracle, double grad_tol = 1e-12,
                                        std::size_t max_iters = 1000, Eigen::Index newton_max_dim = 2000) {
    RunConfig cfg;
    if (oracle.has_hessian() && oracle.dimension() <= newton_max_dim) {
        cfg.direction = Newton{};
    } else {
        cfg.direction = BfgsTwoLoopUnlimited{};
        cfg.step = ArmijoWolfe{};
    }
    cfg.grad_tol = grad_tol;
    cfg.max_iters = max_iters;
    cfg.keep_iterates = true;
    const Trace t = run(cfg, oracle);
    if (t.termination.reason == TerminationReason::numerical_error) {
        throw NumericalError("reference solve failed: " + t.termination.detail);
    }
    return {t.iterates.back(), t.last().f};
}

struct SuperlinearReport {
    /// False for constant-step runs, where t carries no information.
    bool t_statistics_applicable = false;
    /// Smallest k such that |t_j − 1| < 0.1 for at least 80% of j ≥ k.
    std::optional<std::size_t> iters_until_t_near_1;
    /// Error ratios of the measurable tail, oldest first (at most 10).
    std::vector<double> tail_err_ratios;
    /// Last five measurable ratios all below 0.5.
    bool superlinear = false;
};

/// Fraction of remaining steps that must have |t − 1| < 0.1.
inline constexpr double kNearOneFraction = 0.8;
inline constexpr double kNearOneBand = 0.1;

/// Index rule shared by every step rule that reports t.
inline std::optional<std::size_t> iters_until_t_near_one(const std::vector<IterationRecord>& records) {
    std::vector<double> ts;
    for (const auto& r : records) {
        if (r.t) {
            ts.push_back(*r.t);
        }
    }
    std::optional<std::size_t> found;
    std::size_t near = 0;
    for (std::size_t i = ts.size(); i-- > 0;) {
        if (std::abs(ts[i] - 1.0) < kNearOneBand) {
            ++near;
        }
        const auto remaining = static_cast<double>(ts.size() - i);
        if (static_cast<double>(near) >= kNearOneFraction * remaining) {
            found = i;
        }
    }
    return found;
}

/// Requires a reference optimum. A ratio is measurable when its denominator
/// ‖x_k − x*‖ exceeds `floor`·(1 + ‖x*‖).
inline SuperlinearReport superlinear_report(const Trace& trace, double floor = 1e-11) {
    if (!trace.config.reference) {
        throw UnsupportedError("superlinear_report requires a reference optimum");
    }
    SuperlinearReport rep;
    rep.t_statistics_applicable = !std::holds_alternative<Constant>(trace.config.step);
    if (rep.t_statistics_applicable) {
        rep.iters_until_t_near_1 = iters_until_t_near_one(trace.records);
    }

    const double cutoff = floor * (1.0 + trace.config.reference->x.norm());
    std::vector<double> ratios;
    for (const auto& r : trace.records) {
        if (r.err_ratio && r.err_dist && *r.err_dist > cutoff) {
            ratios.push_back(*r.err_ratio);
        }
    }
    const std::size_t keep = std::min<std::size_t>(10, ratios.size());
    rep.tail_err_ratios.assign(ratios.end() - static_cast<std::ptrdiff_t>(keep), ratios.end());
    if (ratios.size() >= 5) {
        rep.superlinear = std::all_of(ratios.end() - 5, ratios.end(), [](double q) { return q < 0.5; });
    }
    return rep;
}

}  // namespace adaptqn
