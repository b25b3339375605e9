#pragma once

/// \file steps.hpp
///
/// Step-size rules: curvature-adaptive, constant, Armijo–Wolfe line search and
/// hybrid candidate selection with adaptive fallback.

#include "adaptqn/errors.hpp"
#include "adaptqn/oracles.hpp"
#include "adaptqn/sc_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace adaptqn {

struct Adaptive {};

struct Constant {
    double alpha = 1.0;
};

struct ArmijoWolfe {
    double c1 = 0.1;
    double c2 = 0.75;
    std::size_t max_evals = 25;
};

struct Hybrid {
    std::vector<double> candidates{1.0, 0.25, 0.0625};
    double c1 = 0.1;
};

using StepRule = std::variant<Adaptive, Constant, ArmijoWolfe, Hybrid>;

enum class StepKind { none, adaptive, constant, line_search, hybrid_candidate, hybrid_fallback };

inline const char* to_string(StepKind kind) {
    switch (kind) {
        case StepKind::none: return "none";
        case StepKind::adaptive: return "adaptive";
        case StepKind::constant: return "constant";
        case StepKind::line_search: return "line_search";
        case StepKind::hybrid_candidate: return "hybrid_candidate";
        case StepKind::hybrid_fallback: return "hybrid_fallback";
    }
    return "unknown";
}

/// Chosen step plus the oracle calls spent choosing it. When the rule already
/// evaluated f or g at x + t·d they are handed back so the caller can reuse
/// them.
struct StepOutcome {
    double t = 0.0;
    StepKind kind = StepKind::none;
    std::size_t evals_f = 0;
    std::size_t evals_g = 0;
    std::size_t evals_hv = 0;
    std::optional<AdaptiveQuantities> adaptive;  ///< set when δ was computed
    bool budget_warning = false;                 ///< line search ran out of evaluations
    bool approximate_armijo = false;             ///< accepted at the f-rounding floor, see armijo_wolfe_search
    std::optional<double> f_new;
    std::optional<Vector> g_new;
};

/// f1 ≤ f0 + c1·t·gd (inclusive).
inline bool armijo_check(double f0, double f1, double t, double gd, double c1) {
    return f1 <= f0 + c1 * t * gd;
}

/// gd1 ≥ c2·gd0.
inline bool wolfe_check(double gd1, double gd0, double c2) {
    return gd1 >= c2 * gd0;
}

/// δ = √(dᵀGd) from a single Hessian-vector product, then t = ρ/((ρ+δ)δ).
inline AdaptiveQuantities adaptive_step_size(const Objective& oracle, const Vector& x, const Vector& d, double rho) {
    const double curvature = d.dot(oracle.hess_vec(x, d));
    if (!(curvature > 0.0)) {
        throw CurvatureError("d'Gd = " + std::to_string(curvature) + " is not positive");
    }
    return make_adaptive_quantities(rho, std::sqrt(curvature));
}

/// Inexact line search for a step satisfying Armijo(c1) and Wolfe(c2).
///
/// Starts at t = 1. A trial that fails Armijo becomes the upper end of the
/// bracket; one that passes Armijo but fails Wolfe becomes the lower end, and
/// t doubles until an upper end exists. Inside a bracket the next trial is the
/// minimizer of the quadratic through (lo, f_lo, f'_lo) and (hi, f_hi),
/// clamped to the middle 80% of the bracket. Each trial costs one f
/// evaluation and, if it passes Armijo, one g evaluation.
///
/// Close to a minimizer the predicted decrease c1·t·|gd| can fall below the
/// rounding error of f itself. A trial whose f agrees with f0 to within
/// kRoundingSlack·eps·(1+|f0|) is then judged by its slope instead:
/// c2·gd ≤ gd(t) ≤ (2·c1 − 1)·gd, which implies Armijo for a quadratic model.
/// Such steps are returned with `approximate_armijo` set. In that regime a
/// trial with negative slope extends the bracket from below instead of
/// shrinking it.
inline constexpr double kRoundingSlack = 64.0;

inline StepOutcome armijo_wolfe_search(const Objective& oracle, const Vector& x, const Vector& d, double f0, double gd,
                                       const ArmijoWolfe& params) {
    if (!(gd < 0.0)) {
        throw DomainError("armijo_wolfe_search requires a descent direction (g'd < 0)");
    }
    StepOutcome out;
    out.kind = StepKind::line_search;

    double lo = 0.0, f_lo = f0, gd_lo = gd;
    double hi = std::numeric_limits<double>::infinity(), f_hi = 0.0;
    double t = 1.0;

    std::optional<double> best_t, best_f;
    std::optional<Vector> best_g;
    const double f_noise = kRoundingSlack * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0));

    for (std::size_t trial = 0; trial < params.max_evals; ++trial) {
        const Vector xt = x + t * d;
        const double ft = oracle.value(xt);
        ++out.evals_f;

        const bool armijo = std::isfinite(ft) && armijo_check(f0, ft, t, gd, params.c1);
        bool slope_says_short = false;
        if (!armijo && std::isfinite(ft) && std::abs(ft - f0) <= f_noise) {
            Vector gt = oracle.gradient(xt);
            ++out.evals_g;
            const double gdt = gt.dot(d);
            if (wolfe_check(gdt, gd, params.c2) && gdt <= (2.0 * params.c1 - 1.0) * gd) {
                out.t = t;
                out.f_new = ft;
                out.g_new = std::move(gt);
                out.approximate_armijo = true;
                return out;
            }
            if (gdt < 0.0) {
                // Still descending: the minimizer along d lies beyond t.
                slope_says_short = true;
                lo = t;
                f_lo = ft;
                gd_lo = gdt;
            }
        }
        if (!armijo && !slope_says_short) {
            hi = t;
            f_hi = ft;
        } else if (armijo) {
            Vector gt = oracle.gradient(xt);
            ++out.evals_g;
            const double gdt = gt.dot(d);
            if (!best_f || ft < *best_f) {
                best_t = t;
                best_f = ft;
                best_g = gt;
            }
            if (wolfe_check(gdt, gd, params.c2)) {
                out.t = t;
                out.f_new = ft;
                out.g_new = std::move(gt);
                return out;
            }
            lo = t;
            f_lo = ft;
            gd_lo = gdt;
        }

        if (std::isinf(hi)) {
            t = 2.0 * t;
            continue;
        }
        const double width = hi - lo;
        double next = lo + 0.5 * width;
        if (std::isfinite(f_hi)) {
            const double curv = (f_hi - f_lo - gd_lo * width) / (width * width);
            if (curv > 0.0) {
                next = lo - gd_lo / (2.0 * curv);
            }
        } else {
            next = lo;
        }
        t = std::clamp(next, lo + 0.1 * width, lo + 0.9 * width);
    }

    if (!best_t) {
        throw LineSearchError("no Armijo-satisfying step within " + std::to_string(params.max_evals) +
                              " evaluations");
    }
    out.t = *best_t;
    out.f_new = best_f;
    out.g_new = std::move(best_g);
    out.budget_warning = true;
    return out;
}

/// Tries `candidates` in order and returns the first passing Armijo(c1);
/// falls back to the adaptive step when none does.
inline StepOutcome hybrid_select(const Objective& oracle, const Vector& x, const Vector& d, double f0, double gd,
                                 double rho, const std::vector<double>& candidates, double c1) {
    if (!(gd < 0.0)) {
        throw DomainError("hybrid_select requires a descent direction (g'd < 0)");
    }
    if (!(rho > 0.0)) {
        throw DomainError("hybrid_select requires rho > 0");
    }
    StepOutcome out;
    for (const double t : candidates) {
        const double ft = oracle.value(x + t * d);
        ++out.evals_f;
        if (std::isfinite(ft) && armijo_check(f0, ft, t, gd, c1)) {
            out.t = t;
            out.kind = StepKind::hybrid_candidate;
            out.f_new = ft;
            return out;
        }
    }
    const AdaptiveQuantities q = adaptive_step_size(oracle, x, d, rho);
    ++out.evals_hv;
    out.t = q.step;
    out.kind = StepKind::hybrid_fallback;
    out.adaptive = q;
    return out;
}

/// Dispatches on `rule`. `f0` is only read by the rules that test Armijo.
inline StepOutcome choose_step(const StepRule& rule, const Objective& oracle, const Vector& x, const Vector& d,
                               double f0, double gd, double rho) {
    if (std::holds_alternative<Adaptive>(rule)) {
        StepOutcome out;
        const AdaptiveQuantities q = adaptive_step_size(oracle, x, d, rho);
        out.t = q.step;
        out.kind = StepKind::adaptive;
        out.evals_hv = 1;
        out.adaptive = q;
        return out;
    }
    if (const auto* c = std::get_if<Constant>(&rule)) {
        StepOutcome out;
        out.t = c->alpha;
        out.kind = StepKind::constant;
        return out;
    }
    if (const auto* ls = std::get_if<ArmijoWolfe>(&rule)) {
        return armijo_wolfe_search(oracle, x, d, f0, gd, *ls);
    }
    const auto& hybrid = std::get<Hybrid>(rule);
    return hybrid_select(oracle, x, d, f0, gd, rho, hybrid.candidates, hybrid.c1);
}

inline std::string step_rule_name(const StepRule& rule) {
    struct Namer {
        std::string operator()(const Adaptive&) const { return "adaptive"; }
        std::string operator()(const Constant&) const { return "constant"; }
        std::string operator()(const ArmijoWolfe&) const { return "armijo-wolfe"; }
        std::string operator()(const Hybrid&) const { return "hybrid"; }
    };
    return std::visit(Namer{}, rule);
}

}  // namespace adaptqn
