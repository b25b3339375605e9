#pragma once

/// \file sc_core.hpp
///
/// Scalar kernel for self-concordant step-size analysis. Everything here is a
/// pure function of its arguments.
///
/// For a standard self-concordant, strictly convex f, a point x, a direction
/// d with local norm δ = √(dᵀG(x)d) and a step t ≥ 0:
///
///     f(x+td)      ≥ f(x) + t·gᵀd + δt − log(1 + δt)
///     g(x+td)ᵀd    ≥ gᵀd + δ²t / (1 + δt)
///
/// and, for t·δ < 1,
///
///     f(x+td)      ≤ f(x) + t·gᵀd − δt − log(1 − δt)
///     g(x+td)ᵀd    ≤ gᵀd + δ²t / (1 − δt)
///
/// With ρ = −gᵀd the upper model on f is minimized by t = ρ/((ρ+δ)δ), which
/// guarantees a decrease of at least ω(ρ/δ) where ω(z) = z − log(1+z).

#include "adaptqn/errors.hpp"

#include <cmath>
#include <string>

namespace adaptqn {

/// Per-iteration scalars of the adaptive method.
struct AdaptiveQuantities {
    double rho = 0.0;    ///< gᵀHg = −gᵀd
    double delta = 0.0;  ///< ‖d‖ₓ
    double eta = 0.0;    ///< ρ/δ
    double step = 0.0;   ///< ρ/((ρ+δ)δ)
};

/// Inputs shared by the two function-value models.
struct ScBoundInputs {
    double f0 = 0.0;     ///< f(x)
    double gd = 0.0;     ///< g(x)ᵀd
    double delta = 0.0;  ///< ‖d‖ₓ
    double t = 0.0;      ///< step length along d
};

namespace detail {

/// z − log(1+z) for any z > −1. Uses the alternating series near zero, where
/// the direct form loses all significant digits.
inline double omega_any(double z) {
    if (std::abs(z) < 0.05) {
        // Σ_{k≥2} (−1)^k z^k / k; |z|^19/19 < 1e-26 at the cut-off.
        double term = z * z;
        double sum = 0.0;
        for (int k = 2; k <= 20; ++k) {
            sum += ((k % 2 == 0) ? term : -term) / k;
            term *= z;
        }
        return sum;
    }
    return z - std::log1p(z);
}

inline void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw DomainError(std::string(name) + " is not finite");
    }
}

}  // namespace detail

/// ω(z) = z − log(1+z), the guaranteed per-step decrease of an adaptive step.
inline double omega(double z) {
    detail::require_finite(z, "omega argument");
    if (z < 0.0) {
        throw DomainError("omega requires z >= 0");
    }
    return detail::omega_any(z);
}

/// Curvature-adaptive step ρ/((ρ+δ)δ). Always strictly below 1/δ.
inline double adaptive_step(double rho, double delta) {
    detail::require_finite(rho, "rho");
    detail::require_finite(delta, "delta");
    if (rho <= 0.0) {
        throw DomainError("adaptive_step: rho must be positive (not a descent direction)");
    }
    if (delta <= 0.0) {
        throw DomainError("adaptive_step: delta must be positive (degenerate curvature)");
    }
    return rho / ((rho + delta) * delta);
}

inline AdaptiveQuantities make_adaptive_quantities(double rho, double delta) {
    AdaptiveQuantities q;
    q.rho = rho;
    q.delta = delta;
    q.step = adaptive_step(rho, delta);
    q.eta = rho / delta;
    return q;
}

/// Upper model on f(x+td). Requires t·δ < 1.
inline double sc_upper_f(const ScBoundInputs& b) {
    if (b.t < 0.0) {
        throw DomainError("sc_upper_f requires t >= 0");
    }
    const double u = b.t * b.delta;
    if (!(u < 1.0)) {
        throw DomainError("sc_upper_f requires t*delta < 1");
    }
    return b.f0 + b.t * b.gd + detail::omega_any(-u);
}

/// Lower model on f(x+td).
inline double sc_lower_f(const ScBoundInputs& b) {
    if (b.t < 0.0) {
        throw DomainError("sc_lower_f requires t >= 0");
    }
    return b.f0 + b.t * b.gd + detail::omega_any(b.t * b.delta);
}

/// Lower model on the directional derivative g(x+td)ᵀd.
inline double sc_lower_gd(double gd0, double delta, double t) {
    if (t < 0.0) {
        throw DomainError("sc_lower_gd requires t >= 0");
    }
    return gd0 + delta * delta * t / (1.0 + delta * t);
}

/// Upper model on the directional derivative g(x+td)ᵀd. Requires t·δ < 1.
inline double sc_upper_gd(double gd0, double delta, double t) {
    if (t < 0.0) {
        throw DomainError("sc_upper_gd requires t >= 0");
    }
    const double u = t * delta;
    if (!(u < 1.0)) {
        throw DomainError("sc_upper_gd requires t*delta < 1");
    }
    return gd0 + delta * delta * t / (1.0 - u);
}

/// Multiplier κ²/4 that turns a κ-self-concordant function into a standard one.
inline double standard_scale_factor(double kappa) {
    detail::require_finite(kappa, "kappa");
    if (kappa <= 0.0) {
        throw DomainError("standard_scale_factor requires kappa > 0");
    }
    return kappa * kappa / 4.0;
}

}  // namespace adaptqn
