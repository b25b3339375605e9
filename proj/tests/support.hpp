#pragma once

// Shared fixtures and independent reference computations for the test suite.

#include "adaptqn/adaptqn.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace adaptqn::test {

/// Central-difference gradient of `f`, h = 1e-6 scaled by max(1, |x_i|).
inline Vector fd_gradient(const Objective& f, const Vector& x, double h = 1e-6) {
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x[i]));
        Vector xp = x, xm = x;
        xp[i] += step;
        xm[i] -= step;
        g[i] = (f.value(xp) - f.value(xm)) / (2.0 * step);
    }
    return g;
}

/// (∇f(x + h d) − ∇f(x − h d)) / 2h.
inline Vector fd_hess_vec(const Objective& f, const Vector& x, const Vector& d, double h = 1e-5) {
    return (f.gradient(x + h * d) - f.gradient(x - h * d)) / (2.0 * h);
}

inline double rel_err(const Vector& a, const Vector& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
}

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> normal(0.0, scale);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = normal(rng);
    }
    return v;
}

/// Random SPD matrix BᵀB + shift·I, built without the library's generator.
inline Matrix random_spd(Eigen::Index n, std::mt19937_64& rng, double shift = 0.5) {
    Matrix b(n, n);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            b(i, j) = normal(rng);
        }
    }
    return b.transpose() * b / static_cast<double>(n) + shift * Matrix::Identity(n, n);
}

/// Textbook dense BFGS inverse update, written as the triple product.
inline Matrix bfgs_triple_product(const Matrix& h, const Vector& s, const Vector& y) {
    const double r = 1.0 / s.dot(y);
    const Matrix i = Matrix::Identity(h.rows(), h.cols());
    const Matrix left = i - r * s * y.transpose();
    const Matrix right = i - r * y * s.transpose();
    return left * h * right + r * s * s.transpose();
}

/// The logistic problem shared by the driver tests and the acceptance run.
inline const LogisticObjective& desk_logistic() {
    static const LogisticObjective obj(synth_logistic(500, 50, 42, 1.0));
    return obj;
}

inline const ReferenceOptimum& desk_reference() {
    static const ReferenceOptimum ref = solve_reference(desk_logistic());
    return ref;
}

}  // namespace adaptqn::test
