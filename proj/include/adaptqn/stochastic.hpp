#pragma once

/// \file stochastic.hpp
///
/// Online least-squares experiments: a seeded Gaussian linear-model sampler,
/// batch-size schedules, and the stochastic loop behind SGD, stochastic
/// Newton and stochastic BFGS with adaptive or constant steps.

#include "adaptqn/directions.hpp"
#include "adaptqn/driver.hpp"
#include "adaptqn/errors.hpp"
#include "adaptqn/oracles.hpp"
#include "adaptqn/sc_core.hpp"
#include "adaptqn/steps.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <variant>

namespace adaptqn {

/// Constant step sizes for the online least-squares runs.
struct ConstantStepTable {
    static constexpr double alpha1 = 1.0 / 140000.0;
    static constexpr double alpha2 = 5e-6;
    static constexpr double alpha3 = 2e-6;
    static constexpr double alpha4 = 1e-6;

    /// `index` in 1..4.
    static double alpha(int index) {
        switch (index) {
            case 1: return alpha1;
            case 2: return alpha2;
            case 3: return alpha3;
            case 4: return alpha4;
            default: throw DomainError("constant step index must be in 1..4");
        }
    }
};

struct ConstantBatch {
    std::size_t size = 1;
};

/// ⌈base · growth^⌊k/period⌋⌉ samples at iteration k.
struct GrowingBatch {
    std::size_t base = 1;
    double growth = 1.05;
    std::size_t period = 50;
};

using BatchSchedule = std::variant<ConstantBatch, GrowingBatch>;

inline std::size_t batch_size(const BatchSchedule& schedule, std::size_t k) {
    if (const auto* c = std::get_if<ConstantBatch>(&schedule)) {
        return std::max<std::size_t>(1, c->size);
    }
    const auto& g = std::get<GrowingBatch>(schedule);
    const auto epochs = static_cast<double>(k / std::max<std::size_t>(1, g.period));
    const double raw = static_cast<double>(g.base) * std::pow(g.growth, epochs);
    // Products such as 100 · 1.05 land a few ulps above an integer.
    const double rounded = std::ceil(raw * (1.0 - 1e-12));
    return std::max<std::size_t>(1, static_cast<std::size_t>(rounded));
}

/// Empirical objective of one realized batch:
///
///     L_S(w) = (1/|S|) Σ (Y_i − X_iᵀw)² + ½λ‖w‖²
class SampledBatchOracle final : public Objective {
public:
    SampledBatchOracle(Matrix features, Vector targets, double lambda)
        : x_(std::move(features)), y_(std::move(targets)), lambda_(lambda) {
        if (x_.rows() != y_.size() || x_.rows() == 0) {
            throw DimensionError("SampledBatchOracle: need one target per nonempty row");
        }
    }

    Eigen::Index dimension() const override { return x_.cols(); }
    bool has_hessian() const override { return true; }

    Eigen::Index batch() const { return x_.rows(); }
    const Matrix& features() const { return x_; }
    const Vector& targets() const { return y_; }

    double value(const Vector& w) const override {
        check_dim(w, "w");
        return (y_ - x_ * w).squaredNorm() / count() + 0.5 * lambda_ * w.squaredNorm();
    }
    Vector gradient(const Vector& w) const override {
        check_dim(w, "w");
        return (-2.0 / count()) * (x_.transpose() * (y_ - x_ * w)) + lambda_ * w;
    }
    Vector hess_vec(const Vector& w, const Vector& d) const override {
        check_dim(w, "w");
        check_dim(d, "d");
        return (2.0 / count()) * (x_.transpose() * (x_ * d)) + lambda_ * d;
    }
    Matrix dense_hessian(const Vector& w) const override {
        check_dim(w, "w");
        Matrix h = (2.0 / count()) * (x_.transpose() * x_);
        h.diagonal().array() += lambda_;
        return h;
    }

private:
    double count() const { return static_cast<double>(x_.rows()); }

    Matrix x_;
    Vector y_;
    double lambda_;
};

/// Draws i.i.d. (X, Y) with X ~ N(0, Σ), Y = Xᵀβ + ε, ε ~ N(0, σ²). Each
/// sample consumes p + 1 standard normals from the seeded stream, in that
/// order.
class OnlineSampler {
public:
    OnlineSampler(const Matrix& sigma, Vector beta, double lambda, std::uint64_t seed, double noise_var = 1.0)
        : beta_(std::move(beta)), lambda_(lambda), noise_sd_(std::sqrt(noise_var)), rng_(seed) {
        if (sigma.rows() != sigma.cols() || sigma.rows() != beta_.size()) {
            throw DimensionError("OnlineSampler: Sigma must be p x p and beta of length p");
        }
        if (noise_var < 0.0) {
            throw DomainError("OnlineSampler: noise variance must be nonnegative");
        }
        factor_ = covariance_factor(sigma);
    }

    Eigen::Index dimension() const { return beta_.size(); }
    double lambda() const { return lambda_; }
    const Matrix& factor() const { return factor_; }

    SampledBatchOracle draw_batch(std::size_t size) {
        if (size < 1) {
            throw DomainError("draw_batch requires size >= 1");
        }
        const Eigen::Index p = dimension();
        const auto rows = static_cast<Eigen::Index>(size);
        Matrix z(rows, p);
        Vector noise(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < p; ++j) {
                z(i, j) = normal_(rng_);
            }
            noise[i] = normal_(rng_);
        }
        Matrix xs = z * factor_.transpose();
        Vector ys = xs * beta_ + noise_sd_ * noise;
        return SampledBatchOracle(std::move(xs), std::move(ys), lambda_);
    }

private:
    /// L with LLᵀ = Σ. Falls back to a jittered Cholesky and then to a
    /// clipped eigen-factor for singular Σ.
    static Matrix covariance_factor(const Matrix& sigma) {
        const Matrix sym = 0.5 * (sigma + sigma.transpose());
        Eigen::LLT<Matrix> llt(sym);
        if (llt.info() == Eigen::Success) {
            return llt.matrixL();
        }
        const double jitter = 1e-10 * std::max(1.0, sym.diagonal().cwiseAbs().maxCoeff());
        Matrix jittered = sym;
        jittered.diagonal().array() += jitter;
        Eigen::LLT<Matrix> llt2(jittered);
        if (llt2.info() == Eigen::Success) {
            return llt2.matrixL();
        }
        Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
        if (eig.info() != Eigen::Success) {
            throw NumericalError("OnlineSampler: cannot factor Sigma");
        }
        const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return eig.eigenvectors() * root.asDiagonal();
    }

    Vector beta_;
    double lambda_;
    double noise_sd_;
    Matrix factor_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Dense inverse-Hessian update from the pair (d, Ĝd). Returns false and
/// leaves H alone when dᵀĜd is not safely positive.
inline bool sbfgs_pair_update(Matrix& h, const Vector& d, const Vector& gd_hat) {
    const double curvature = d.dot(gd_hat);
    if (!(curvature > kCurvatureSkipRatio * d.norm() * gd_hat.norm())) {
        return false;
    }
    h = bfgs_update_dense(h, d, gd_hat);
    return true;
}

enum class StochasticMethod { sgd, newton, bfgs };

struct StochasticConfig {
    StochasticMethod method = StochasticMethod::bfgs;
    BatchSchedule schedule = GrowingBatch{};
    StepRule step = Adaptive{};  ///< Adaptive or Constant only
    std::size_t max_iters = 3000;
    double max_seconds = std::numeric_limits<double>::infinity();
    std::optional<Vector> x0;
    /// Evaluate the sampled objective before and after each step (uncounted).
    bool check_batch_decrease = false;
};

/// Runs one stochastic method. f, gnorm, log_gap and err_ratio in the trace
/// are measured on the expected objective against its exact minimizer; t, η
/// and δ come from the sampled batch.
inline Trace stochastic_run(const StochasticConfig& config, OnlineSampler& sampler,
                            const OnlineLsExpectedObjective& expected) {
    using Clock = std::chrono::steady_clock;
    const auto start = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - start).count(); };

    const Eigen::Index p = expected.dimension();
    Trace trace;
    trace.config.step = config.step;
    trace.config.max_iters = config.max_iters;
    trace.config.max_seconds = config.max_seconds;
    trace.config.x0 = config.x0;
    switch (config.method) {
        case StochasticMethod::sgd: trace.config.direction = GradientDescent{}; break;
        case StochasticMethod::newton: trace.config.direction = Newton{}; break;
        case StochasticMethod::bfgs: trace.config.direction = BfgsDense{}; break;
    }

    const bool adaptive = std::holds_alternative<Adaptive>(config.step);
    if (!adaptive && !std::holds_alternative<Constant>(config.step)) {
        trace.records.push_back({});
        trace.termination = {TerminationReason::numerical_error, "stochastic runs support adaptive or constant steps"};
        return trace;
    }
    if (sampler.dimension() != p || (config.x0 && config.x0->size() != p)) {
        trace.records.push_back({});
        trace.termination = {TerminationReason::numerical_error, "dimension mismatch"};
        return trace;
    }

    ReferenceOptimum ref;
    ref.x = online_ls_minimizer(expected);
    ref.f = expected.value(ref.x);
    trace.config.reference = ref;

    Vector x = config.x0 ? *config.x0 : Vector::Zero(p);
    Matrix h = Matrix::Identity(p, p);
    std::size_t evals_g = 0, evals_hv = 0;

    for (std::size_t k = 0;; ++k) {
        IterationRecord rec;
        rec.k = k;
        rec.f = expected.value(x);
        rec.gnorm = expected.gradient(x).norm();
        rec.cum_evals_g = evals_g;
        rec.cum_evals_hv = evals_hv;
        rec.elapsed = elapsed();
        rec.log_gap = detail::log_gap(rec.f, trace.config.reference);
        rec.err_dist = (x - ref.x).norm();

        if (!std::isfinite(rec.f) || !std::isfinite(rec.gnorm)) {
            trace.termination = {TerminationReason::numerical_error, "iterates diverged"};
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
        try {
            const SampledBatchOracle batch = sampler.draw_batch(batch_size(config.schedule, k));
            const Vector g = batch.gradient(x);
            ++evals_g;
            if (g.squaredNorm() == 0.0) {
                // Stationary for this sample: nothing to do but take a zero step.
                rec.t = 0.0;
                rec.step_kind = adaptive ? StepKind::adaptive : StepKind::constant;
                rec.err_ratio = rec.err_dist > 0.0 ? std::optional<double>(1.0) : std::nullopt;
                trace.records.push_back(rec);
                continue;
            }

            Vector d;
            switch (config.method) {
                case StochasticMethod::sgd: d = -g; break;
                case StochasticMethod::newton: {
                    Eigen::LLT<Matrix> llt(batch.dense_hessian(x));
                    if (llt.info() != Eigen::Success) {
                        throw NumericalError("sampled Hessian is not positive definite");
                    }
                    d = llt.solve(-g);
                    break;
                }
                case StochasticMethod::bfgs: d = -(h * g); break;
            }
            const double rho = -g.dot(d);
            if (!(rho > 0.0)) {
                throw CurvatureError("positive definiteness lost: g'Hg = " + std::to_string(rho));
            }

            const bool need_hv = adaptive || config.method == StochasticMethod::bfgs;
            Vector hv;
            if (need_hv) {
                hv = batch.hess_vec(x, d);
                ++evals_hv;
            }

            double t = 0.0;
            if (adaptive) {
                const double curvature = d.dot(hv);
                if (!(curvature > 0.0)) {
                    throw CurvatureError("d'Gd is not positive on the sampled batch");
                }
                const AdaptiveQuantities q = make_adaptive_quantities(rho, std::sqrt(curvature));
                t = q.step;
                rec.eta = q.eta;
                rec.delta = q.delta;
                rec.step_kind = StepKind::adaptive;
            } else {
                t = std::get<Constant>(config.step).alpha;
                rec.step_kind = StepKind::constant;
            }
            rec.t = t;
            rec.rho = rho;
            x_next = x + t * d;

            if (config.check_batch_decrease) {
                rec.batch_f = batch.value(x);
                rec.batch_f_next = batch.value(x_next);
            }
            if (config.method == StochasticMethod::bfgs && !sbfgs_pair_update(h, d, hv)) {
                ++trace.skipped_pairs;
            }
        } catch (const std::exception& e) {
            trace.termination = {TerminationReason::numerical_error, e.what()};
            trace.records.push_back(rec);
            break;
        }

        if (rec.err_dist && *rec.err_dist > 0.0) {
            rec.err_ratio = (x_next - ref.x).norm() / *rec.err_dist;
        }
        rec.f_next = expected.value(x_next);
        trace.records.push_back(rec);
        x = std::move(x_next);
    }
    return trace;
}

}  // namespace adaptqn
