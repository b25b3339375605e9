#pragma once

/// \file oracles.hpp
///
/// Deterministic objective oracles: value, gradient, Hessian-vector product
/// and (when cheap enough) the dense Hessian. Oracles are immutable after
/// construction and can be shared across threads.

#include "adaptqn/data_io.hpp"
#include "adaptqn/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace adaptqn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Objective {
public:
    virtual ~Objective() = default;

    virtual Eigen::Index dimension() const = 0;
    virtual bool has_hessian() const { return false; }

    virtual double value(const Vector& x) const = 0;
    virtual Vector gradient(const Vector& x) const = 0;
    virtual Vector hess_vec(const Vector& x, const Vector& d) const = 0;

    virtual Matrix dense_hessian(const Vector& /*x*/) const {
        throw UnsupportedError("objective does not provide a dense Hessian");
    }

protected:
    void check_dim(const Vector& v, const char* what) const {
        if (v.size() != dimension()) {
            throw DimensionError(std::string(what) + " has dimension " + std::to_string(v.size()) + ", expected " +
                                 std::to_string(dimension()));
        }
    }
};

namespace detail {

/// log(1 + e^z) without overflow.
inline double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

/// 1/(1 + e^{−z}) evaluated on the non-overflowing branch.
inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace detail

/// B²N/4 with B the largest row norm. Makes the logistic loss standard
/// self-concordant.
inline double logistic_sc_scale(const SparseDataset& data) {
    if (data.rows() == 0) {
        throw DomainError("logistic_sc_scale: empty dataset");
    }
    const double b = max_row_norm(data);
    if (b <= 0.0) {
        throw DomainError("logistic_sc_scale: all rows are zero (B = 0)");
    }
    return b * b * static_cast<double>(data.rows()) / 4.0;
}

/// scale · [ (1/N) Σ log(1 + exp(−y_i x_iᵀw)) + ‖w‖²/(2N) ]
class LogisticObjective final : public Objective {
public:
    enum class Scaling { self_concordant, unit };

    explicit LogisticObjective(SparseDataset data, Scaling scaling = Scaling::self_concordant)
        : data_(std::move(data)) {
        if (data_.rows() == 0) {
            throw DomainError("LogisticObjective: empty dataset");
        }
        row_norm_max_ = max_row_norm(data_);
        scale_ = scaling == Scaling::self_concordant ? logistic_sc_scale(data_) : 1.0;
    }

    Eigen::Index dimension() const override { return data_.cols(); }
    bool has_hessian() const override { return true; }

    double sc_scale() const { return scale_; }
    double max_row_norm_value() const { return row_norm_max_; }
    const SparseDataset& data() const { return data_; }

    double value(const Vector& w) const override {
        check_dim(w, "w");
        const Vector margins = data_.features * w;
        double loss = 0.0;
        for (Eigen::Index i = 0; i < margins.size(); ++i) {
            loss += detail::softplus(-data_.labels[i] * margins[i]);
        }
        return scale_ * (loss + 0.5 * w.squaredNorm()) / samples();
    }

    Vector gradient(const Vector& w) const override {
        check_dim(w, "w");
        const Vector margins = data_.features * w;
        Vector coeff(margins.size());
        for (Eigen::Index i = 0; i < margins.size(); ++i) {
            const double y = data_.labels[i];
            coeff[i] = -y * detail::sigmoid(-y * margins[i]);
        }
        Vector g = data_.features.transpose() * coeff;
        g += w;
        return (scale_ / samples()) * g;
    }

    Vector hess_vec(const Vector& w, const Vector& d) const override {
        check_dim(w, "w");
        check_dim(d, "d");
        const Vector weights = curvature_weights(w);
        const Vector xd = data_.features * d;
        Vector hv = data_.features.transpose() * weights.cwiseProduct(xd);
        hv += d;
        return (scale_ / samples()) * hv;
    }

    Matrix dense_hessian(const Vector& w) const override {
        check_dim(w, "w");
        const Vector weights = curvature_weights(w);
        const Matrix dense = Matrix(data_.features);
        Matrix h = dense.transpose() * weights.asDiagonal() * dense;
        h.diagonal().array() += 1.0;
        h *= scale_ / samples();
        return 0.5 * (h + h.transpose());
    }

private:
    double samples() const { return static_cast<double>(data_.rows()); }

    // σ(z)(1 − σ(z)) is even in z, so the label drops out.
    Vector curvature_weights(const Vector& w) const {
        const Vector margins = data_.features * w;
        Vector weights(margins.size());
        for (Eigen::Index i = 0; i < margins.size(); ++i) {
            const double s = detail::sigmoid(margins[i]);
            weights[i] = s * (1.0 - s);
        }
        return weights;
    }

    SparseDataset data_;
    double row_norm_max_ = 0.0;
    double scale_ = 1.0;
};

/// ½xᵀAx + bᵀx with A symmetric positive definite.
class QuadraticObjective final : public Objective {
public:
    QuadraticObjective(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
        if (a_.rows() != a_.cols() || a_.rows() != b_.size()) {
            throw DimensionError("QuadraticObjective: A must be n x n and b of length n");
        }
    }

    Eigen::Index dimension() const override { return b_.size(); }
    bool has_hessian() const override { return true; }

    const Matrix& matrix() const { return a_; }
    const Vector& linear() const { return b_; }

    double value(const Vector& x) const override {
        check_dim(x, "x");
        return 0.5 * x.dot(a_ * x) + b_.dot(x);
    }
    Vector gradient(const Vector& x) const override {
        check_dim(x, "x");
        return a_ * x + b_;
    }
    Vector hess_vec(const Vector& x, const Vector& d) const override {
        check_dim(x, "x");
        check_dim(d, "d");
        return a_ * d;
    }
    Matrix dense_hessian(const Vector& x) const override {
        check_dim(x, "x");
        return a_;
    }

    /// −A⁻¹b.
    Vector minimizer() const {
        Eigen::LLT<Matrix> llt(a_);
        if (llt.info() != Eigen::Success) {
            throw NumericalError("QuadraticObjective: A is not positive definite");
        }
        return llt.solve(-b_);
    }

private:
    Matrix a_;
    Vector b_;
};

/// Q·diag(λ)·Qᵀ with Q Haar-random orthogonal and eigenvalues log-uniform on
/// [eig_min, eig_max].
inline Matrix synthetic_spd(Eigen::Index dim, double eig_min, double eig_max, std::uint64_t seed) {
    if (dim < 1 || !(eig_min > 0.0) || eig_max < eig_min) {
        throw DomainError("synthetic_spd requires dim >= 1 and 0 < eig_min <= eig_max");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Matrix gauss(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (Eigen::Index i = 0; i < dim; ++i) {
            gauss(i, j) = normal(rng);
        }
    }
    Eigen::HouseholderQR<Matrix> qr(gauss);
    Matrix q = qr.householderQ();
    // Sign-fix so Q is Haar distributed.
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (r(j, j) < 0.0) {
            q.col(j) *= -1.0;
        }
    }

    Vector eig(dim);
    const double lo = std::log(eig_min);
    const double hi = std::log(eig_max);
    for (Eigen::Index i = 0; i < dim; ++i) {
        eig[i] = std::exp(lo + (hi - lo) * unit(rng));
    }
    // Pin the extremes so the requested spectrum range is realized exactly.
    if (dim >= 2) {
        eig[0] = eig_min;
        eig[dim - 1] = eig_max;
    }
    Matrix out = q * eig.asDiagonal() * q.transpose();
    return 0.5 * (out + out.transpose());
}

/// Random SPD quadratic objective with minimizer drawn from N(0, I).
inline QuadraticObjective synthetic_quadratic(Eigen::Index dim, double cond, std::uint64_t seed) {
    Matrix a = synthetic_spd(dim, 1.0, cond, seed);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector xstar(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
        xstar[i] = normal(rng);
    }
    Vector b = -(a * xstar);
    return QuadraticObjective(std::move(a), std::move(b));
}

/// β with ⌈p/5⌉ nonzero entries drawn uniform on [−1, 1] at uniformly chosen
/// coordinates; the remaining 80% are zero.
inline Vector sparse_beta(Eigen::Index dim, std::uint64_t seed) {
    if (dim < 1) {
        throw DomainError("sparse_beta requires dim >= 1");
    }
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Index> coords(static_cast<std::size_t>(dim));
    std::iota(coords.begin(), coords.end(), Eigen::Index{0});
    std::shuffle(coords.begin(), coords.end(), rng);
    const auto nnz = static_cast<std::size_t>((dim + 4) / 5);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    Vector beta = Vector::Zero(dim);
    for (std::size_t i = 0; i < nnz; ++i) {
        beta[coords[i]] = coef(rng);
    }
    return beta;
}

/// Expected online least-squares objective
///
///     F(w) = E(Y − Xᵀw)² + ½λ‖w‖² = (β − w)ᵀΣ(β − w) + σ² + ½λ‖w‖²
///
/// for X ~ N(0, Σ), Y = Xᵀβ + ε, ε ~ N(0, σ²).
class OnlineLsExpectedObjective final : public Objective {
public:
    OnlineLsExpectedObjective(Matrix sigma, Vector beta, double lambda, double noise_var = 1.0)
        : sigma_(std::move(sigma)), beta_(std::move(beta)), lambda_(lambda), noise_var_(noise_var) {
        if (sigma_.rows() != sigma_.cols() || sigma_.rows() != beta_.size()) {
            throw DimensionError("OnlineLsExpectedObjective: Sigma must be p x p and beta of length p");
        }
        if (!(lambda_ > 0.0)) {
            throw DomainError("OnlineLsExpectedObjective: lambda must be positive");
        }
        if (noise_var_ < 0.0) {
            throw DomainError("OnlineLsExpectedObjective: noise variance must be nonnegative");
        }
    }

    Eigen::Index dimension() const override { return beta_.size(); }
    bool has_hessian() const override { return true; }

    const Matrix& sigma() const { return sigma_; }
    const Vector& beta() const { return beta_; }
    double lambda() const { return lambda_; }
    double noise_var() const { return noise_var_; }

    double value(const Vector& w) const override {
        check_dim(w, "w");
        const Vector r = beta_ - w;
        return r.dot(sigma_ * r) + noise_var_ + 0.5 * lambda_ * w.squaredNorm();
    }
    Vector gradient(const Vector& w) const override {
        check_dim(w, "w");
        return -2.0 * (sigma_ * (beta_ - w)) + lambda_ * w;
    }
    Vector hess_vec(const Vector& w, const Vector& d) const override {
        check_dim(w, "w");
        check_dim(d, "d");
        return 2.0 * (sigma_ * d) + lambda_ * d;
    }
    Matrix dense_hessian(const Vector& w) const override {
        check_dim(w, "w");
        Matrix h = 2.0 * sigma_;
        h.diagonal().array() += lambda_;
        return h;
    }

private:
    Matrix sigma_;
    Vector beta_;
    double lambda_;
    double noise_var_;
};

/// Solves (2Σ + λI)w* = 2Σβ.
inline Vector online_ls_minimizer(const OnlineLsExpectedObjective& obj) {
    Matrix lhs = 2.0 * obj.sigma();
    lhs.diagonal().array() += obj.lambda();
    Eigen::LLT<Matrix> llt(lhs);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("online_ls_minimizer: 2*Sigma + lambda*I is not positive definite");
    }
    Vector w = llt.solve(2.0 * (obj.sigma() * obj.beta()));
    // One step of iterative refinement; Σ can be badly conditioned.
    const Vector residual = 2.0 * (obj.sigma() * obj.beta()) - lhs * w;
    w += llt.solve(residual);
    return w;
}

}  // namespace adaptqn
