#pragma once

/// \file directions.hpp
///
/// Direction engines d = −H·g: gradient descent (H = I), Newton (H = G⁻¹),
/// dense BFGS, unlimited-memory BFGS through the two-loop recursion, and
/// bounded-memory L-BFGS.

#include "adaptqn/errors.hpp"
#include "adaptqn/oracles.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <string>
#include <variant>
#include <vector>

namespace adaptqn {

struct GradientDescent {};

struct Newton {};

struct BfgsDense {
    bool identity_scaling = false;
};

struct BfgsTwoLoopUnlimited {
    bool identity_scaling = false;
    /// Recompute the initial scaling from the newest pair on every update
    /// instead of freezing it at the first pair.
    bool refresh_scaling = false;
};

struct LBfgs {
    std::size_t memory = 20;
    bool identity_scaling = false;
    bool refresh_scaling = true;
};

using DirectionRule = std::variant<GradientDescent, Newton, BfgsDense, BfgsTwoLoopUnlimited, LBfgs>;

/// min{⌊n/2⌋, 20}, at least 1.
inline std::size_t default_lbfgs_memory(Eigen::Index n) {
    return std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(n / 2), 20));
}

inline std::string direction_name(const DirectionRule& rule) {
    struct Namer {
        std::string operator()(const GradientDescent&) const { return "gd"; }
        std::string operator()(const Newton&) const { return "newton"; }
        std::string operator()(const BfgsDense&) const { return "bfgs-dense"; }
        std::string operator()(const BfgsTwoLoopUnlimited&) const { return "bfgs-two-loop"; }
        std::string operator()(const LBfgs& r) const { return "lbfgs(" + std::to_string(r.memory) + ")"; }
    };
    return std::visit(Namer{}, rule);
}

struct CurvaturePair {
    Vector s;
    Vector y;
    double sy = 0.0;  ///< sᵀy, always > 0 for stored pairs
};

/// Pairs with sᵀy at or below this fraction of ‖s‖‖y‖ are skipped.
inline constexpr double kCurvatureSkipRatio = 1e-12;

/// sᵀy / yᵀy.
inline double identity_scaling_factor(const Vector& s, const Vector& y) {
    const double yy = y.squaredNorm();
    const double sy = s.dot(y);
    if (!(yy > 0.0)) {
        throw CurvatureError("identity_scaling_factor: y is zero");
    }
    if (!(sy > 0.0)) {
        throw CurvatureError("identity_scaling_factor: s'y must be positive");
    }
    return sy / yy;
}

/// H⁺ = ssᵀ/yᵀs + (I − syᵀ/yᵀs) H (I − ysᵀ/yᵀs), evaluated in O(n²) and
/// re-symmetrized.
inline Matrix bfgs_update_dense(const Matrix& h, const Vector& s, const Vector& y) {
    if (h.rows() != h.cols() || h.rows() != s.size() || s.size() != y.size()) {
        throw DimensionError("bfgs_update_dense: dimension mismatch");
    }
    const double sy = s.dot(y);
    if (!(sy > 0.0)) {
        throw CurvatureError("bfgs_update_dense: s'y must be positive");
    }
    const double inv = 1.0 / sy;
    const Vector hy = h * y;
    const double yhy = y.dot(hy);
    Matrix out = h;
    out.noalias() -= inv * (s * hy.transpose() + hy * s.transpose());
    out.noalias() += (inv * inv * yhy + inv) * (s * s.transpose());
    return 0.5 * (out + out.transpose());
}

/// d = −H·g with H the BFGS matrix obtained from h0_scale·I by applying the
/// stored pairs oldest first.
template <typename PairRange>
Vector two_loop_direction(const PairRange& pairs, double h0_scale, const Vector& g) {
    const std::size_t m = std::size(pairs);
    std::vector<double> alpha(m);
    Vector q = g;
    std::size_t i = m;
    for (auto it = std::rbegin(pairs); it != std::rend(pairs); ++it) {
        --i;
        alpha[i] = it->s.dot(q) / it->sy;
        q.noalias() -= alpha[i] * it->y;
    }
    Vector r = h0_scale * q;
    i = 0;
    for (auto it = std::begin(pairs); it != std::end(pairs); ++it, ++i) {
        const double beta = it->y.dot(r) / it->sy;
        r.noalias() += (alpha[i] - beta) * it->s;
    }
    return -r;
}

struct DirectionResult {
    Vector d;
    double rho = 0.0;  ///< −gᵀd
};

/// Mutable state of a direction engine. One instance per run.
class InverseHessianState {
public:
    InverseHessianState(DirectionRule rule, Eigen::Index dim) : rule_(std::move(rule)), dim_(dim) {
        if (const auto* lb = std::get_if<LBfgs>(&rule_); lb != nullptr && lb->memory < 1) {
            throw DomainError("L-BFGS memory must be >= 1");
        }
        if (std::holds_alternative<BfgsDense>(rule_)) {
            h_ = Matrix::Identity(dim, dim);
        }
    }

    const DirectionRule& rule() const { return rule_; }
    Eigen::Index dimension() const { return dim_; }

    /// Dense inverse-Hessian approximation; empty unless the rule is BfgsDense.
    const Matrix& dense() const { return h_; }
    const std::deque<CurvaturePair>& pairs() const { return pairs_; }
    double h0_scale() const { return h0_scale_; }
    bool first_update_done() const { return first_update_done_; }
    std::size_t skipped_pairs() const { return skipped_; }
    std::size_t accepted_pairs() const { return accepted_; }

    /// Returns d = −Hg and ρ = −gᵀd. Newton solves G(x)d = −g by Cholesky.
    DirectionResult compute_direction(const Objective& oracle, const Vector& x, const Vector& g) const {
        DirectionResult out;
        out.d = apply(oracle, x, g);
        out.rho = -g.dot(out.d);
        if (!(out.rho > 0.0)) {
            throw CurvatureError("positive definiteness lost: g'Hg = " + std::to_string(out.rho));
        }
        return out;
    }

    /// Folds in a completed step. Returns false when the pair was skipped for
    /// insufficient curvature; gradient descent and Newton ignore pairs.
    bool ingest_pair(const Vector& s, const Vector& y) {
        if (std::holds_alternative<GradientDescent>(rule_) || std::holds_alternative<Newton>(rule_)) {
            return true;
        }
        const double sy = s.dot(y);
        if (!(sy > kCurvatureSkipRatio * s.norm() * y.norm())) {
            ++skipped_;
            return false;
        }

        if (auto* dense = std::get_if<BfgsDense>(&rule_)) {
            if (dense->identity_scaling && !first_update_done_) {
                h0_scale_ = identity_scaling_factor(s, y);
                h_ = h0_scale_ * Matrix::Identity(dim_, dim_);
            }
            h_ = bfgs_update_dense(h_, s, y);
        } else if (auto* unlimited = std::get_if<BfgsTwoLoopUnlimited>(&rule_)) {
            if (unlimited->identity_scaling && (!first_update_done_ || unlimited->refresh_scaling)) {
                h0_scale_ = identity_scaling_factor(s, y);
            }
            pairs_.push_back({s, y, sy});
        } else if (auto* limited = std::get_if<LBfgs>(&rule_)) {
            if (limited->identity_scaling && (!first_update_done_ || limited->refresh_scaling)) {
                h0_scale_ = identity_scaling_factor(s, y);
            }
            pairs_.push_back({s, y, sy});
            while (pairs_.size() > limited->memory) {
                pairs_.pop_front();
            }
        }
        first_update_done_ = true;
        ++accepted_;
        return true;
    }

private:
    Vector apply(const Objective& oracle, const Vector& x, const Vector& g) const {
        if (g.size() != dim_) {
            throw DimensionError("compute_direction: gradient dimension mismatch");
        }
        if (std::holds_alternative<GradientDescent>(rule_)) {
            return -g;
        }
        if (std::holds_alternative<Newton>(rule_)) {
            Eigen::LLT<Matrix> llt(oracle.dense_hessian(x));
            if (llt.info() != Eigen::Success) {
                throw NumericalError("Newton: Hessian is not positive definite");
            }
            return llt.solve(-g);
        }
        if (std::holds_alternative<BfgsDense>(rule_)) {
            return -(h_ * g);
        }
        return two_loop_direction(pairs_, h0_scale_, g);
    }

    DirectionRule rule_;
    Eigen::Index dim_;
    Matrix h_;
    std::deque<CurvaturePair> pairs_;
    double h0_scale_ = 1.0;
    bool first_update_done_ = false;
    std::size_t skipped_ = 0;
    std::size_t accepted_ = 0;
};

}  // namespace adaptqn
