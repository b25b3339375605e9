#pragma once

#include <stdexcept>
#include <string>

namespace adaptqn {

/// Argument outside the mathematical domain of an operation (negative ω input,
/// t·δ ≥ 1 in an upper model, nonpositive ρ or δ).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Vector or matrix with the wrong dimension for the oracle it was handed to.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Loss of positive curvature: dᵀGd ≤ 0, sᵀy ≤ 0, or gᵀHg ≤ 0.
class CurvatureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factorization or solver breakdown.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Capability not offered by an oracle or configuration (e.g. no dense Hessian).
class UnsupportedError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// No Armijo-satisfying step was found within the evaluation budget.
class LineSearchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed LIBSVM input.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace adaptqn
