#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mflq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix with non-finite entries or inconsistent shape.
class InvalidMatrix : public Error {
public:
    using Error::Error;
};

class EmptyGrid : public Error {
public:
    EmptyGrid() : Error("empty grid") {}
};

/// The lower-right block of a Schur test is not positive definite beyond tolerance.
class IndefiniteB : public Error {
public:
    explicit IndefiniteB(double min_eig)
        : Error("Schur test: B is not positive definite (min eigenvalue " + std::to_string(min_eig) + ")"),
          min_eigenvalue(min_eig) {}
    double min_eigenvalue;
};

class OutOfDomain : public Error {
public:
    OutOfDomain(double t, double horizon)
        : Error("time " + std::to_string(t) + " outside [0, " + std::to_string(horizon) + "]"), t(t) {}
    double t;
};

/// A gain denominator (sum_j D_j' P D_j + R or its hatted counterpart) lost positive definiteness.
class SingularGainDenominator : public Error {
public:
    SingularGainDenominator(std::string which, double t, double margin)
        : Error("singular gain denominator " + which + " at t=" + std::to_string(t) +
                " (smallest eigenvalue " + std::to_string(margin) + ")"),
          which(std::move(which)), t(t), margin(margin) {}
    std::string which;
    double t;
    double margin;
};

class MissingLinearTerm : public Error {
public:
    MissingLinearTerm() : Error("problem has no linear terminal weight (weights.ell absent)") {}
};

class MissingIncrements : public Error {
public:
    MissingIncrements() : Error("path has no retained Brownian increments") {}
};

class DegenerateVolatility : public Error {
public:
    DegenerateVolatility(double t, double margin)
        : Error("volatility sigma*sigma' - delta*I not positive semidefinite at t=" + std::to_string(t) +
                " (margin " + std::to_string(margin) + ")"),
          t(t), margin(margin) {}
    double t;
    double margin;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ThetaBoundViolated : public Error {
public:
    ThetaBoundViolated(double t, double theta, double bound)
        : Error("theta(t) = " + std::to_string(theta) + " violates upper bound " + std::to_string(bound) +
                " at t=" + std::to_string(t)),
          t(t) {}
    double t;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations(std::move(violations)) {}
    std::vector<std::string> violations;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "validation failed:";
        for (const auto& s : v) out += "\n  - " + s;
        return out;
    }
};

}  // namespace mflq
