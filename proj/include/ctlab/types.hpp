#pragma once

#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ctlab {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

/// Base of every error thrown by the library. The CLI maps the three
/// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition or input-shape violation (bad config, d < 2, p < 1, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// No parameter set satisfies the admissibility conditions requested.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed (non-convergence, residual above tolerance).
class NumericalError : public Error {
public:
    using Error::Error;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace ctlab
