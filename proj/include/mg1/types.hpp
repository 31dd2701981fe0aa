#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mg1 {

using Matrix = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;
using ColVec = Eigen::VectorXd;

inline ColVec ones(Eigen::Index n) { return ColVec::Ones(n); }

/// Max absolute row sum (matrix infinity norm).
inline double inf_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input fails a validation rule (bad row sums, negative entries, ...).
struct ValidationError : Error {
    using Error::Error;
};

/// A window/truncation parameter is too small for the requested check.
struct WindowError : Error {
    using Error::Error;
};

/// The requested method does not apply to the given model.
struct InapplicableError : Error {
    using Error::Error;
};

/// An iterative solver failed to converge within its budget.
struct ConvergenceError : Error {
    double last_residual = 0.0;
    ConvergenceError(const std::string& what, double residual)
        : Error(what), last_residual(residual) {}
};

}  // namespace mg1
