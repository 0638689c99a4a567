#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace hmfg {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Mat = MatrixX<double>;
using Vec = VectorX<double>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad scenario file, bad weights, unknown keys.
struct ConfigError : Error {
    using Error::Error;
};

struct DimensionError : Error {
    using Error::Error;
};

// Fixed-point iteration or Riccati integration failed.
struct SolverError : Error {
    using Error::Error;
};

struct ConvergenceError : SolverError {
    ConvergenceError(const std::string& what, std::vector<double> history)
        : SolverError(what), residual_history(std::move(history)) {}
    std::vector<double> residual_history;
};

struct FiniteEscapeError : SolverError {
    using SolverError::SolverError;
};

struct AmbiguityError : Error {
    AmbiguityError(const std::string& what, std::vector<double> cands)
        : Error(what), candidates(std::move(cands)) {}
    std::vector<double> candidates;
};

struct InstabilityError : Error {
    using Error::Error;
};

template <typename Derived>
void require_dims(const Eigen::MatrixBase<Derived>& M, Eigen::Index rows, Eigen::Index cols,
                  const char* what) {
    if (M.rows() != rows || M.cols() != cols)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", got " + std::to_string(M.rows()) + "x" +
                             std::to_string(M.cols()));
}

template <typename Derived>
auto symmetrized(const Eigen::MatrixBase<Derived>& M) {
    return (0.5 * (M + M.transpose())).eval();
}

}  // namespace hmfg
