#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace isomono {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

enum class ErrorKind {
    Invalid,
    InvalidPartition,
    InvalidMarking,
    BudgetExceeded,
    Pole,
    Precondition,
    Abort,
};

struct Error : std::runtime_error {
    ErrorKind kind;
    Error(ErrorKind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) { throw Error(k, msg); }

// numerical rank with singular values above rel * sigma_max
int numeric_rank(const Mat& m, double rel = 1e-9);

// numerical rank with singular values above an absolute threshold
int numeric_rank_abs(const Mat& m, double threshold);

// orthonormal basis of the column space
Mat column_basis(const Mat& m, double rel = 1e-9);

double scale_of(const Mat& m);

} // namespace isomono
