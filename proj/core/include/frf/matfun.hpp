#pragma once

#include <functional>

#include "frf/types.hpp"

namespace frf::matfun {

struct BranchCutError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DefectiveMatrixError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EigDecomposition {
    MatrixXcd V;        // eigenvectors, one per column
    VectorXcd lambdas;  // matching eigenvalues
    double cond_V = 0.0;
};

/// Eigendecomposition of a general (non-Hermitian) complex square matrix.
/// Guarantees ||A V - V diag(lambda)|| <= 1e-8 ||A|| for well-conditioned
/// inputs; cond_V > 1e12 signals a (near-)defective matrix.
EigDecomposition eig(const MatrixXcd& A);

/// f(A) = V diag(f(lambda)) V^-1 through the eigendecomposition.
/// Throws DefectiveMatrixError when cond_V exceeds 1e12.
MatrixXcd mat_fun(const MatrixXcd& A, const std::function<cplx(cplx)>& f);

/// Principal matrix logarithm, Im(log lambda) in (-pi, pi].
/// Throws BranchCutError for eigenvalues on or numerically near the closed
/// negative real axis (|arg - pi| < 1e-12 or |lambda| < 1e-300).
MatrixXcd mat_log(const MatrixXcd& A);

MatrixXcd mat_exp(const MatrixXcd& A);

}  // namespace frf::matfun
