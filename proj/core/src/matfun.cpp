#include "frf/matfun.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace frf::matfun {

EigDecomposition eig(const MatrixXcd& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("eig: matrix must be square");
    if (!A.allFinite()) throw std::invalid_argument("eig: non-finite entries");

    const auto n = A.rows();
    EigDecomposition d;
    if (n == 1) {
        d.V = MatrixXcd::Identity(1, 1);
        d.lambdas = VectorXcd::Constant(1, A(0, 0));
        d.cond_V = 1.0;
        return d;
    }

    Eigen::ComplexEigenSolver<MatrixXcd> solver(A, /*computeEigenvectors=*/true);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("eig: QR iteration did not converge");

    d.V = solver.eigenvectors();
    d.lambdas = solver.eigenvalues();

    Eigen::JacobiSVD<MatrixXcd> svd(d.V);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    d.cond_V = smin > 0.0 ? svd.singularValues()(0) / smin
                          : std::numeric_limits<double>::infinity();
    return d;
}

MatrixXcd mat_fun(const MatrixXcd& A, const std::function<cplx(cplx)>& f) {
    const auto n = A.rows();
    if (n == 1) return MatrixXcd::Constant(1, 1, f(A(0, 0)));

    EigDecomposition d = eig(A);
    if (d.cond_V > 1e12)
        throw DefectiveMatrixError(
            "mat_fun: eigenvector matrix condition " + std::to_string(d.cond_V) +
            " exceeds 1e12; matrix is numerically defective, perturb and retry");

    MatrixXcd VF = d.V;
    for (Eigen::Index j = 0; j < n; ++j) VF.col(j) *= f(d.lambdas(j));
    // X = VF V^-1 solved as V^T X^T = VF^T, no explicit inverse.
    return d.V.transpose().partialPivLu().solve(VF.transpose()).transpose();
}

MatrixXcd mat_log(const MatrixXcd& A) {
    EigDecomposition d = eig(A);
    for (Eigen::Index i = 0; i < d.lambdas.size(); ++i) {
        const cplx lam = d.lambdas(i);
        if (std::abs(lam) < 1e-300)
            throw BranchCutError("mat_log: eigenvalue at zero");
        if (std::abs(std::abs(std::arg(lam)) - M_PI) < 1e-12)
            throw BranchCutError("mat_log: eigenvalue on the negative real axis");
    }
    return mat_fun(A, [](cplx z) { return std::log(z); });
}

MatrixXcd mat_exp(const MatrixXcd& A) {
    return mat_fun(A, [](cplx z) { return std::exp(z); });
}

}  // namespace frf::matfun
