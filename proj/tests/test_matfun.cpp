#include <doctest.h>

#include <cmath>

#include "frf/matfun.hpp"
#include "frf/rng.hpp"

using namespace frf;
using matfun::eig;
using matfun::mat_exp;
using matfun::mat_fun;
using matfun::mat_log;

namespace {

MatrixXcd random_matrix(Rng& rng, int n) {
    MatrixXcd A(n, n);
    for (Eigen::Index i = 0; i < A.size(); ++i)
        A.data()[i] = cplx(rng.normal(), rng.normal());
    return A;
}

// Well-conditioned matrix with eigenvalues kept away from the negative real
// axis so the principal log is safe.
MatrixXcd random_log_safe(Rng& rng, int n) {
    MatrixXcd V = MatrixXcd::Identity(n, n) + 0.3 * random_matrix(rng, n);
    VectorXcd lam(n);
    for (int i = 0; i < n; ++i) {
        const double r = rng.uniform(0.5, 2.0);
        const double phi = rng.uniform(-2.5, 2.5);
        lam(i) = std::polar(r, phi);
    }
    return V * lam.asDiagonal() * V.inverse();
}

}  // namespace

TEST_CASE("eig of a diagonal matrix returns the diagonal") {
    MatrixXcd A = MatrixXcd::Zero(3, 3);
    A(0, 0) = 1.0;
    A(1, 1) = cplx(0.0, 2.0);
    A(2, 2) = -3.0;
    const auto d = eig(A);
    VectorXd mags = d.lambdas.cwiseAbs();
    std::sort(mags.data(), mags.data() + mags.size());
    CHECK(mags(0) == doctest::Approx(1.0));
    CHECK(mags(1) == doctest::Approx(2.0));
    CHECK(mags(2) == doctest::Approx(3.0));
    CHECK((A * d.V - d.V * d.lambdas.asDiagonal().toDenseMatrix()).norm() < 1e-10);
}

TEST_CASE("rotation matrix has eigenvalues +-i and log (pi/2) J") {
    MatrixXcd A(2, 2);
    A << 0.0, 1.0, -1.0, 0.0;
    const auto d = eig(A);
    CHECK(std::abs(d.lambdas(0) + d.lambdas(1)) < 1e-12);
    CHECK(std::abs(std::abs(d.lambdas(0)) - 1.0) < 1e-12);
    CHECK(std::abs(d.lambdas(0).real()) < 1e-12);

    const MatrixXcd L = mat_log(A);
    MatrixXcd expect(2, 2);
    const double half_pi = 1.5707963267948966;
    expect << 0.0, half_pi, -half_pi, 0.0;
    CHECK((L - expect).norm() < 1e-10);
}

TEST_CASE("construct-then-decompose recovers planted eigenvalues (6x6)") {
    Rng rng(7);
    const int n = 6;
    MatrixXcd V = MatrixXcd::Identity(n, n) + 0.2 * random_matrix(rng, n);
    VectorXcd lam(n);
    for (int i = 0; i < n; ++i) lam(i) = cplx(i + 1.0, 0.5 * i);
    const MatrixXcd A = V * lam.asDiagonal() * V.inverse();
    const auto d = eig(A);
    // compare as multisets by matching each planted eigenvalue to its closest
    for (int i = 0; i < n; ++i) {
        double best = 1e300;
        for (int j = 0; j < n; ++j) best = std::min(best, std::abs(d.lambdas(j) - lam(i)));
        CHECK(best < 1e-8);
    }
}

TEST_CASE("log/exp round trips") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + rep % 4;
        const MatrixXcd A = random_log_safe(rng, n);
        const MatrixXcd back = mat_exp(mat_log(A));
        CHECK((back - A).norm() < 1e-8 * A.norm());
    }
}

TEST_CASE("mat_fun similarity invariance") {
    Rng rng(23);
    const int n = 4;
    const MatrixXcd A = random_log_safe(rng, n);
    const MatrixXcd T = MatrixXcd::Identity(n, n) + 0.2 * random_matrix(rng, n);
    auto sq = [](cplx z) { return z * z; };
    const MatrixXcd lhs = mat_fun(T * A * T.inverse(), sq);
    const MatrixXcd rhs = T * mat_fun(A, sq) * T.inverse();
    CHECK((lhs - rhs).norm() < 1e-8 * rhs.norm());
    // squaring through the eigendecomposition matches plain multiplication
    CHECK((mat_fun(A, sq) - A * A).norm() < 1e-8 * (A * A).norm());
}

TEST_CASE("branch cut and defective inputs are rejected") {
    MatrixXcd neg = MatrixXcd::Identity(2, 2) * cplx(-1.0, 0.0);
    CHECK_THROWS_AS((void)mat_log(neg), matfun::BranchCutError);

    MatrixXcd jordan(2, 2);
    jordan << 1.0, 1.0, 0.0, 1.0;
    CHECK_THROWS_AS((void)mat_log(jordan), matfun::DefectiveMatrixError);
}

TEST_CASE("principal branch: imaginary part of log eigenvalues in (-pi, pi]") {
    Rng rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        const MatrixXcd A = random_log_safe(rng, 3);
        const auto d = eig(mat_log(A));
        for (int i = 0; i < 3; ++i) {
            CHECK(d.lambdas(i).imag() <= 3.14159265358979 + 1e-9);
            CHECK(d.lambdas(i).imag() > -3.14159265358979 - 1e-9);
        }
    }
}
