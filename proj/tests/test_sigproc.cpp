#include <doctest.h>

#include <cmath>

#include "frf/rng.hpp"
#include "frf/sigproc.hpp"

using namespace frf;
using namespace frf::sigproc;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

MultisineSpec desk_spec() {
    MultisineSpec s;
    s.sample_rate = 500.0;
    s.period_samples = 2000;
    s.f_min_hz = 1.0;
    s.f_max_hz = 25.0;
    s.n_lines = 30;
    s.amplitudes = {0.3};
    s.n_inputs = 3;
    s.orthogonal_blocks = true;
    s.phase_seed = 42;
    return s;
}

cplx dft_direct(const VectorXd& x, int bin) {
    cplx acc(0.0, 0.0);
    const auto N = x.size();
    for (Eigen::Index n = 0; n < N; ++n)
        acc += x(n) * std::polar(1.0, -kTwoPi * bin * n / static_cast<double>(N));
    return acc / static_cast<double>(N);
}

}  // namespace

TEST_CASE("excited bins are odd, unique, ascending and in range") {
    const auto spec = desk_spec();
    const auto bins = spec.excited_bins();
    REQUIRE(!bins.empty());
    for (size_t i = 0; i < bins.size(); ++i) {
        CHECK(bins[i] % 2 == 1);
        CHECK(spec.bin_hz(bins[i]) >= spec.f_min_hz);
        CHECK(spec.bin_hz(bins[i]) <= spec.f_max_hz);
        if (i > 0) CHECK(bins[i] > bins[i - 1]);
    }
}

TEST_CASE("goertzel matches the direct DFT") {
    Rng rng(5);
    VectorXd x(512);
    for (int i = 0; i < 512; ++i) x(i) = rng.normal();
    for (int bin : {1, 3, 17, 100, 255})
        CHECK(std::abs(goertzel_line(x, bin) - dft_direct(x, bin)) < 1e-10);
}

TEST_CASE("unit sinusoid at an excited bin gives |X| = 1/2") {
    const int N = 1000, bin = 13;
    VectorXd x(N);
    for (int n = 0; n < N; ++n) x(n) = std::cos(kTwoPi * bin * n / N + 0.7);
    const cplx X = goertzel_line(x, bin);
    CHECK(std::abs(X) == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(std::arg(X) == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("design is deterministic and orthogonal per block") {
    const auto spec = desk_spec();
    const auto sig1 = design_multisine(spec, 3);
    const auto sig2 = design_multisine(spec, 3);
    REQUIRE(sig1.size() == 3);
    for (int m = 0; m < 3; ++m) CHECK((sig1[m] - sig2[m]).norm() == 0.0);

    const auto bins = spec.excited_bins();
    for (size_t k = 0; k < bins.size(); k += 7) {
        MatrixXcd U(3, 3);
        for (int m = 0; m < 3; ++m)
            for (int j = 0; j < 3; ++j)
                U(j, m) = goertzel_line(sig1[m].row(j).transpose(), bins[k]);
        const MatrixXcd gram = U * U.adjoint();
        const double c = gram(0, 0).real();
        CHECK(c > 0.0);
        CHECK((gram - c * MatrixXcd::Identity(3, 3)).norm() < 1e-9 * c);
    }
}

TEST_CASE("different blocks use different phase realizations") {
    auto spec = desk_spec();
    const auto sig = design_multisine(spec, 6);
    CHECK((sig[0] - sig[3]).norm() > 1e-6);
}

TEST_CASE("to_spectral drops settle periods and averages the rest") {
    auto spec = desk_spec();
    spec.n_inputs = 1;
    spec.orthogonal_blocks = false;
    const auto sig = design_multisine(spec, 1);
    const int N = spec.period_samples;

    TimeRecord rec;
    rec.sample_rate = spec.sample_rate;
    rec.n_periods = 3;
    rec.settle_periods = 1;
    rec.u.resize(1, 4 * N);
    for (int p = 0; p < 4; ++p) rec.u.middleCols(p * N, N) = sig[0];
    // corrupt the settle period only; it must not affect the result
    rec.u.leftCols(N).setConstant(7.0);
    rec.y = 2.0 * rec.u;
    rec.r.resize(0, 4 * N);

    const SpectralRecord sr = to_spectral(rec, spec);
    const auto bins = spec.excited_bins();
    REQUIRE(sr.n_lines() == static_cast<int>(bins.size()));
    const VectorXd amp = spec.line_amplitudes(sr.n_lines());
    for (int k = 0; k < sr.n_lines(); ++k) {
        CHECK(std::abs(sr.U[k](0, 0)) == doctest::Approx(amp(k) / 2.0).epsilon(1e-9));
        CHECK(std::abs(sr.Y[k](0, 0) - 2.0 * sr.U[k](0, 0)) < 1e-12);
        CHECK(sr.freqs(k) == doctest::Approx(kTwoPi * spec.bin_hz(bins[k])));
    }
}

TEST_CASE("period averaging suppresses nonperiodic noise roughly as 1/P") {
    auto spec = desk_spec();
    spec.n_inputs = 1;
    spec.orthogonal_blocks = false;
    const int N = spec.period_samples;
    const int bin = spec.excited_bins()[4];

    auto floor_of = [&](int periods) {
        double acc = 0.0;
        const int reps = 40;
        Rng rng(99);
        for (int rep = 0; rep < reps; ++rep) {
            TimeRecord rec;
            rec.sample_rate = spec.sample_rate;
            rec.n_periods = periods;
            rec.settle_periods = 0;
            rec.u.resize(1, periods * N);
            for (Eigen::Index t = 0; t < rec.u.cols(); ++t) rec.u(0, t) = rng.normal();
            rec.y = rec.u;
            rec.r.resize(0, rec.u.cols());
            const SpectralRecord sr = to_spectral(rec, spec);
            (void)bin;
            acc += std::norm(sr.U[4](0, 0));
        }
        return acc / reps;
    };
    const double p1 = floor_of(1);
    const double p8 = floor_of(8);
    // averaging 8 periods should cut the noise power by about 8 (allow 2x slack)
    CHECK(p8 < p1 / 4.0);
    CHECK(p8 > p1 / 16.0);
}

TEST_CASE("offset sine must stay below the excited band and off-grid") {
    auto spec = desk_spec();
    spec.offset_sine = OffsetSine{0.25, 1.0};
    CHECK_NOTHROW((void)spec.excited_bins());
    spec.offset_sine = OffsetSine{2.0, 1.0};
    CHECK_THROWS_AS((void)spec.excited_bins(), std::invalid_argument);
}
