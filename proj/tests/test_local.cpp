#include <doctest.h>

#include <cmath>

#include "frf/local.hpp"
#include "frf/rng.hpp"

using namespace frf;
using namespace frf::local;

namespace {

MatrixXcd random_cplx(Rng& rng, int r, int c) {
    MatrixXcd A(r, c);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = cplx(rng.normal(), rng.normal());
    return A;
}

SpectralRecord grid_record(int n_lines, int nu, int ny) {
    SpectralRecord rec;
    rec.freqs.resize(n_lines);
    for (int k = 0; k < n_lines; ++k) rec.freqs(k) = 1.0 + k;
    rec.U.resize(n_lines);
    rec.Y.resize(n_lines);
    for (int k = 0; k < n_lines; ++k) {
        rec.U[k] = MatrixXcd::Zero(nu, 1);
        rec.Y[k] = MatrixXcd::Zero(ny, 1);
    }
    return rec;
}

}  // namespace

TEST_CASE("window construction: interior and shifted border windows") {
    const auto wins = build_windows(10, 2);
    REQUIRE(wins.size() == 10);
    // border: first window covers lines 0..3
    CHECK(wins[0].line_indices == std::vector<int>{0, 1, 2, 3});
    CHECK(wins[0].offsets == std::vector<int>{0, 1, 2, 3});
    // interior: offsets [-b, b-1]
    CHECK(wins[5].line_indices == std::vector<int>{3, 4, 5, 6});
    CHECK(wins[5].offsets == std::vector<int>{-2, -1, 0, 1});
    // border at the top: shifted, never truncated
    CHECK(wins[9].line_indices == std::vector<int>{6, 7, 8, 9});
    CHECK(wins[9].offsets == std::vector<int>{-3, -2, -1, 0});
    for (const auto& w : wins)
        CHECK(std::find(w.offsets.begin(), w.offsets.end(), 0) != w.offsets.end());
}

TEST_CASE("minimum window widths per parametrization") {
    LocalFitConfig cfg;
    cfg.order_R = 2;
    cfg.parametrization = Parametrization::LPM;
    CHECK(cfg.w_min(3, 3) == 9);
    cfg.parametrization = Parametrization::LRM_MISO;
    CHECK(cfg.w_min(3, 3) == 11);
    cfg.parametrization = Parametrization::LRM_MIMO;
    CHECK(cfg.w_min(3, 3) == 15);
    CHECK(cfg.resolved_half_width(3, 3) == 9);  // ceil((15 + 2) / 2)
}

TEST_CASE("LPM recovers a global degree-2 polynomial exactly") {
    Rng rng(3);
    const int n_lines = 24;
    auto rec = grid_record(n_lines, 1, 1);
    auto g = [](double k) { return cplx(1.0 + 0.1 * k + 0.01 * k * k, 0.2 - 0.005 * k * k); };
    for (int k = 0; k < n_lines; ++k) {
        rec.U[k](0, 0) = cplx(rng.normal(), rng.normal());
        rec.Y[k](0, 0) = g(k) * rec.U[k](0, 0);
    }
    LocalFitConfig cfg;
    cfg.order_R = 2;
    cfg.parametrization = Parametrization::LPM;
    const auto est = lpm_fit(rec, cfg);
    for (int k = 0; k < n_lines; ++k) {
        REQUIRE(est.lines[k].valid);
        CHECK(std::abs(est.lines[k].G(0, 0) - g(k)) < 1e-8);
        // exact data leaves (numerically) zero residual variance
        if (est.lines[k].resid_cov.size() > 0)
            CHECK(std::abs(est.lines[k].resid_cov(0, 0)) < 1e-12);
    }
}

TEST_CASE("normalized and raw offset scaling agree on polynomial data") {
    Rng rng(5);
    const int n_lines = 20;
    auto rec = grid_record(n_lines, 1, 1);
    for (int k = 0; k < n_lines; ++k) {
        rec.U[k](0, 0) = cplx(rng.normal(), rng.normal());
        rec.Y[k](0, 0) = cplx(2.0 + 0.05 * k, -0.01 * k * k) * rec.U[k](0, 0);
    }
    LocalFitConfig cfg;
    cfg.parametrization = Parametrization::LPM;
    cfg.offset_scaling = OffsetScaling::Normalized;
    const auto a = lpm_fit(rec, cfg);
    cfg.offset_scaling = OffsetScaling::Raw;
    const auto b = lpm_fit(rec, cfg);
    for (int k = 0; k < n_lines; ++k)
        CHECK(std::abs(a.lines[k].G(0, 0) - b.lines[k].G(0, 0)) < 1e-8);
}

TEST_CASE("MISO-LRM recovers a global rational function exactly") {
    Rng rng(7);
    const int n_lines = 30;
    auto rec = grid_record(n_lines, 1, 1);
    // full-degree numerator and denominator keep the exact solution unique
    auto g = [](double k) {
        return (cplx(1.0, 0.3) + 0.5 * k + cplx(0.02, -0.01) * k * k) /
               (cplx(1.0, 0.0) + 0.03 * k + 0.001 * k * k);
    };
    for (int k = 0; k < n_lines; ++k) {
        rec.U[k](0, 0) = cplx(rng.normal(), rng.normal());
        rec.Y[k](0, 0) = g(k) * rec.U[k](0, 0);
    }
    LocalFitConfig cfg;
    cfg.order_R = 2;
    const auto est = lrm_miso_fit(rec, cfg);
    for (int k = 0; k < n_lines; ++k) {
        REQUIRE(est.lines[k].valid);
        CHECK(std::abs(est.lines[k].G(0, 0) - g(k)) < 1e-8);
    }
}

TEST_CASE("MIMO-LRM recovers a matrix rational function exactly") {
    Rng rng(11);
    const int n_lines = 40;
    const int n = 2;
    auto rec = grid_record(n_lines, n, n);
    const MatrixXcd N0 = random_cplx(rng, n, n);
    const MatrixXcd N1 = 0.05 * random_cplx(rng, n, n);
    const MatrixXcd N2 = 0.002 * random_cplx(rng, n, n);
    auto G_of = [&](double k) {
        // full-degree scalar denominator keeps the MFD representation unique
        const double d = 1.0 + 0.02 * k + 0.0005 * k * k;
        return MatrixXcd((N0 + k * N1 + k * k * N2) / d);
    };
    for (int k = 0; k < n_lines; ++k) {
        rec.U[k] = random_cplx(rng, n, 1);
        rec.Y[k] = G_of(k) * rec.U[k];
    }
    LocalFitConfig cfg;
    cfg.order_R = 2;
    const auto est = lrm_mimo_fit(rec, cfg);
    for (int k = 0; k < n_lines; ++k) {
        REQUIRE(est.lines[k].valid);
        CHECK((est.lines[k].G - G_of(k)).norm() < 1e-8);
    }
}

TEST_CASE("LRM nests LPM: polynomial data is fit exactly by the rational model") {
    Rng rng(13);
    const int n_lines = 30;
    auto rec = grid_record(n_lines, 1, 1);
    auto g = [](double k) {
        return cplx(3.0 - 0.02 * k + 0.002 * k * k, 0.5 + 0.01 * k - 0.001 * k * k);
    };
    for (int k = 0; k < n_lines; ++k) {
        rec.U[k](0, 0) = cplx(rng.normal(), rng.normal());
        rec.Y[k](0, 0) = g(k) * rec.U[k](0, 0);
    }
    LocalFitConfig cfg;
    for (auto* fit : {&lrm_miso_fit, &lrm_mimo_fit}) {
        const auto est = (*fit)(rec, cfg);
        for (int k = 0; k < n_lines; ++k) {
            REQUIRE(est.lines[k].valid);
            CHECK(std::abs(est.lines[k].G(0, 0) - g(k)) < 1e-7);
        }
    }
}

TEST_CASE("JIO-LRM reproduces G from closed-loop reference data") {
    Rng rng(17);
    const int n_lines = 40;
    const int n = 2;
    SpectralRecord rec;
    rec.freqs.resize(n_lines);
    rec.U.resize(n_lines);
    rec.Y.resize(n_lines);
    rec.R.resize(n_lines);
    const MatrixXcd A0 = random_cplx(rng, n, n);
    const MatrixXcd B0 = MatrixXcd::Identity(n, n) * cplx(2.0, 0.5);
    auto d_of = [](double k) { return 1.0 + 0.02 * k + 0.0005 * k * k; };
    auto gry_of = [&](double k) {
        return MatrixXcd((A0 + (0.03 * k + 0.002 * k * k) * MatrixXcd::Identity(n, n)) / d_of(k));
    };
    auto gru_of = [&](double k) {
        return MatrixXcd((B0 + (0.01 * k + 0.001 * k * k) * MatrixXcd::Identity(n, n)) / d_of(k));
    };
    for (int k = 0; k < n_lines; ++k) {
        rec.freqs(k) = 1.0 + k;
        rec.R[k] = random_cplx(rng, n, 1);
        rec.Y[k] = gry_of(k) * rec.R[k];
        rec.U[k] = gru_of(k) * rec.R[k];
    }
    LocalFitConfig cfg;
    const auto est = jio_lrm(rec, cfg);
    for (int k = 0; k < n_lines; ++k) {
        REQUIRE(est.lines[k].valid);
        const MatrixXcd expect = gry_of(k) * gru_of(k).inverse();
        CHECK((est.lines[k].G - expect).norm() < 1e-7);
    }
}

TEST_CASE("log_average_local keeps a single estimate and fuses identical pairs") {
    Rng rng(19);
    const int n_lines = 30;
    auto rec = grid_record(n_lines, 1, 1);
    for (int k = 0; k < n_lines; ++k) {
        rec.U[k](0, 0) = cplx(rng.normal(), rng.normal());
        rec.Y[k](0, 0) = cplx(2.0, 1.0) * rec.U[k](0, 0);
    }
    LocalFitConfig cfg;
    cfg.parametrization = Parametrization::LPM;
    const auto one = lpm_fit(rec, cfg);
    const auto same = log_average_local({one});
    CHECK(same.method_tag == "LPM");

    const auto fused = log_average_local({one, one});
    CHECK(fused.method_tag == "LPM+LOGAVG");
    CHECK(fused.n_e_used == 2);
    for (int k = 0; k < n_lines; ++k)
        CHECK(std::abs(fused.lines[k].G(0, 0) - one.lines[k].G(0, 0)) < 1e-9);
}

TEST_CASE("window narrower than w_min is rejected") {
    auto rec = grid_record(30, 2, 2);
    for (int k = 0; k < 30; ++k) {
        rec.U[k] = MatrixXcd::Ones(2, 1);
        rec.Y[k] = MatrixXcd::Ones(2, 1);
    }
    LocalFitConfig cfg;
    cfg.half_width_b = 2;  // w = 4 < w_min
    CHECK_THROWS_AS((void)lrm_mimo_fit(rec, cfg), std::invalid_argument);
}
