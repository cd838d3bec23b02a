#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <unistd.h>
#include <fstream>
#include <sstream>

#include "frf/io.hpp"
#include "frf/rng.hpp"

using namespace frf;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("frf-io-test-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("time record round trip is bit exact") {
    TempDir tmp;
    Rng rng(1);
    TimeRecord rec;
    rec.sample_rate = 500.0;
    rec.n_periods = 2;
    rec.settle_periods = 1;
    rec.u.resize(2, 30);
    rec.y.resize(2, 30);
    rec.r.resize(2, 30);
    for (Eigen::Index i = 0; i < rec.u.size(); ++i) {
        rec.u.data()[i] = rng.normal() * 1e3;
        rec.y.data()[i] = rng.normal() * 1e-7;
        rec.r.data()[i] = rng.normal();
    }
    io::TimeRecordMeta meta{500.0, 15, 2, 1, 0xdeadbeefULL};
    const fs::path p = tmp.path / "exp000.csv";
    io::write_time_record(p, rec, meta);
    const auto [back, meta2] = io::read_time_record(p);
    CHECK((back.u - rec.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.y - rec.y).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.r - rec.r).cwiseAbs().maxCoeff() == 0.0);
    CHECK(meta2.seed == meta.seed);
    CHECK(meta2.period_samples == 15);
    CHECK(back.sample_rate == 500.0);
    CHECK(back.settle_periods == 1);
}

TEST_CASE("frf estimate round trip preserves lines, validity and covariances") {
    TempDir tmp;
    Rng rng(2);
    FrfEstimate est;
    est.method_tag = "LOG";
    est.n_e_used = 4;
    est.freqs.resize(3);
    est.freqs << 6.2831853, 12.566371, 25.132741;
    est.lines.resize(3);
    for (auto& l : est.lines) {
        l.G.resize(2, 2);
        for (Eigen::Index i = 0; i < 4; ++i) l.G.data()[i] = cplx(rng.normal(), rng.normal());
    }
    est.lines[1].valid = false;
    est.lines[2].cov = MatrixXcd::Identity(4, 4) * cplx(0.5, 0.0);
    est.lines[2].resid_cov = MatrixXcd::Identity(2, 2) * cplx(0.25, 0.0);

    const fs::path p = tmp.path / "est.frf.json";
    io::write_frf_estimate(p, est);
    const FrfEstimate back = io::read_frf_estimate(p);
    CHECK(back.method_tag == "LOG");
    CHECK(back.n_e_used == 4);
    REQUIRE(back.n_lines() == 3);
    CHECK((back.freqs - est.freqs).cwiseAbs().maxCoeff() < 1e-12);
    for (int k = 0; k < 3; ++k) {
        CHECK(back.lines[k].valid == est.lines[k].valid);
        CHECK((back.lines[k].G - est.lines[k].G).norm() == 0.0);
    }
    CHECK(back.lines[0].cov.size() == 0);
    CHECK((back.lines[2].cov - est.lines[2].cov).norm() == 0.0);
    CHECK((back.lines[2].resid_cov - est.lines[2].resid_cov).norm() == 0.0);
}

TEST_CASE("fit result file carries names and costs but no wall time") {
    TempDir tmp;
    graybox::FitResult fit;
    fit.theta_hat.k_g = VectorXd::Constant(1, 50.0);
    fit.theta_hat.d_g = VectorXd::Constant(1, 0.05);
    fit.cost = 1.25;
    fit.cost_trace = {3.0, 2.0, 1.25};
    fit.wall_time_s = 123.0;
    graybox::StartRecord s;
    s.theta_init = fit.theta_hat.pack();
    s.theta_final = s.theta_init;
    s.cost = 1.25;
    s.iterations = 7;
    s.converged = true;
    fit.starts = {s};

    const fs::path p = tmp.path / "cell.fit.json";
    io::write_fit_result(p, fit, fit.theta_hat.names());
    const std::string text = slurp(p);
    CHECK(text.find("k_g1") != std::string::npos);
    CHECK(text.find("1.25") != std::string::npos);
    CHECK(text.find("wall") == std::string::npos);
    CHECK(text.find("123") == std::string::npos);
}

TEST_CASE("atomic_write leaves no temp file behind") {
    TempDir tmp;
    const fs::path p = tmp.path / "sub" / "file.txt";
    io::atomic_write(p, "hello\n");
    CHECK(slurp(p) == "hello\n");
    int entries = 0;
    for (const auto& e : fs::directory_iterator(p.parent_path())) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
}
