#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace frf {

using cplx = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using Eigen::VectorXi;

/// One multi-channel time-domain record: inputs u, outputs y, references r
/// on a shared time base. Channel layout is channels x samples.
struct TimeRecord {
    MatrixXd u;  // n_u x T, plant input (motor torque)
    MatrixXd y;  // n_y x T, measured output (motor angular velocity)
    MatrixXd r;  // n_r x T, reference; 0 x T when absent
    double sample_rate = 0.0;
    int n_periods = 0;
    int settle_periods = 0;

    int n_u() const { return static_cast<int>(u.rows()); }
    int n_y() const { return static_cast<int>(y.rows()); }
    int n_r() const { return static_cast<int>(r.rows()); }
    Eigen::Index samples() const { return u.cols(); }
};

/// DFT matrices at the excited lines. For every line, U is n_u x n_e and Y is
/// n_y x n_e with one column per experiment; R may be empty.
struct SpectralRecord {
    VectorXd freqs;               // rad/s, strictly increasing
    std::vector<MatrixXcd> U;     // per line
    std::vector<MatrixXcd> Y;     // per line
    std::vector<MatrixXcd> R;     // per line; empty vector when no reference

    int n_lines() const { return static_cast<int>(freqs.size()); }
    int n_u() const { return U.empty() ? 0 : static_cast<int>(U[0].rows()); }
    int n_y() const { return Y.empty() ? 0 : static_cast<int>(Y[0].rows()); }
    int n_r() const { return R.empty() ? 0 : static_cast<int>(R[0].rows()); }
    int n_e() const { return U.empty() ? 0 : static_cast<int>(U[0].cols()); }
    bool has_reference() const { return !R.empty(); }

    /// Column slice: single experiment.
    SpectralRecord experiment(int m) const;
    /// Column slice over a contiguous experiment range [first, first+count).
    SpectralRecord experiments(int first, int count) const;
};

/// Horizontal concatenation of per-experiment records sharing one grid.
SpectralRecord merge_experiments(const std::vector<SpectralRecord>& recs);

/// One frequency line of an FRF estimate.
struct FrfLine {
    MatrixXcd G;          // n_y x n_u
    bool valid = true;
    MatrixXcd cov;        // covariance of vec(G), n_y*n_u square; 0x0 if absent
    MatrixXcd resid_cov;  // residual covariance C_V, n_y x n_y; 0x0 if absent
};

/// Nonparametric FRF estimate over the excited grid; universal estimator output.
struct FrfEstimate {
    VectorXd freqs;  // rad/s
    std::vector<FrfLine> lines;
    std::string method_tag;
    int n_e_used = 0;

    int n_lines() const { return static_cast<int>(freqs.size()); }
    int n_y() const { return lines.empty() ? 0 : static_cast<int>(lines[0].G.rows()); }
    int n_u() const { return lines.empty() ? 0 : static_cast<int>(lines[0].G.cols()); }
    int valid_count() const;
};

}  // namespace frf
