#include "frf/metrics.hpp"

#include <cmath>

namespace frf::metrics {

std::vector<MatrixXd> metric_weights(const std::vector<MatrixXd>& elementwise) {
    std::vector<MatrixXd> out;
    out.reserve(elementwise.size());
    for (const auto& W : elementwise) {
        const auto ny = W.rows();
        VectorXd d(ny);
        for (Eigen::Index i = 0; i < ny; ++i) d(i) = W.row(i).norm();
        const double dmax = d.maxCoeff();
        if (dmax <= 0.0) throw std::invalid_argument("metric_weights: zero weight line");
        out.push_back(MatrixXd((d / dmax).asDiagonal()));  // 2-norm of a diagonal is max entry
    }
    return out;
}

double frf_amplitude_bias(const FrfEstimate& truth, const FrfEstimate& estimate,
                          const std::vector<MatrixXd>& W_per_line, int* lines_excluded) {
    if (truth.n_lines() != estimate.n_lines() ||
        (truth.freqs - estimate.freqs).cwiseAbs().maxCoeff() > 1e-9)
        throw std::invalid_argument("frf_amplitude_bias: frequency grids differ");
    if (W_per_line.size() != static_cast<size_t>(truth.n_lines()))
        throw std::invalid_argument("frf_amplitude_bias: one weight matrix per line expected");

    double sum = 0.0;
    int used = 0, excluded = 0;
    for (int k = 0; k < truth.n_lines(); ++k) {
        if (!truth.lines[k].valid || !estimate.lines[k].valid) {
            ++excluded;
            continue;
        }
        const MatrixXd diff =
            truth.lines[k].G.cwiseAbs() - estimate.lines[k].G.cwiseAbs();
        const MatrixXd weighted = W_per_line[k].transpose() * diff;
        // matrix 2-norm
        Eigen::JacobiSVD<MatrixXd> svd(weighted);
        sum += svd.singularValues()(0);
        ++used;
    }
    if (lines_excluded) *lines_excluded = excluded;
    if (used == 0) throw std::runtime_error("frf_amplitude_bias: no valid lines");
    return sum / used;
}

BiasReport frf_amplitude_bias_report(const std::vector<FrfEstimate>& truths,
                                     const std::vector<FrfEstimate>& estimates,
                                     const std::vector<std::vector<MatrixXd>>& weights) {
    if (truths.size() != estimates.size() || truths.size() != weights.size())
        throw std::invalid_argument("frf_amplitude_bias_report: list sizes differ");
    BiasReport rep;
    rep.method_tag = estimates.empty() ? "" : estimates[0].method_tag;
    for (size_t c = 0; c < truths.size(); ++c) {
        int excl = 0;
        rep.per_configuration.push_back(
            frf_amplitude_bias(truths[c], estimates[c], weights[c], &excl));
        rep.lines_excluded += excl;
        rep.lines_used += truths[c].n_lines() - excl;
        rep.grand_average += rep.per_configuration.back();
    }
    rep.grand_average /= static_cast<double>(truths.size());
    return rep;
}

ParameterBias parameter_bias(const VectorXd& theta0, const VectorXd& theta_hat) {
    if (theta0.size() != theta_hat.size())
        throw std::invalid_argument("parameter_bias: dimension mismatch");
    ParameterBias out;
    out.per_parameter.resize(theta0.size());
    int used = 0;
    for (Eigen::Index s = 0; s < theta0.size(); ++s) {
        if (theta0(s) == 0.0) {
            out.per_parameter(s) = std::abs(theta_hat(s));
            out.excluded_indices.push_back(static_cast<int>(s));
            continue;
        }
        out.per_parameter(s) = std::abs(theta0(s) - theta_hat(s)) / std::abs(theta0(s));
        out.mean += out.per_parameter(s);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("parameter_bias: no nonzero reference components");
    out.mean /= used;
    return out;
}

}  // namespace frf::metrics
