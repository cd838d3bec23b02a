#pragma once

#include "frf/graybox.hpp"
#include "frf/types.hpp"

namespace frf::metrics {

struct BiasReport {
    std::vector<double> per_configuration;
    double grand_average = 0.0;
    std::string method_tag;
    int lines_used = 0;
    int lines_excluded = 0;
};

/// Weighted amplitude bias of one configuration:
/// (1/N_f) sum_l || W^T(w_l) (|G| - |Ghat|) ||_2 with ||W(w_l)|| = 1.
/// Invalid estimate lines are excluded and counted.
double frf_amplitude_bias(const FrfEstimate& truth, const FrfEstimate& estimate,
                          const std::vector<MatrixXd>& W_per_line,
                          int* lines_excluded = nullptr);

/// Average over configurations; inputs are parallel lists.
BiasReport frf_amplitude_bias_report(const std::vector<FrfEstimate>& truths,
                                     const std::vector<FrfEstimate>& estimates,
                                     const std::vector<std::vector<MatrixXd>>& weights);

/// Square per-line weight matrices for the bias metric, derived from the
/// elementwise graybox weights: diagonal of row 2-norms, rescaled to unit
/// matrix 2-norm.
std::vector<MatrixXd> metric_weights(const std::vector<MatrixXd>& elementwise);

struct ParameterBias {
    double mean = 0.0;                  // B_theta over usable components
    VectorXd per_parameter;             // relative absolute deviations
    std::vector<int> excluded_indices;  // components with zero reference
};

/// Mean relative absolute parameter deviation |theta0 - theta_hat| / theta0.
ParameterBias parameter_bias(const VectorXd& theta0, const VectorXd& theta_hat);

}  // namespace frf::metrics
