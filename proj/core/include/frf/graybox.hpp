#pragma once

#include <cstdint>

#include "frf/plant.hpp"
#include "frf/types.hpp"

namespace frf::graybox {

using plant::PlantModel;

/// Diagonal per-line weights over vec(G), one weight matrix layout per
/// configuration: weights[cfg][line] is n_y x n_u, entry (i,j) weighting
/// log G_ij.
struct WeightingScheme {
    std::vector<std::vector<MatrixXd>> weights;
    double diagonal_boost = 1.0;
    double band_boost = 1.0;
};

struct WeightOptions {
    double diagonal_boost = 3.0;
    double band_boost = 3.0;
    double band_halfwidth = 0.2;  // relative frequency band around the feature
};

/// Realize per-line weights: boost diagonal FRF entries and a +-20% band
/// around the first antiresonance and resonance of each diagonal channel of
/// the theta0-linearized model.
WeightingScheme build_weights(const std::vector<FrfEstimate>& estimates,
                              const PlantModel& skeleton,
                              const std::vector<VectorXd>& configurations,
                              const WeightOptions& opt);

struct CostBreakdown {
    double cost = 0.0;
    int lines_used = 0;
    int lines_skipped = 0;
};

/// Eq-style weighted log-error: sum over configurations and lines of
/// E^H W E with E = log vec(Ghat) - log vec(G(theta)), phase differences
/// wrapped to (-pi, pi].
CostBreakdown log_error_cost(const plant::ThetaVector& theta,
                             const PlantModel& skeleton,
                             const std::vector<VectorXd>& configurations,
                             const std::vector<FrfEstimate>& estimates,
                             const WeightingScheme& weights);

struct FitOptions {
    int n_starts = 3;
    double perturbation = 0.3;  // log-normal scale of the start spread
    std::uint64_t seed = 0;
    int max_iterations = 200;
    double gradient_tol = 1e-8;
};

struct StartRecord {
    VectorXd theta_init;
    VectorXd theta_final;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct FitResult {
    plant::ThetaVector theta_hat;
    double cost = 0.0;
    std::vector<StartRecord> starts;
    std::vector<double> cost_trace;  // accepted costs of the winning start
    double wall_time_s = 0.0;        // informational only, never serialized
};

/// Multi-start BFGS over log-parametrized theta (positivity is structural);
/// gradients by central differences.
FitResult fit_parameters(const std::vector<FrfEstimate>& estimates,
                         const PlantModel& skeleton,
                         const std::vector<VectorXd>& configurations,
                         const plant::ThetaVector& theta0,
                         const WeightingScheme& weights,
                         const FitOptions& options);

/// Frequencies (rad/s) of the first antiresonance (local |G_ii| minimum) and
/// following resonance (local maximum) of one diagonal channel; -1 when not
/// found below the grid end.
struct ChannelFeatures {
    double antiresonance = -1.0;
    double resonance = -1.0;
};
ChannelFeatures find_features(const VectorXd& freqs, const VectorXd& mag);

}  // namespace frf::graybox
