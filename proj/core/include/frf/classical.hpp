#pragma once

#include "frf/types.hpp"

namespace frf::classical {

/// Partition of the experiment columns into M blocks of n_u experiments.
struct ExperimentBlocks {
    int n_blocks = 0;   // M
    int block_size = 0; // n_u

    static ExperimentBlocks of(const SpectralRecord& rec, int M);
};

/// Multi-experiment least-squares estimator: G = [sum Y U^H][sum U U^H]^-1
/// per line. Lines whose input Gramian has condition > 1e12 are invalidated.
FrfEstimate h1_estimate(const SpectralRecord& rec, const ExperimentBlocks& blocks);

/// Arithmetic mean of the per-block estimates Y[m] U[m]^-1.
FrfEstimate ari_estimate(const SpectralRecord& rec, const ExperimentBlocks& blocks);

/// Phase alignment matrix P = V diag(e^{-j arg lambda}) V^-1 built from the
/// eigendecomposition of G1; eigenvalues of P G1 become real nonnegative.
MatrixXcd phase_align_matrix(const MatrixXcd& G1);

/// Logarithmic (geometric-mean style) averaging of per-block estimates with
/// phase alignment, plus spread covariance (1/M^2) sum vec(dG) vec(dG)^H.
FrfEstimate log_estimate(const SpectralRecord& rec, const ExperimentBlocks& blocks);

/// Combine a list of per-line G matrices by log averaging. Shared by
/// log_estimate and by the local module's multi-experiment fusion.
struct LogCombineResult {
    MatrixXcd G;
    MatrixXcd cov;  // 0x0 when fewer than 2 contributing matrices
    bool ok = false;
    std::string note;
};
LogCombineResult log_combine(const std::vector<MatrixXcd>& Gs);

/// Joint input-output estimator G = [sum Y R^H][sum U R^H]^-1 per line;
/// consistent in closed loop since the reference is noise-free.
FrfEstimate jio_classical(const SpectralRecord& rec, const ExperimentBlocks& blocks);

}  // namespace frf::classical
