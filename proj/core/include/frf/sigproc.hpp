#pragma once

#include <cstdint>
#include <optional>

#include "frf/types.hpp"

namespace frf::sigproc {

struct OffsetSine {
    double frequency_hz = 0.0;
    double amplitude = 0.0;
};

enum class LineSelection { LogSpacedOdd, Explicit };

/// Excitation design: frequency grid, amplitudes, phase scheme.
struct MultisineSpec {
    double sample_rate = 0.0;  // Hz
    int period_samples = 0;    // N
    double f_min_hz = 0.0;
    double f_max_hz = 0.0;
    int n_lines = 0;
    LineSelection selection = LineSelection::LogSpacedOdd;
    std::vector<int> explicit_bins;
    std::vector<double> amplitudes;  // one value broadcasts to all lines
    std::uint64_t phase_seed = 0;
    int n_inputs = 1;
    bool orthogonal_blocks = false;
    std::optional<OffsetSine> offset_sine;

    /// Excited bin indices after selection, odd rounding and dedup.
    /// Validates the spec invariants (bins in [1, N/2), inside [f_min, f_max],
    /// offset sine below f_min and off-grid).
    std::vector<int> excited_bins() const;

    /// Per-line amplitude, broadcasting a scalar profile.
    VectorXd line_amplitudes(int n_excited) const;

    double bin_hz(int bin) const {
        return static_cast<double>(bin) * sample_rate / period_samples;
    }
};

/// One period of excitation for each of n_experiments. Result[m] is
/// n_inputs x period_samples. With orthogonal_blocks, experiments come in
/// blocks of n_inputs sharing a phase realization, rotated per input so the
/// per-line block input DFT matrix is unitary up to scale. Without them,
/// every channel of every experiment draws independent phases, which is what
/// the single-experiment local estimators need for MIMO identifiability.
std::vector<MatrixXd> design_multisine(const MultisineSpec& spec, int n_experiments);

/// Steady-state DFT extraction at the excited lines of one experiment.
/// Drops settle periods, averages the remaining integer periods, and uses the
/// normalization X(k) = (1/N) sum x_n e^{-j2pikn/N}, so a unit-amplitude
/// sinusoid at bin k gives |X(k)| = 1/2.
SpectralRecord to_spectral(const TimeRecord& record, const MultisineSpec& spec);

/// DFT of one channel row at one bin with the normalization above.
cplx goertzel_line(const Eigen::Ref<const VectorXd>& x, int bin);

}  // namespace frf::sigproc
