#pragma once

#include "frf/types.hpp"

namespace frf::local {

enum class Parametrization { LPM, LRM_MISO, LRM_MIMO };
enum class OffsetScaling { Raw, Normalized };

struct LocalFitConfig {
    int order_R = 2;
    int half_width_b = 0;  // 0: choose the default slightly above w_min
    Parametrization parametrization = Parametrization::LRM_MIMO;
    OffsetScaling offset_scaling = OffsetScaling::Normalized;
    double rank_tol = 1e-10;

    int window_width() const { return 2 * half_width(); }
    int half_width() const;
    /// Minimum window width for the given signal dimensions.
    int w_min(int n_u, int n_y) const;
    /// Default half width b = ceil((w_min + 2) / 2), resolved lazily so one
    /// config can serve records of different dimension.
    int resolved_half_width(int n_u, int n_y) const;
};

struct LocalWindow {
    int center_index = 0;
    std::vector<int> offsets;       // relative, contains 0
    std::vector<int> line_indices;  // absolute excited-line indices
};

/// One sliding window per excited line; interior windows use offsets
/// [-b, b-1], border windows are shifted (never truncated) to fit.
std::vector<LocalWindow> build_windows(int n_lines, int half_width_b);

/// Local polynomial fit of a single experiment.
FrfEstimate lpm_fit(const SpectralRecord& rec, const LocalFitConfig& config);

/// Local rational fit, one shared denominator per output row.
FrfEstimate lrm_miso_fit(const SpectralRecord& rec, const LocalFitConfig& config);

/// Local rational fit with the full matrix-fraction denominator coupling all
/// outputs; all rows share one regressor.
FrfEstimate lrm_mimo_fit(const SpectralRecord& rec, const LocalFitConfig& config);

/// Closed-loop variant: fits reference->output and reference->input with the
/// MIMO parametrization and returns G = G_ry G_ru^-1 per line.
FrfEstimate jio_lrm(const SpectralRecord& rec, const LocalFitConfig& config);

/// Logarithmic fusion of per-experiment local estimates (M -> n_e).
FrfEstimate log_average_local(const std::vector<FrfEstimate>& estimates);

}  // namespace frf::local
