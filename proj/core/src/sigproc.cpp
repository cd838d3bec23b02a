#include "frf/sigproc.hpp"

#include <algorithm>
#include <cmath>

#include "frf/rng.hpp"

namespace frf::sigproc {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;

int nearest_odd(double x) {
    // nearest odd integer to x
    int lo = 2 * static_cast<int>(std::floor((x - 1.0) / 2.0)) + 1;
    int hi = lo + 2;
    return (x - lo <= hi - x) ? lo : hi;
}
}  // namespace

std::vector<int> MultisineSpec::excited_bins() const {
    if (n_lines <= 0 && selection == LineSelection::LogSpacedOdd)
        throw std::invalid_argument("multisine: n_lines must be positive");
    if (period_samples <= 0 || sample_rate <= 0.0)
        throw std::invalid_argument("multisine: invalid sample grid");
    if (f_min_hz <= 0.0 || f_max_hz <= f_min_hz)
        throw std::invalid_argument("multisine: need 0 < f_min < f_max");

    std::vector<int> bins;
    if (selection == LineSelection::Explicit) {
        bins = explicit_bins;
        std::sort(bins.begin(), bins.end());
        bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
    } else {
        // log-spaced targets rounded to the nearest odd bin, dedup ascending
        const double lo = std::log(f_min_hz), hi = std::log(f_max_hz);
        for (int i = 0; i < n_lines; ++i) {
            const double t = n_lines == 1 ? 0.0 : static_cast<double>(i) / (n_lines - 1);
            const double f = std::exp(lo + t * (hi - lo));
            const int bin = nearest_odd(f * period_samples / sample_rate);
            if (bin < 1) continue;
            const double fb = bin_hz(bin);
            if (fb < f_min_hz || fb > f_max_hz) continue;
            if (bins.empty() || bins.back() != bin) bins.push_back(bin);
        }
    }
    if (bins.empty()) throw std::invalid_argument("multisine: no excited lines");
    for (int b : bins) {
        if (b < 1 || 2 * b >= period_samples)
            throw std::invalid_argument("multisine: bin outside (0, N/2)");
        const double fb = bin_hz(b);
        if (fb < f_min_hz || fb > f_max_hz)
            throw std::invalid_argument("multisine: bin outside [f_min, f_max]");
    }
    if (offset_sine) {
        if (offset_sine->frequency_hz >= f_min_hz)
            throw std::invalid_argument("multisine: offset sine must lie below f_min");
        for (int b : bins)
            if (std::abs(bin_hz(b) - offset_sine->frequency_hz) < 1e-12)
                throw std::invalid_argument("multisine: offset sine collides with an excited line");
    }
    return bins;
}

VectorXd MultisineSpec::line_amplitudes(int n_excited) const {
    if (amplitudes.size() == 1) return VectorXd::Constant(n_excited, amplitudes[0]);
    if (static_cast<int>(amplitudes.size()) == n_excited)
        return Eigen::Map<const VectorXd>(amplitudes.data(), n_excited);
    throw std::invalid_argument("multisine: amplitude profile length mismatch");
}

std::vector<MatrixXd> design_multisine(const MultisineSpec& spec, int n_experiments) {
    const std::vector<int> bins = spec.excited_bins();
    const int n_exc = static_cast<int>(bins.size());
    const VectorXd amp = spec.line_amplitudes(n_exc);
    const int nu = spec.n_inputs;
    const int N = spec.period_samples;
    if (n_experiments <= 0) throw std::invalid_argument("design_multisine: n_experiments < 1");
    if (spec.orthogonal_blocks && n_experiments % nu != 0)
        throw std::invalid_argument("design_multisine: n_experiments must be a multiple of n_inputs for orthogonal blocks");

    const int block_size = spec.orthogonal_blocks ? nu : 1;
    std::vector<MatrixXd> out(n_experiments);
    MatrixXd phases = MatrixXd::Zero(nu, n_exc);

    for (int m = 0; m < n_experiments; ++m) {
        const int block = m / block_size;
        const int within = m % block_size;
        if (within == 0) {
            Rng rng(derive_seed(spec.phase_seed, static_cast<std::uint64_t>(block)));
            if (spec.orthogonal_blocks) {
                // one phase realization per block, shared by all channels
                for (int i = 0; i < n_exc; ++i) phases(0, i) = rng.uniform(0.0, kTwoPi);
            } else {
                // independent phases per channel, so a single experiment
                // already excites all inputs with linearly independent spectra
                for (int j = 0; j < nu; ++j)
                    for (int i = 0; i < n_exc; ++i) phases(j, i) = rng.uniform(0.0, kTwoPi);
            }
        }
        MatrixXd sig = MatrixXd::Zero(nu, N);
        for (int j = 0; j < nu; ++j) {
            const double rot = spec.orthogonal_blocks ? kTwoPi * j * within / nu : 0.0;
            const int prow = spec.orthogonal_blocks ? 0 : j;
            for (int i = 0; i < n_exc; ++i) {
                const double w = kTwoPi * bins[i] / N;
                for (int t = 0; t < N; ++t)
                    sig(j, t) += amp(i) * std::cos(w * t + phases(prow, i) + rot);
            }
            if (spec.offset_sine) {
                const double wo = kTwoPi * spec.offset_sine->frequency_hz / spec.sample_rate;
                for (int t = 0; t < N; ++t)
                    sig(j, t) += spec.offset_sine->amplitude * std::sin(wo * t);
            }
        }
        out[m] = std::move(sig);
    }
    return out;
}

cplx goertzel_line(const Eigen::Ref<const VectorXd>& x, int bin) {
    const auto N = x.size();
    const double w = kTwoPi * bin / static_cast<double>(N);
    const double coeff = 2.0 * std::cos(w);
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
        s0 = x(n) + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    const cplx res = cplx(s1 * std::cos(w) - s2, s1 * std::sin(w));
    return res / static_cast<double>(N);
}

SpectralRecord to_spectral(const TimeRecord& record, const MultisineSpec& spec) {
    const int N = spec.period_samples;
    const auto T = record.samples();
    if (N <= 0 || T % N != 0)
        throw std::invalid_argument("to_spectral: record length is not an integer number of periods");
    const int total_periods = static_cast<int>(T / N);
    const int settle = record.settle_periods;
    const int steady = total_periods - settle;
    if (steady < 1) throw std::invalid_argument("to_spectral: empty steady-state segment");

    const std::vector<int> bins = spec.excited_bins();
    const int n_exc = static_cast<int>(bins.size());

    // average the steady periods in the time domain, then take one-period DFTs
    auto averaged = [&](const MatrixXd& chans) {
        MatrixXd avg = MatrixXd::Zero(chans.rows(), N);
        for (int p = settle; p < total_periods; ++p)
            avg += chans.middleCols(static_cast<Eigen::Index>(p) * N, N);
        return MatrixXd(avg / steady);
    };
    const MatrixXd ubar = averaged(record.u);
    const MatrixXd ybar = averaged(record.y);
    const MatrixXd rbar = record.n_r() > 0 ? averaged(record.r) : MatrixXd(0, N);

    SpectralRecord rec;
    rec.freqs.resize(n_exc);
    rec.U.resize(n_exc);
    rec.Y.resize(n_exc);
    if (record.n_r() > 0) rec.R.resize(n_exc);

    for (int i = 0; i < n_exc; ++i) {
        rec.freqs(i) = kTwoPi * spec.bin_hz(bins[i]);
        MatrixXcd U(record.n_u(), 1), Y(record.n_y(), 1);
        for (int c = 0; c < record.n_u(); ++c) U(c, 0) = goertzel_line(ubar.row(c).transpose(), bins[i]);
        for (int c = 0; c < record.n_y(); ++c) Y(c, 0) = goertzel_line(ybar.row(c).transpose(), bins[i]);
        rec.U[i] = std::move(U);
        rec.Y[i] = std::move(Y);
        if (record.n_r() > 0) {
            MatrixXcd R(record.n_r(), 1);
            for (int c = 0; c < record.n_r(); ++c) R(c, 0) = goertzel_line(rbar.row(c).transpose(), bins[i]);
            rec.R[i] = std::move(R);
        }
    }
    return rec;
}

}  // namespace frf::sigproc
