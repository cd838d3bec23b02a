#include "frf/types.hpp"

namespace frf {

SpectralRecord SpectralRecord::experiment(int m) const { return experiments(m, 1); }

SpectralRecord SpectralRecord::experiments(int first, int count) const {
    if (first < 0 || count < 1 || first + count > n_e())
        throw std::out_of_range("SpectralRecord: experiment slice out of range");
    SpectralRecord out;
    out.freqs = freqs;
    out.U.reserve(U.size());
    out.Y.reserve(Y.size());
    for (const auto& m : U) out.U.push_back(m.middleCols(first, count));
    for (const auto& m : Y) out.Y.push_back(m.middleCols(first, count));
    if (!R.empty()) {
        out.R.reserve(R.size());
        for (const auto& m : R) out.R.push_back(m.middleCols(first, count));
    }
    return out;
}

SpectralRecord merge_experiments(const std::vector<SpectralRecord>& recs) {
    if (recs.empty()) throw std::invalid_argument("merge_experiments: empty list");
    SpectralRecord out;
    out.freqs = recs[0].freqs;
    const int n_lines = recs[0].n_lines();
    const bool with_ref = recs[0].has_reference();
    int total = 0;
    for (const auto& r : recs) {
        if (r.n_lines() != n_lines || (r.freqs - out.freqs).cwiseAbs().maxCoeff() > 0.0)
            throw std::invalid_argument("merge_experiments: frequency grids differ");
        if (r.has_reference() != with_ref)
            throw std::invalid_argument("merge_experiments: inconsistent reference presence");
        total += r.n_e();
    }
    out.U.resize(n_lines);
    out.Y.resize(n_lines);
    if (with_ref) out.R.resize(n_lines);
    for (int k = 0; k < n_lines; ++k) {
        out.U[k].resize(recs[0].n_u(), total);
        out.Y[k].resize(recs[0].n_y(), total);
        if (with_ref) out.R[k].resize(recs[0].n_r(), total);
        int col = 0;
        for (const auto& r : recs) {
            out.U[k].middleCols(col, r.n_e()) = r.U[k];
            out.Y[k].middleCols(col, r.n_e()) = r.Y[k];
            if (with_ref) out.R[k].middleCols(col, r.n_e()) = r.R[k];
            col += r.n_e();
        }
    }
    return out;
}

int FrfEstimate::valid_count() const {
    int n = 0;
    for (const auto& l : lines) n += l.valid ? 1 : 0;
    return n;
}

}  // namespace frf
