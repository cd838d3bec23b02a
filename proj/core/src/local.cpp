#include "frf/local.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "frf/classical.hpp"

namespace frf::local {

namespace {

double cond2(const MatrixXcd& A) {
    Eigen::JacobiSVD<MatrixXcd> svd(A);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    return smin > 0.0 ? svd.singularValues()(0) / smin
                      : std::numeric_limits<double>::infinity();
}

MatrixXcd rdiv(const MatrixXcd& N, const MatrixXcd& D) {
    return D.transpose().partialPivLu().solve(N.transpose()).transpose();
}

struct WindowData {
    MatrixXd poly;   // w x (R+1), powers of the (possibly normalized) offsets
    MatrixXcd U_w;   // w x n_u
    MatrixXcd Y_w;   // w x n_y
};

WindowData gather(const SpectralRecord& rec, const LocalWindow& win,
                  const LocalFitConfig& cfg, int b) {
    const int w = static_cast<int>(win.offsets.size());
    const int R = cfg.order_R;
    WindowData d;
    d.poly.resize(w, R + 1);
    d.U_w.resize(w, rec.n_u());
    d.Y_w.resize(w, rec.n_y());
    const double scale = cfg.offset_scaling == OffsetScaling::Normalized ? 1.0 / b : 1.0;
    for (int t = 0; t < w; ++t) {
        const double rho = win.offsets[t] * scale;
        double p = 1.0;
        for (int s = 0; s <= R; ++s) {
            d.poly(t, s) = p;
            p *= rho;
        }
        const int line = win.line_indices[t];
        d.U_w.row(t) = rec.U[line].col(0).transpose();
        d.Y_w.row(t) = rec.Y[line].col(0).transpose();
    }
    return d;
}

// [r^0 ... r^R] (x) U_w with element-wise column products, grouped by input.
MatrixXcd numerator_block(const WindowData& d, int R) {
    const auto w = d.poly.rows();
    const auto nu = d.U_w.cols();
    MatrixXcd K(w, (R + 1) * nu);
    for (Eigen::Index j = 0; j < nu; ++j)
        for (int s = 0; s <= R; ++s)
            K.col(j * (R + 1) + s) = d.poly.col(s).cast<cplx>().cwiseProduct(d.U_w.col(j));
    return K;
}

// -[r ... r^R] (x) columns of Y, appended after the numerator block.
void append_denominator_block(MatrixXcd& K, const WindowData& d, int R,
                              const MatrixXcd& Ycols, Eigen::Index at) {
    for (Eigen::Index l = 0; l < Ycols.cols(); ++l)
        for (int s = 1; s <= R; ++s)
            K.col(at + l * R + (s - 1)) =
                -d.poly.col(s).cast<cplx>().cwiseProduct(Ycols.col(l));
}

struct Solved {
    MatrixXcd theta;  // cols x n_rhs
    int rank = 0;
    int q = 0;
    bool full_rank = false;
    MatrixXcd resid;  // w x n_rhs
};

Solved solve_ls(const MatrixXcd& K, const MatrixXcd& rhs, double rank_tol) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXcd> cod(K);
    cod.setThreshold(rank_tol);
    Solved s;
    s.theta = cod.solve(rhs);
    s.rank = static_cast<int>(cod.rank());
    s.q = static_cast<int>(K.rows()) - s.rank;
    s.full_rank = s.rank == K.cols();
    s.resid = rhs - K * s.theta;
    return s;
}

}  // namespace

int LocalFitConfig::w_min(int n_u, int n_y) const {
    switch (parametrization) {
        case Parametrization::LPM: return (order_R + 1) * n_u;
        case Parametrization::LRM_MISO: return (order_R + 1) * n_u + order_R;
        case Parametrization::LRM_MIMO: return (order_R + 1) * n_u + order_R * n_y;
    }
    throw std::logic_error("unreachable");
}

int LocalFitConfig::half_width() const {
    if (half_width_b <= 0)
        throw std::invalid_argument("LocalFitConfig: half width not resolved");
    return half_width_b;
}

int LocalFitConfig::resolved_half_width(int n_u, int n_y) const {
    if (half_width_b > 0) return half_width_b;
    return (w_min(n_u, n_y) + 2 + 1) / 2;
}

std::vector<LocalWindow> build_windows(int n_lines, int half_width_b) {
    const int b = half_width_b;
    const int w = 2 * b;
    if (b < 1) throw std::invalid_argument("build_windows: half width must be >= 1");
    if (n_lines < w)
        throw std::invalid_argument("build_windows: fewer lines than window width");
    std::vector<LocalWindow> wins(n_lines);
    for (int c = 0; c < n_lines; ++c) {
        int start = c - b;
        if (start < 0) start = 0;
        if (start + w > n_lines) start = n_lines - w;
        LocalWindow& win = wins[c];
        win.center_index = c;
        win.offsets.resize(w);
        win.line_indices.resize(w);
        for (int t = 0; t < w; ++t) {
            win.line_indices[t] = start + t;
            win.offsets[t] = start + t - c;
        }
    }
    return wins;
}

FrfEstimate lpm_fit(const SpectralRecord& rec, const LocalFitConfig& config) {
    if (rec.n_e() != 1) throw std::invalid_argument("lpm_fit: single experiment expected");
    const int R = config.order_R;
    const int nu = rec.n_u(), ny = rec.n_y();
    const int b = config.resolved_half_width(nu, ny);
    if (2 * b < config.w_min(nu, ny))
        throw std::invalid_argument("lpm_fit: window width below w_min");

    const auto wins = build_windows(rec.n_lines(), b);
    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "LPM";
    est.n_e_used = 1;
    est.lines.resize(rec.n_lines());

    for (const auto& win : wins) {
        const WindowData d = gather(rec, win, config, b);
        const MatrixXcd K = numerator_block(d, R);
        FrfLine& line = est.lines[win.center_index];
        line.G.resize(ny, nu);
        MatrixXcd cv = MatrixXcd::Zero(ny, ny);
        bool any_cov = false;
        for (int i = 0; i < ny; ++i) {
            const Solved s = solve_ls(K, d.Y_w.col(i), config.rank_tol);
            if (!s.full_rank) {
                line.valid = false;  // widen the window to restore rank
                break;
            }
            for (int j = 0; j < nu; ++j) line.G(i, j) = s.theta(j * (R + 1), 0);
            if (s.q > 0) {
                cv(i, i) = (s.resid.adjoint() * s.resid)(0, 0) / static_cast<double>(s.q);
                any_cov = true;
            }
        }
        if (line.valid && any_cov) line.resid_cov = cv;
    }
    return est;
}

FrfEstimate lrm_miso_fit(const SpectralRecord& rec, const LocalFitConfig& config) {
    if (rec.n_e() != 1) throw std::invalid_argument("lrm_miso_fit: single experiment expected");
    const int R = config.order_R;
    const int nu = rec.n_u(), ny = rec.n_y();
    LocalFitConfig cfg = config;
    cfg.parametrization = Parametrization::LRM_MISO;
    const int b = cfg.resolved_half_width(nu, ny);
    if (2 * b < cfg.w_min(nu, ny))
        throw std::invalid_argument("lrm_miso_fit: window width below w_min");

    const auto wins = build_windows(rec.n_lines(), b);
    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "LRM_MISO";
    est.n_e_used = 1;
    est.lines.resize(rec.n_lines());

    const int w = 2 * b;
    for (const auto& win : wins) {
        const WindowData d = gather(rec, win, cfg, b);
        const MatrixXcd Knum = numerator_block(d, R);
        FrfLine& line = est.lines[win.center_index];
        line.G.resize(ny, nu);
        MatrixXcd cv = MatrixXcd::Zero(ny, ny);
        bool any_cov = false;
        for (int i = 0; i < ny; ++i) {
            MatrixXcd K(w, (R + 1) * nu + R);
            K.leftCols(Knum.cols()) = Knum;
            append_denominator_block(K, d, R, d.Y_w.col(i), Knum.cols());
            const Solved s = solve_ls(K, d.Y_w.col(i), cfg.rank_tol);
            if (!s.full_rank) {
                line.valid = false;
                break;
            }
            for (int j = 0; j < nu; ++j) line.G(i, j) = s.theta(j * (R + 1), 0);
            // denominator must stay away from zero inside the window
            for (int t = 0; t < w && line.valid; ++t) {
                cplx D(1.0, 0.0);
                for (int s2 = 1; s2 <= R; ++s2)
                    D += s.theta((R + 1) * nu + s2 - 1, 0) * d.poly(t, s2);
                if (std::abs(D) < 1e-8) line.valid = false;  // unstable local fit
            }
            if (!line.valid) break;
            if (s.q > 0) {
                cv(i, i) = (s.resid.adjoint() * s.resid)(0, 0) / static_cast<double>(s.q);
                any_cov = true;
            }
        }
        if (line.valid && any_cov) line.resid_cov = cv;
    }
    return est;
}

FrfEstimate lrm_mimo_fit(const SpectralRecord& rec, const LocalFitConfig& config) {
    if (rec.n_e() != 1) throw std::invalid_argument("lrm_mimo_fit: single experiment expected");
    const int R = config.order_R;
    const int nu = rec.n_u(), ny = rec.n_y();
    LocalFitConfig cfg = config;
    cfg.parametrization = Parametrization::LRM_MIMO;
    const int b = cfg.resolved_half_width(nu, ny);
    if (2 * b < cfg.w_min(nu, ny))
        throw std::invalid_argument("lrm_mimo_fit: window width below w_min");

    const auto wins = build_windows(rec.n_lines(), b);
    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "LRM_MIMO";
    est.n_e_used = 1;
    est.lines.resize(rec.n_lines());

    const int w = 2 * b;
    const int n_num = (R + 1) * nu;
    for (const auto& win : wins) {
        const WindowData d = gather(rec, win, cfg, b);
        MatrixXcd K(w, n_num + R * ny);
        K.leftCols(n_num) = numerator_block(d, R);
        append_denominator_block(K, d, R, d.Y_w, n_num);
        const Solved s = solve_ls(K, d.Y_w, cfg.rank_tol);
        FrfLine& line = est.lines[win.center_index];
        line.G.resize(ny, nu);
        if (!s.full_rank) {
            line.valid = false;
            continue;
        }
        for (int i = 0; i < ny; ++i)
            for (int j = 0; j < nu; ++j) line.G(i, j) = s.theta(j * (R + 1), i);
        // full-MFD denominator D(rho) = I + sum_s D_s rho^s must stay invertible
        for (int t = 0; t < w && line.valid; ++t) {
            MatrixXcd D = MatrixXcd::Identity(ny, ny);
            for (int i = 0; i < ny; ++i)
                for (int l = 0; l < ny; ++l)
                    for (int s2 = 1; s2 <= R; ++s2)
                        D(i, l) += s.theta(n_num + l * R + (s2 - 1), i) * d.poly(t, s2);
            Eigen::JacobiSVD<MatrixXcd> svd(D);
            if (svd.singularValues()(ny - 1) < 1e-8) line.valid = false;
        }
        if (line.valid && s.q > 0)
            line.resid_cov = (s.resid.adjoint() * s.resid) / static_cast<double>(s.q);
    }
    return est;
}

FrfEstimate jio_lrm(const SpectralRecord& rec, const LocalFitConfig& config) {
    if (!rec.has_reference()) throw std::invalid_argument("jio_lrm: reference channels required");
    if (rec.n_r() != rec.n_u())
        throw std::invalid_argument("jio_lrm: needs one reference per input channel");

    // Two MIMO-LRM fits sharing one window geometry: r -> y and r -> u.
    SpectralRecord ry, ru;
    ry.freqs = ru.freqs = rec.freqs;
    ry.U = ru.U = rec.R;
    ry.Y = rec.Y;
    ru.Y = rec.U;

    LocalFitConfig cfg = config;
    cfg.parametrization = Parametrization::LRM_MIMO;
    if (cfg.half_width_b <= 0)
        cfg.half_width_b = std::max(cfg.resolved_half_width(rec.n_r(), rec.n_y()),
                                    cfg.resolved_half_width(rec.n_r(), rec.n_u()));

    const FrfEstimate est_ry = lrm_mimo_fit(ry, cfg);
    const FrfEstimate est_ru = lrm_mimo_fit(ru, cfg);

    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "JIO_LRM";
    est.n_e_used = 1;
    est.lines.resize(rec.n_lines());
    for (int k = 0; k < rec.n_lines(); ++k) {
        FrfLine& line = est.lines[k];
        const FrfLine& lry = est_ry.lines[k];
        const FrfLine& lru = est_ru.lines[k];
        if (!lry.valid || !lru.valid || !(cond2(lru.G) < 1e10)) {
            line.G = MatrixXcd::Zero(rec.n_y(), rec.n_u());
            line.valid = false;
            continue;
        }
        line.G = rdiv(lry.G, lru.G);
    }
    return est;
}

FrfEstimate log_average_local(const std::vector<FrfEstimate>& estimates) {
    if (estimates.empty()) throw std::invalid_argument("log_average_local: empty list");
    if (estimates.size() == 1) return estimates[0];
    const FrfEstimate& first = estimates[0];
    if (first.n_u() != first.n_y())
        throw std::invalid_argument("log_average_local: requires n_u = n_y");
    for (const auto& e : estimates)
        if (e.n_lines() != first.n_lines() ||
            (e.freqs - first.freqs).cwiseAbs().maxCoeff() > 0.0)
            throw std::invalid_argument("log_average_local: frequency grids differ");

    FrfEstimate est;
    est.freqs = first.freqs;
    est.method_tag = first.method_tag + "+LOGAVG";
    for (const auto& e : estimates) est.n_e_used += e.n_e_used;
    est.lines.resize(first.n_lines());
    for (int k = 0; k < first.n_lines(); ++k) {
        std::vector<MatrixXcd> Gs;
        for (const auto& e : estimates)
            if (e.lines[k].valid) Gs.push_back(e.lines[k].G);
        FrfLine& line = est.lines[k];
        if (Gs.empty()) {
            line.G = MatrixXcd::Zero(first.n_y(), first.n_u());
            line.valid = false;
            continue;
        }
        const classical::LogCombineResult comb = classical::log_combine(Gs);
        if (!comb.ok) {
            line.G = MatrixXcd::Zero(first.n_y(), first.n_u());
            line.valid = false;
            continue;
        }
        line.G = comb.G;
        line.cov = comb.cov;
    }
    return est;
}

}  // namespace frf::local
