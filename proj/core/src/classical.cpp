#include "frf/classical.hpp"

#include <Eigen/Dense>

#include "frf/matfun.hpp"
#include "frf/rng.hpp"

namespace frf::classical {

namespace {

constexpr double kCondLimit = 1e12;

double cond2(const MatrixXcd& A) {
    Eigen::JacobiSVD<MatrixXcd> svd(A);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    return smin > 0.0 ? svd.singularValues()(0) / smin
                      : std::numeric_limits<double>::infinity();
}

VectorXcd vec(const MatrixXcd& A) {
    return Eigen::Map<const VectorXcd>(A.data(), A.size());
}

// Right division X = N D^-1 via a linear solve on transposes.
MatrixXcd rdiv(const MatrixXcd& N, const MatrixXcd& D) {
    return D.transpose().partialPivLu().solve(N.transpose()).transpose();
}

MatrixXcd block(const std::vector<MatrixXcd>& X, int line, int m, int n_u) {
    return X[line].middleCols(static_cast<Eigen::Index>(m) * n_u, n_u);
}

// eig with the documented 1e-10-relative perturbation retry on defective input
matfun::EigDecomposition eig_with_retry(const MatrixXcd& G) {
    matfun::EigDecomposition d = matfun::eig(G);
    if (d.cond_V <= kCondLimit) return d;
    Rng rng(0x9d5cu ^ static_cast<std::uint64_t>(G.rows()));
    MatrixXcd pert = G;
    const double scale = 1e-10 * G.norm();
    for (Eigen::Index i = 0; i < pert.size(); ++i)
        pert.data()[i] += scale * cplx(rng.normal(), rng.normal());
    d = matfun::eig(pert);
    if (d.cond_V > kCondLimit)
        throw matfun::DefectiveMatrixError("phase alignment: defective block estimate");
    return d;
}

}  // namespace

ExperimentBlocks ExperimentBlocks::of(const SpectralRecord& rec, int M) {
    if (M < 1) throw std::invalid_argument("ExperimentBlocks: M must be >= 1");
    if (rec.n_e() != M * rec.n_u())
        throw std::invalid_argument("ExperimentBlocks: n_e must equal M * n_u");
    return ExperimentBlocks{M, rec.n_u()};
}

FrfEstimate h1_estimate(const SpectralRecord& rec, const ExperimentBlocks& blocks) {
    (void)blocks;  // H1 sums over all columns; the partition is immaterial
    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "H1";
    est.n_e_used = rec.n_e();
    est.lines.resize(rec.n_lines());
    for (int k = 0; k < rec.n_lines(); ++k) {
        const MatrixXcd Syu = rec.Y[k] * rec.U[k].adjoint();
        const MatrixXcd Suu = rec.U[k] * rec.U[k].adjoint();
        FrfLine& line = est.lines[k];
        if (!(cond2(Suu) < kCondLimit)) {
            line.G = MatrixXcd::Zero(rec.n_y(), rec.n_u());
            line.valid = false;
            continue;
        }
        line.G = rdiv(Syu, Suu);
    }
    return est;
}

FrfEstimate ari_estimate(const SpectralRecord& rec, const ExperimentBlocks& blocks) {
    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "ARI";
    est.n_e_used = rec.n_e();
    est.lines.resize(rec.n_lines());
    for (int k = 0; k < rec.n_lines(); ++k) {
        MatrixXcd sum = MatrixXcd::Zero(rec.n_y(), rec.n_u());
        int used = 0;
        for (int m = 0; m < blocks.n_blocks; ++m) {
            const MatrixXcd Um = block(rec.U, k, m, blocks.block_size);
            if (!(cond2(Um) < kCondLimit)) continue;
            sum += rdiv(block(rec.Y, k, m, blocks.block_size), Um);
            ++used;
        }
        FrfLine& line = est.lines[k];
        if (used == 0) {
            line.G = MatrixXcd::Zero(rec.n_y(), rec.n_u());
            line.valid = false;
        } else {
            line.G = sum / used;
        }
    }
    return est;
}

MatrixXcd phase_align_matrix(const MatrixXcd& G1) {
    if (G1.rows() != G1.cols())
        throw std::invalid_argument("phase_align_matrix: requires n_u = n_y");
    matfun::EigDecomposition d = eig_with_retry(G1);
    MatrixXcd VF = d.V;
    for (Eigen::Index j = 0; j < d.V.cols(); ++j)
        VF.col(j) *= std::exp(cplx(0.0, -std::arg(d.lambdas(j))));
    return rdiv(VF, d.V);
}

LogCombineResult log_combine(const std::vector<MatrixXcd>& Gs) {
    LogCombineResult res;
    if (Gs.empty()) throw std::invalid_argument("log_combine: empty list");
    const int M = static_cast<int>(Gs.size());

    // P from the first block whose eigendecomposition succeeds
    MatrixXcd P;
    int p_block = -1;
    for (int m = 0; m < M && p_block < 0; ++m) {
        try {
            P = phase_align_matrix(Gs[m]);
            p_block = m;
        } catch (const matfun::DefectiveMatrixError&) {
        }
    }
    if (p_block < 0) {
        res.note = "all blocks defective";
        return res;
    }
    if (p_block > 0) res.note = "P from block " + std::to_string(p_block + 1);

    MatrixXcd L = MatrixXcd::Zero(Gs[0].rows(), Gs[0].cols());
    try {
        for (const auto& G : Gs) L += matfun::mat_log(P * G);
    } catch (const std::runtime_error& e) {
        res.note = e.what();
        return res;
    }
    L /= M;
    res.G = P.partialPivLu().solve(matfun::mat_exp(L));
    if (M >= 2) {
        const auto n2 = res.G.size();
        res.cov = MatrixXcd::Zero(n2, n2);
        for (const auto& G : Gs) {
            const VectorXcd d = vec(G - res.G);
            res.cov += d * d.adjoint();
        }
        res.cov /= static_cast<double>(M) * M;
    }
    res.ok = true;
    return res;
}

FrfEstimate log_estimate(const SpectralRecord& rec, const ExperimentBlocks& blocks) {
    if (rec.n_u() != rec.n_y())
        throw std::invalid_argument("log_estimate: requires n_u = n_y");
    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "LOG";
    est.n_e_used = rec.n_e();
    est.lines.resize(rec.n_lines());
    for (int k = 0; k < rec.n_lines(); ++k) {
        std::vector<MatrixXcd> Gm;
        for (int m = 0; m < blocks.n_blocks; ++m) {
            const MatrixXcd Um = block(rec.U, k, m, blocks.block_size);
            if (!(cond2(Um) < kCondLimit)) continue;
            Gm.push_back(rdiv(block(rec.Y, k, m, blocks.block_size), Um));
        }
        FrfLine& line = est.lines[k];
        if (Gm.empty()) {
            line.G = MatrixXcd::Zero(rec.n_y(), rec.n_u());
            line.valid = false;
            continue;
        }
        LogCombineResult comb = log_combine(Gm);
        if (!comb.ok) {
            line.G = MatrixXcd::Zero(rec.n_y(), rec.n_u());
            line.valid = false;
            continue;
        }
        line.G = comb.G;
        line.cov = comb.cov;
        if (!comb.note.empty() && est.method_tag == "LOG")
            est.method_tag = "LOG(" + comb.note + ")";
    }
    return est;
}

FrfEstimate jio_classical(const SpectralRecord& rec, const ExperimentBlocks& blocks) {
    (void)blocks;  // like H1, the block sums telescope into one sum
    if (!rec.has_reference())
        throw std::invalid_argument("jio_classical: reference channels required");
    FrfEstimate est;
    est.freqs = rec.freqs;
    est.method_tag = "JIO";
    est.n_e_used = rec.n_e();
    est.lines.resize(rec.n_lines());
    for (int k = 0; k < rec.n_lines(); ++k) {
        const MatrixXcd Syr = rec.Y[k] * rec.R[k].adjoint();
        const MatrixXcd Sur = rec.U[k] * rec.R[k].adjoint();
        FrfLine& line = est.lines[k];
        if (!(cond2(Sur) < kCondLimit)) {
            line.G = MatrixXcd::Zero(rec.n_y(), rec.n_u());
            line.valid = false;
            continue;
        }
        line.G = rdiv(Syr, Sur);
    }
    return est;
}

}  // namespace frf::classical
