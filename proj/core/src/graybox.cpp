#include "frf/graybox.hpp"

#include <chrono>
#include <cmath>
#include <functional>

#include "frf/rng.hpp"

namespace frf::graybox {

namespace {

constexpr double kPi = 3.141592653589793238462643383279;

double wrap_phase(double p) {
    while (p > kPi) p -= 2.0 * kPi;
    while (p <= -kPi) p += 2.0 * kPi;
    return p;
}

std::vector<plant::Linearization> linearize_all(const PlantModel& skeleton,
                                                const plant::ThetaVector& theta,
                                                const std::vector<VectorXd>& configurations) {
    PlantModel m = skeleton;
    m.theta = theta;
    std::vector<plant::Linearization> lins;
    lins.reserve(configurations.size());
    for (const auto& q : configurations) lins.push_back(plant::linearize(m, q));
    return lins;
}

}  // namespace

ChannelFeatures find_features(const VectorXd& freqs, const VectorXd& mag) {
    ChannelFeatures f;
    const auto n = freqs.size();
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
        if (f.antiresonance < 0.0 && mag(k) < mag(k - 1) && mag(k) < mag(k + 1)) {
            f.antiresonance = freqs(k);
        } else if (f.antiresonance >= 0.0 && mag(k) > mag(k - 1) && mag(k) > mag(k + 1)) {
            f.resonance = freqs(k);
            break;
        }
    }
    return f;
}

WeightingScheme build_weights(const std::vector<FrfEstimate>& estimates,
                              const PlantModel& skeleton,
                              const std::vector<VectorXd>& configurations,
                              const WeightOptions& opt) {
    if (estimates.size() != configurations.size())
        throw std::invalid_argument("build_weights: one estimate per configuration expected");
    const auto lins = linearize_all(skeleton, skeleton.theta, configurations);

    WeightingScheme scheme;
    scheme.diagonal_boost = opt.diagonal_boost;
    scheme.band_boost = opt.band_boost;
    scheme.weights.resize(estimates.size());

    for (size_t c = 0; c < estimates.size(); ++c) {
        const FrfEstimate& est = estimates[c];
        const int ny = est.n_y(), nu = est.n_u(), nl = est.n_lines();

        MatrixXd mags(ny, nl);
        for (int k = 0; k < nl; ++k) {
            const MatrixXcd G = lins[c].frf(est.freqs(k));
            for (int i = 0; i < ny; ++i) mags(i, k) = std::abs(G(i, i));
        }
        std::vector<ChannelFeatures> feats(ny);
        for (int i = 0; i < ny; ++i)
            feats[i] = find_features(est.freqs, mags.row(i).transpose());

        scheme.weights[c].resize(nl);
        for (int k = 0; k < nl; ++k) {
            MatrixXd W = MatrixXd::Ones(ny, nu);
            for (int i = 0; i < std::min(ny, nu); ++i) W(i, i) *= opt.diagonal_boost;
            const double w_k = est.freqs(k);
            for (int i = 0; i < ny; ++i) {
                for (double feat : {feats[i].antiresonance, feats[i].resonance}) {
                    if (feat > 0.0 && std::abs(w_k - feat) <= opt.band_halfwidth * feat) {
                        W.row(i) *= opt.band_boost;
                        break;
                    }
                }
            }
            scheme.weights[c][k] = W;
        }
    }
    return scheme;
}

CostBreakdown log_error_cost(const plant::ThetaVector& theta,
                             const PlantModel& skeleton,
                             const std::vector<VectorXd>& configurations,
                             const std::vector<FrfEstimate>& estimates,
                             const WeightingScheme& weights) {
    if (estimates.size() != configurations.size() ||
        weights.weights.size() != configurations.size())
        throw std::invalid_argument("log_error_cost: per-configuration inputs mismatch");
    const auto lins = linearize_all(skeleton, theta, configurations);

    CostBreakdown out;
    for (size_t c = 0; c < estimates.size(); ++c) {
        const FrfEstimate& est = estimates[c];
        for (int k = 0; k < est.n_lines(); ++k) {
            const FrfLine& line = est.lines[k];
            if (!line.valid) {
                ++out.lines_skipped;
                continue;
            }
            const MatrixXcd G = lins[c].frf(est.freqs(k));
            const MatrixXd& W = weights.weights[c][k];
            for (int i = 0; i < line.G.rows(); ++i) {
                for (int j = 0; j < line.G.cols(); ++j) {
                    const double mg = std::abs(G(i, j)), mh = std::abs(line.G(i, j));
                    if (mh < 1e-300) continue;  // degenerate estimate entry
                    // a vanishing model magnitude is a huge, not excluded, error
                    const double er = std::log(mh) - std::log(std::max(mg, 1e-300));
                    const double ei = wrap_phase(std::arg(line.G(i, j)) - std::arg(G(i, j)));
                    out.cost += W(i, j) * (er * er + ei * ei);
                }
            }
            ++out.lines_used;
        }
    }
    return out;
}

namespace {

struct BfgsOutcome {
    VectorXd p;
    double cost = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> trace;
};

BfgsOutcome bfgs_minimize(const std::function<double(const VectorXd&)>& f,
                          VectorXd p, int max_iter, double gtol) {
    const auto dim = p.size();
    auto grad = [&](const VectorXd& at) {
        VectorXd g(dim);
        for (Eigen::Index i = 0; i < dim; ++i) {
            const double h = 1e-6 * std::max(1.0, std::abs(at(i)));
            VectorXd a = at, b = at;
            a(i) += h;
            b(i) -= h;
            g(i) = (f(a) - f(b)) / (2.0 * h);
        }
        return g;
    };

    BfgsOutcome out;
    double fp = f(p);
    out.trace.push_back(fp);
    if (!std::isfinite(fp)) return out;
    MatrixXd H = MatrixXd::Identity(dim, dim);
    VectorXd g = grad(p);

    for (int it = 0; it < max_iter; ++it) {
        out.iterations = it + 1;
        if (g.cwiseAbs().maxCoeff() < gtol) {
            out.converged = true;
            break;
        }
        VectorXd d = -H * g;
        if (d.dot(g) >= 0.0) {  // reset on loss of descent direction
            H.setIdentity();
            d = -g;
        }
        // cap the trial move at 2 per component (a factor e^2 in parameters)
        double step = std::min(1.0, 2.0 / d.cwiseAbs().maxCoeff());
        double fn = fp;
        VectorXd pn = p;
        bool accepted = false;
        for (int ls = 0; ls < 50; ++ls) {
            pn = p + step * d;
            fn = f(pn);
            if (std::isfinite(fn) && fn <= fp + 1e-4 * step * d.dot(g)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            out.converged = true;  // no further descent available
            break;
        }
        const VectorXd gn = grad(pn);
        const VectorXd s = pn - p;
        const VectorXd y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const MatrixXd I = MatrixXd::Identity(dim, dim);
            const MatrixXd V = I - (s * y.transpose()) / sy;
            H = V * H * V.transpose() + (s * s.transpose()) / sy;
        }
        p = pn;
        fp = fn;
        g = gn;
        out.trace.push_back(fp);
        if (s.cwiseAbs().maxCoeff() < 1e-12) {
            out.converged = true;
            break;
        }
    }
    out.p = p;
    out.cost = fp;
    return out;
}

}  // namespace

FitResult fit_parameters(const std::vector<FrfEstimate>& estimates,
                         const PlantModel& skeleton,
                         const std::vector<VectorXd>& configurations,
                         const plant::ThetaVector& theta0,
                         const WeightingScheme& weights,
                         const FitOptions& options) {
    const auto t_start = std::chrono::steady_clock::now();
    theta0.validate();
    const int n_axes = skeleton.n_axes;
    const int n_el = skeleton.n_elastic();
    const VectorXd p0 = theta0.pack().array().log();

    auto objective = [&](const VectorXd& p) {
        const VectorXd th = p.array().exp();
        try {
            return log_error_cost(plant::ThetaVector::unpack(th, n_axes, n_el), skeleton,
                                  configurations, estimates, weights)
                .cost;
        } catch (const std::exception&) {
            // equilibrium or linearization fails for this theta: infeasible point
            return std::numeric_limits<double>::infinity();
        }
    };
    {
        const double c0 = objective(p0);
        if (!std::isfinite(c0))
            throw std::runtime_error("fit_parameters: non-finite cost at theta0");
    }

    FitResult res;
    res.cost = std::numeric_limits<double>::infinity();
    int best = -1;
    for (int s = 0; s < options.n_starts; ++s) {
        VectorXd p = p0;
        if (s > 0) {
            Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(s), 0, 3));
            for (Eigen::Index i = 0; i < p.size(); ++i)
                p(i) += options.perturbation * rng.normal();
        }
        StartRecord rec;
        rec.theta_init = p.array().exp();
        BfgsOutcome o = bfgs_minimize(objective, p, options.max_iterations, options.gradient_tol);
        if (o.p.size() == 0) {  // diverged at the start point
            rec.cost = std::numeric_limits<double>::infinity();
            res.starts.push_back(rec);
            continue;
        }
        rec.theta_final = o.p.array().exp();
        rec.cost = o.cost;
        rec.iterations = o.iterations;
        rec.converged = o.converged;
        if (o.cost < res.cost) {
            res.cost = o.cost;
            best = static_cast<int>(res.starts.size());
            res.cost_trace = o.trace;
        }
        res.starts.push_back(rec);
    }
    if (best < 0) {
        std::string diag = "fit_parameters: all starts diverged;";
        for (const auto& r : res.starts) diag += " cost=" + std::to_string(r.cost);
        throw std::runtime_error(diag);
    }
    res.theta_hat =
        plant::ThetaVector::unpack(res.starts[best].theta_final, n_axes, n_el);
    res.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

}  // namespace frf::graybox
