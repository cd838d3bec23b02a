#include "frf/plant.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "frf/rng.hpp"

namespace frf::plant {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Geometry-derived constants of the planar chain in absolute link angles.
struct ChainConstants {
    MatrixXd S;       // S_ij = sum_{k>=max(i,j)} m_k c_ki c_kj
    VectorXd grav_w;  // w_i = sum_{k>=i} m_k c_ki
    VectorXd rot_inertia;
};

ChainConstants chain_constants(const PlantModel& m) {
    const int n = m.n_axes;
    MatrixXd c = MatrixXd::Zero(n, n);  // c(k, i), i <= k
    for (int k = 0; k < n; ++k) {
        for (int i = 0; i < k; ++i) c(k, i) = m.link_length(i);
        c(k, k) = m.link_com(k);
    }
    ChainConstants cc;
    cc.S = MatrixXd::Zero(n, n);
    cc.grav_w = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = std::max(i, j); k < n; ++k)
                cc.S(i, j) += m.link_mass(k) * c(k, i) * c(k, j);
    for (int i = 0; i < n; ++i)
        for (int k = i; k < n; ++k) cc.grav_w(i) += m.link_mass(k) * c(k, i);
    cc.rot_inertia = m.link_inertia;
    return cc;
}

/// z = [q_a; q_e] -> absolute link angles alpha = L (q_a + E q_e).
MatrixXd coord_jacobian(const PlantModel& m) {
    const int n = m.n_axes, ne = m.n_elastic();
    MatrixXd L = MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) L(i, j) = 1.0;
    MatrixXd J(n, n + ne);
    J.leftCols(n) = L;
    for (int e = 0; e < ne; ++e) J.col(n + e) = L.col(m.elastic_axes[e]);
    return J;
}

struct ArmEval {
    MatrixXd M_z;
    VectorXd bias_z;  // J^T (c_alpha + g_alpha)
};

ArmEval eval_arm(const PlantModel& m, const ChainConstants& cc, const MatrixXd& J,
                 const VectorXd& z, const VectorXd& zdot, bool with_velocity) {
    const int n = m.n_axes, ne = m.n_elastic();
    const VectorXd alpha = J * z;
    MatrixXd M_a(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            M_a(i, j) = cc.S(i, j) * std::cos(alpha(i) - alpha(j)) + (i == j ? cc.rot_inertia(i) : 0.0);
    VectorXd bias_a = VectorXd::Zero(n);
    if (with_velocity) {
        const VectorXd adot = J * zdot;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                bias_a(i) += cc.S(i, j) * std::sin(alpha(i) - alpha(j)) * adot(j) * adot(j);
    }
    for (int i = 0; i < n; ++i) bias_a(i) += m.gravity * cc.grav_w(i) * std::cos(alpha(i));

    ArmEval ev;
    ev.M_z = J.transpose() * M_a * J;
    for (int e = 0; e < ne; ++e) ev.M_z(n + e, n + e) += m.elastic_inertia(e);
    ev.bias_z = J.transpose() * bias_a;
    return ev;
}

VectorXd gear_torque(const PlantModel& m, const VectorXd& delta, const VectorXd& ddelta) {
    VectorXd tau = m.theta.k_g.cwiseProduct(delta) + m.theta.d_g.cwiseProduct(ddelta);
    for (size_t i = 0; i < m.cubic_axes.size(); ++i) {
        const int a = m.cubic_axes[i];
        tau(a) += m.cubic_stiffness(i) * delta(a) * delta(a) * delta(a);
    }
    return tau;
}

struct StateView {
    const PlantModel& m;
    const VectorXd& x;
    int n, ne;
    explicit StateView(const PlantModel& model, const VectorXd& state)
        : m(model), x(state), n(model.n_axes), ne(model.n_elastic()) {}
    auto q_m() const { return x.segment(0, n); }
    auto q_a() const { return x.segment(n, n); }
    auto q_e() const { return x.segment(2 * n, ne); }
    auto dq_m() const { return x.segment(2 * n + ne, n); }
    auto dq_a() const { return x.segment(3 * n + ne, n); }
    auto dq_e() const { return x.segment(4 * n + ne, ne); }
};

}  // namespace

VectorXd ThetaVector::pack() const {
    VectorXd v(k_g.size() + d_g.size() + k_e.size() + d_e.size());
    v << k_g, d_g, k_e, d_e;
    return v;
}

ThetaVector ThetaVector::unpack(const VectorXd& v, int n_axes, int n_elastic) {
    if (v.size() != 2 * n_axes + 2 * n_elastic)
        throw std::invalid_argument("ThetaVector: packed size mismatch");
    ThetaVector t;
    t.k_g = v.segment(0, n_axes);
    t.d_g = v.segment(n_axes, n_axes);
    t.k_e = v.segment(2 * n_axes, n_elastic);
    t.d_e = v.segment(2 * n_axes + n_elastic, n_elastic);
    return t;
}

std::vector<std::string> ThetaVector::names() const {
    std::vector<std::string> out;
    for (int i = 0; i < k_g.size(); ++i) out.push_back("k_g" + std::to_string(i + 1));
    for (int i = 0; i < d_g.size(); ++i) out.push_back("d_g" + std::to_string(i + 1));
    for (int i = 0; i < k_e.size(); ++i) out.push_back("k_e" + std::to_string(i + 1));
    for (int i = 0; i < d_e.size(); ++i) out.push_back("d_e" + std::to_string(i + 1));
    return out;
}

void ThetaVector::validate() const {
    if ((k_g.array() <= 0.0).any() || (k_e.array() <= 0.0).any())
        throw std::invalid_argument("ThetaVector: stiffnesses must be positive");
    if ((d_g.array() < 0.0).any() || (d_e.array() < 0.0).any())
        throw std::invalid_argument("ThetaVector: dampings must be nonnegative");
}

void PlantModel::validate() const {
    auto check_len = [&](const VectorXd& v, const char* name) {
        if (v.size() != n_axes)
            throw std::invalid_argument(std::string("PlantModel: bad length for ") + name);
    };
    if (n_axes < 1) throw std::invalid_argument("PlantModel: n_axes must be >= 1");
    check_len(motor_inertia, "motor_inertia");
    check_len(gear_ratio_inv, "gear_ratio_inv");
    check_len(link_mass, "link_mass");
    check_len(link_length, "link_length");
    check_len(link_com, "link_com");
    check_len(link_inertia, "link_inertia");
    check_len(viscous_friction, "viscous_friction");
    if ((motor_inertia.array() <= 0.0).any() || (link_inertia.array() <= 0.0).any())
        throw std::invalid_argument("PlantModel: inertias must be positive");
    if ((gear_ratio_inv.array() == 0.0).any())
        throw std::invalid_argument("PlantModel: gear ratios must be nonzero");
    if (theta.k_g.size() != n_axes || theta.d_g.size() != n_axes)
        throw std::invalid_argument("PlantModel: theta size mismatch");
    if (theta.k_e.size() != n_elastic() || theta.d_e.size() != n_elastic() ||
        elastic_inertia.size() != n_elastic())
        throw std::invalid_argument("PlantModel: elastic axis bookkeeping mismatch");
    if (cubic_stiffness.size() != static_cast<Eigen::Index>(cubic_axes.size()))
        throw std::invalid_argument("PlantModel: cubic stiffness bookkeeping mismatch");
    theta.validate();
}

namespace {

// Hot path shared by dynamics(), the simulator and the linearizer; the
// geometry constants are computed once per caller, not per evaluation.
VectorXd eval_dynamics(const VectorXd& x, const VectorXd& u, const PlantModel& model,
                       const ChainConstants& cc, const MatrixXd& J) {
    if (!x.allFinite()) throw std::invalid_argument("dynamics: non-finite state");
    const int n = model.n_axes, ne = model.n_elastic();
    if (x.size() != model.state_dim() || u.size() != n)
        throw std::invalid_argument("dynamics: dimension mismatch");
    const StateView s(model, x);

    VectorXd z(n + ne), zdot(n + ne);
    z << s.q_a(), s.q_e();
    zdot << s.dq_a(), s.dq_e();

    const VectorXd delta = model.gear_ratio_inv.cwiseProduct(s.q_m()) - s.q_a();
    const VectorXd ddelta = model.gear_ratio_inv.cwiseProduct(s.dq_m()) - s.dq_a();
    const VectorXd tau_g = gear_torque(model, delta, ddelta);

    VectorXd gen_force(n + ne);
    gen_force.head(n) = tau_g;
    for (int e = 0; e < ne; ++e)
        gen_force(n + e) = -model.theta.k_e(e) * s.q_e()(e) - model.theta.d_e(e) * s.dq_e()(e);

    const ArmEval ev = eval_arm(model, cc, J, z, zdot, true);
    const VectorXd zddot = ev.M_z.ldlt().solve(gen_force - ev.bias_z);

    const VectorXd tau_fm = model.viscous_friction.cwiseProduct(s.dq_m());
    const VectorXd qm_ddot =
        (u - tau_fm - model.gear_ratio_inv.cwiseProduct(tau_g)).cwiseQuotient(model.motor_inertia);

    VectorXd dx(model.state_dim());
    dx.segment(0, n) = s.dq_m();
    dx.segment(n, n) = s.dq_a();
    dx.segment(2 * n, ne) = s.dq_e();
    dx.segment(2 * n + ne, n) = qm_ddot;
    dx.segment(3 * n + ne, n) = zddot.head(n);
    dx.segment(4 * n + ne, ne) = zddot.tail(ne);
    return dx;
}

}  // namespace

VectorXd dynamics(const VectorXd& x, const VectorXd& u, const PlantModel& model) {
    return eval_dynamics(x, u, model, chain_constants(model), coord_jacobian(model));
}

double total_energy(const VectorXd& x, const PlantModel& model) {
    const int n = model.n_axes, ne = model.n_elastic();
    const StateView s(model, x);
    const ChainConstants cc = chain_constants(model);
    const MatrixXd J = coord_jacobian(model);

    VectorXd z(n + ne), zdot(n + ne);
    z << s.q_a(), s.q_e();
    zdot << s.dq_a(), s.dq_e();
    const VectorXd alpha = J * z;
    const VectorXd adot = J * zdot;

    double T = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            T += 0.5 * cc.S(i, j) * std::cos(alpha(i) - alpha(j)) * adot(i) * adot(j);
    for (int i = 0; i < n; ++i) T += 0.5 * cc.rot_inertia(i) * adot(i) * adot(i);
    for (int e = 0; e < ne; ++e) T += 0.5 * model.elastic_inertia(e) * s.dq_e()(e) * s.dq_e()(e);
    for (int i = 0; i < n; ++i) T += 0.5 * model.motor_inertia(i) * s.dq_m()(i) * s.dq_m()(i);

    double V = 0.0;
    for (int i = 0; i < n; ++i) V += model.gravity * cc.grav_w(i) * std::sin(alpha(i));
    const VectorXd delta = model.gear_ratio_inv.cwiseProduct(s.q_m()) - s.q_a();
    for (int i = 0; i < n; ++i) V += 0.5 * model.theta.k_g(i) * delta(i) * delta(i);
    for (size_t c = 0; c < model.cubic_axes.size(); ++c) {
        const double d = delta(model.cubic_axes[c]);
        V += 0.25 * model.cubic_stiffness(c) * d * d * d * d;
    }
    for (int e = 0; e < ne; ++e) V += 0.5 * model.theta.k_e(e) * s.q_e()(e) * s.q_e()(e);
    return T + V;
}

Equilibrium equilibrium(const PlantModel& model, const VectorXd& q_a0) {
    model.validate();
    const int n = model.n_axes, ne = model.n_elastic();
    if (q_a0.size() != n) throw std::invalid_argument("equilibrium: configuration size mismatch");
    const ChainConstants cc = chain_constants(model);
    const MatrixXd J = coord_jacobian(model);

    // Solve g_z,e(q_e) + k_e q_e = 0 by damped Newton with FD Jacobian.
    VectorXd q_e = VectorXd::Zero(ne);
    const VectorXd zdot = VectorXd::Zero(n + ne);
    auto resid = [&](const VectorXd& qe) {
        VectorXd z(n + ne);
        z << q_a0, qe;
        const ArmEval ev = eval_arm(model, cc, J, z, zdot, false);
        return VectorXd(ev.bias_z.tail(ne) + model.theta.k_e.cwiseProduct(qe));
    };
    if (ne > 0) {
        VectorXd h = resid(q_e);
        for (int it = 0; it < 100 && h.norm() > 1e-12; ++it) {
            MatrixXd Jh(ne, ne);
            for (int c = 0; c < ne; ++c) {
                VectorXd qp = q_e, qm = q_e;
                const double step = 1e-7 * std::max(1.0, std::abs(q_e(c)));
                qp(c) += step;
                qm(c) -= step;
                Jh.col(c) = (resid(qp) - resid(qm)) / (2.0 * step);
            }
            const VectorXd dir = Jh.partialPivLu().solve(-h);
            double lambda = 1.0;
            VectorXd q_try, h_try;
            for (int halve = 0; halve < 30; ++halve) {
                q_try = q_e + lambda * dir;
                h_try = resid(q_try);
                if (h_try.norm() < h.norm()) break;
                lambda *= 0.5;
            }
            if (h_try.norm() >= h.norm())
                throw std::runtime_error("equilibrium: Newton stalled, residual " +
                                         std::to_string(h.norm()));
            q_e = q_try;
            h = h_try;
        }
        if (resid(q_e).norm() > 1e-10)
            throw std::runtime_error("equilibrium: elastic solve did not converge, residual " +
                                     std::to_string(resid(q_e).norm()));
    }

    VectorXd z(n + ne);
    z << q_a0, q_e;
    const ArmEval ev = eval_arm(model, cc, J, z, zdot, false);
    const VectorXd tau_g = ev.bias_z.head(n);  // gravity torque to hold q_a0

    // gear wind-up: k_g d + k_c d^3 = tau_g per axis, monotone Newton
    VectorXd delta = tau_g.cwiseQuotient(model.theta.k_g);
    for (size_t c = 0; c < model.cubic_axes.size(); ++c) {
        const int a = model.cubic_axes[c];
        const double kc = model.cubic_stiffness(c), kg = model.theta.k_g(a);
        double d = delta(a);
        for (int it = 0; it < 60; ++it) {
            const double f = kg * d + kc * d * d * d - tau_g(a);
            const double fp = kg + 3.0 * kc * d * d;
            const double dn = d - f / fp;
            if (std::abs(dn - d) < 1e-15 * std::max(1.0, std::abs(d))) { d = dn; break; }
            d = dn;
        }
        delta(a) = d;
    }

    Equilibrium eq;
    eq.x0 = VectorXd::Zero(model.state_dim());
    eq.x0.segment(0, n) = (q_a0 + delta).cwiseQuotient(model.gear_ratio_inv);
    eq.x0.segment(n, n) = q_a0;
    eq.x0.segment(2 * n, ne) = q_e;
    eq.u0 = model.gear_ratio_inv.cwiseProduct(tau_g);
    return eq;
}

MatrixXcd Linearization::frf(double omega) const {
    const auto nx = A.rows();
    MatrixXcd S = MatrixXcd::Identity(nx, nx) * cplx(0.0, omega) - A.cast<cplx>();
    return C.cast<cplx>() * S.partialPivLu().solve(B.cast<cplx>());
}

Linearization linearize(const PlantModel& model, const VectorXd& q_a0) {
    Linearization lin;
    lin.eq = equilibrium(model, q_a0);
    const int nx = model.state_dim(), n = model.n_axes;

    // Richardson-extrapolated central differences, cross-validated in tests
    // against the plain central stencil.
    auto jac = [&](auto&& f, const VectorXd& at, int dim_out) {
        MatrixXd J(dim_out, at.size());
        for (Eigen::Index c = 0; c < at.size(); ++c) {
            const double h = 1e-6 * std::max(1.0, std::abs(at(c)));
            auto central = [&](double hh) {
                VectorXd p = at, m = at;
                p(c) += hh;
                m(c) -= hh;
                return VectorXd((f(p) - f(m)) / (2.0 * hh));
            };
            J.col(c) = (4.0 * central(h / 2.0) - central(h)) / 3.0;
        }
        return J;
    };

    const ChainConstants cc = chain_constants(model);
    const MatrixXd Jc = coord_jacobian(model);
    lin.A = jac([&](const VectorXd& x) { return eval_dynamics(x, lin.eq.u0, model, cc, Jc); },
                lin.eq.x0, nx);
    lin.B = jac([&](const VectorXd& u) { return eval_dynamics(lin.eq.x0, u, model, cc, Jc); },
                lin.eq.u0, nx);
    lin.C = MatrixXd::Zero(n, nx);
    const int ne = model.n_elastic();
    for (int i = 0; i < n; ++i) lin.C(i, 2 * n + ne + i) = 1.0;
    return lin;
}

FrfEstimate true_frf(const PlantModel& model, const VectorXd& q_a0, const VectorXd& freqs) {
    const Linearization lin = linearize(model, q_a0);
    FrfEstimate est;
    est.freqs = freqs;
    est.method_tag = "truth";
    est.n_e_used = 0;
    est.lines.resize(freqs.size());
    for (Eigen::Index k = 0; k < freqs.size(); ++k) est.lines[k].G = lin.frf(freqs(k));
    return est;
}

SimulationResult simulate_closed_loop(const PlantModel& model,
                                      const ControllerConfig& ctrl,
                                      const DisturbanceConfig& dist,
                                      const MatrixXd& speed_reference,
                                      const VectorXd& q_a0,
                                      const SimulationOptions& opt) {
    model.validate();
    const int n = model.n_axes;
    if (speed_reference.rows() != n || speed_reference.cols() != opt.period_samples)
        throw std::invalid_argument("simulate_closed_loop: reference shape mismatch");
    if (opt.sample_rate <= 0.0 || opt.n_periods < 1 || opt.substeps < 5)
        throw std::invalid_argument("simulate_closed_loop: invalid options");
    const double Ts = 1.0 / opt.sample_rate;
    const double h = Ts / opt.substeps;

    const Equilibrium eq = equilibrium(model, q_a0);

    {  // explicit integration must resolve the fastest linearized mode
        const Linearization lin = linearize(model, q_a0);
        const Eigen::EigenSolver<MatrixXd> es(lin.A);
        const double fastest = es.eigenvalues().cwiseAbs().maxCoeff();
        if (fastest * h > 0.5 * 2.785)
            throw std::invalid_argument(
                "simulate_closed_loop: integrator step violates the stability margin "
                "for the fastest mode (" + std::to_string(fastest) + " rad/s)");
    }

    const ChainConstants cc_sim = chain_constants(model);
    const MatrixXd J_sim = coord_jacobian(model);

    const int total = (opt.n_periods + opt.settle_periods) * opt.period_samples;
    SimulationResult res;
    res.record.u.resize(n, total);
    res.record.y.resize(n, total);
    res.record.r.resize(n, total);
    res.record.sample_rate = opt.sample_rate;
    res.record.n_periods = opt.n_periods;
    res.record.settle_periods = opt.settle_periods;

    Rng noise(dist.noise_seed);
    VectorXd x = eq.x0;
    VectorXd pos_ref = eq.x0.head(n);
    VectorXd integ = VectorXd::Zero(n);
    VectorXd prev_meas_err = VectorXd::Zero(n);
    bool have_prev = false;

    auto harmonics = [&](const std::vector<SinusoidalHarmonic>& hs, double q) {
        double v = 0.0;
        for (const auto& hh : hs) v += hh.amplitude * std::sin(hh.order * q + hh.phase);
        return v;
    };

    for (int k = 0; k < total; ++k) {
        const StateView s(model, x);
        const VectorXd r_k = speed_reference.col(k % opt.period_samples);

        VectorXd meas_err(n), y_k(n);
        for (int i = 0; i < n; ++i) {
            const double noise_i =
                dist.position_noise_std.size() == n ? dist.position_noise_std(i) * noise.normal() : 0.0;
            meas_err(i) = noise_i + harmonics(dist.position_harmonics, s.q_m()(i));
        }
        if (!have_prev) {
            prev_meas_err = meas_err;
            have_prev = true;
        }
        // measured velocity: true motor velocity plus differentiated position error
        y_k = s.dq_m() + (meas_err - prev_meas_err) / Ts;
        prev_meas_err = meas_err;
        const VectorXd meas_pos = s.q_m() + meas_err;

        const VectorXd vel_cmd = r_k + ctrl.kp.cwiseProduct(pos_ref - meas_pos);
        const VectorXd e_v = vel_cmd - y_k;
        integ += Ts * e_v;
        VectorXd tau = ctrl.kv.cwiseProduct(e_v) + ctrl.ki.cwiseProduct(integ);
        bool clipped = false;
        for (int i = 0; i < n; ++i) {
            if (ctrl.torque_limit.size() == n && ctrl.torque_limit(i) > 0.0 &&
                std::abs(tau(i)) > ctrl.torque_limit(i)) {
                tau(i) = std::copysign(ctrl.torque_limit(i), tau(i));
                clipped = true;
            }
        }
        if (clipped) ++res.saturated_samples;

        VectorXd u_app = tau;
        for (int i = 0; i < n; ++i) u_app(i) += harmonics(dist.torque_ripple, s.q_m()(i));

        res.record.u.col(k) = u_app;
        res.record.y.col(k) = y_k;
        res.record.r.col(k) = r_k;

        pos_ref += Ts * r_k;

        for (int sub = 0; sub < opt.substeps; ++sub) {
            const VectorXd k1 = eval_dynamics(x, u_app, model, cc_sim, J_sim);
            const VectorXd k2 = eval_dynamics(x + 0.5 * h * k1, u_app, model, cc_sim, J_sim);
            const VectorXd k3 = eval_dynamics(x + 0.5 * h * k2, u_app, model, cc_sim, J_sim);
            const VectorXd k4 = eval_dynamics(x + h * k3, u_app, model, cc_sim, J_sim);
            x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if (x.norm() > 1e6)
            throw std::runtime_error("simulate_closed_loop: state diverged at sample " +
                                     std::to_string(k));
    }
    res.saturation_warning = res.saturated_samples > total / 100;
    return res;
}

}  // namespace frf::plant
