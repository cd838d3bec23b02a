#pragma once

#include <cstdint>

#include "frf/types.hpp"

namespace frf::plant {

/// Stiffness/damping parameters under identification.
struct ThetaVector {
    VectorXd k_g;  // transmission stiffness per axis, N*m/rad
    VectorXd d_g;  // transmission damping per axis
    VectorXd k_e;  // perpendicular elastic stiffness, one per elastic axis
    VectorXd d_e;  // perpendicular elastic damping

    /// Flat positive parameter vector [k_g, d_g, k_e, d_e] used by the fitter.
    VectorXd pack() const;
    static ThetaVector unpack(const VectorXd& v, int n_axes, int n_elastic);
    std::vector<std::string> names() const;
    void validate() const;
};

/// Planar flexible-joint serial chain: motors behind gearboxes driving links
/// through spring-damper transmissions; optional perpendicular elastic DOFs
/// and cubic transmission stiffening on designated axes.
struct PlantModel {
    int n_axes = 0;
    VectorXd motor_inertia;      // kg*m^2, motor side
    VectorXd gear_ratio_inv;     // r_g, arm angle = r_g * motor angle
    VectorXd link_mass;          // kg
    VectorXd link_length;        // m
    VectorXd link_com;           // m, COM offset along the link
    VectorXd link_inertia;       // kg*m^2, about COM
    VectorXd viscous_friction;   // N*m*s/rad, motor side (known)
    double gravity = 9.80665;    // m/s^2
    ThetaVector theta;
    std::vector<int> elastic_axes;  // axes carrying a q_e DOF
    VectorXd elastic_inertia;       // kg*m^2, one per elastic axis
    std::vector<int> cubic_axes;    // axes with cubic transmission stiffness
    VectorXd cubic_stiffness;       // N*m/rad^3, one per cubic axis

    int n_elastic() const { return static_cast<int>(elastic_axes.size()); }
    /// State dimension for x = [q_m, q_a, q_e, dq_m, dq_a, dq_e].
    int state_dim() const { return 2 * (2 * n_axes + n_elastic()); }
    void validate() const;
};

/// Cascade controller: P position loop around a PI velocity loop, per axis.
struct ControllerConfig {
    VectorXd kp;            // 1/s
    VectorXd kv;            // N*m*s/rad
    VectorXd ki;            // N*m/rad
    VectorXd torque_limit;  // N*m; <=0 disables saturation on that axis
};

struct SinusoidalHarmonic {
    double order = 0.0;      // cycles per motor radian
    double amplitude = 0.0;  // N*m for torque ripple, rad for position
    double phase = 0.0;
};

struct DisturbanceConfig {
    VectorXd position_noise_std;  // rad, white, per axis
    std::vector<SinusoidalHarmonic> torque_ripple;
    std::vector<SinusoidalHarmonic> position_harmonics;
    std::uint64_t noise_seed = 0;
};

/// Continuous-time state derivative of the flexible-joint chain.
VectorXd dynamics(const VectorXd& x, const VectorXd& u, const PlantModel& model);

/// Total mechanical energy; conserved when undriven, undamped and gravity-free.
double total_energy(const VectorXd& x, const PlantModel& model);

struct Equilibrium {
    VectorXd x0;  // full state at rest
    VectorXd u0;  // gravity-compensating motor torque
};

/// Rest state consistent with arm configuration q_a0: elastic deflections and
/// gear wind-up solved so gravity is balanced (damped Newton, 1e-12 residual).
Equilibrium equilibrium(const PlantModel& model, const VectorXd& q_a0);

struct Linearization {
    MatrixXd A;
    MatrixXd B;
    MatrixXd C;
    Equilibrium eq;

    /// G(w) = C (jwI - A)^-1 B.
    MatrixXcd frf(double omega) const;
};

/// First-order expansion around the equilibrium of configuration q_a0.
/// Jacobians from Richardson-extrapolated central differences.
Linearization linearize(const PlantModel& model, const VectorXd& q_a0);

/// True FRF exported in the estimate container, method_tag "truth".
FrfEstimate true_frf(const PlantModel& model, const VectorXd& q_a0, const VectorXd& freqs);

struct SimulationOptions {
    double sample_rate = 0.0;
    int period_samples = 0;
    int n_periods = 0;
    int settle_periods = 0;
    int substeps = 5;  // RK4 internal steps per sample, step <= Ts/5
};

struct SimulationResult {
    TimeRecord record;
    int saturated_samples = 0;
    bool saturation_warning = false;
};

/// Closed-loop simulation of one experiment. speed_reference is
/// n_axes x period_samples (one period, repeated). Logged u is the applied
/// motor torque, y the measured motor velocity, r the speed reference.
SimulationResult simulate_closed_loop(const PlantModel& model,
                                      const ControllerConfig& ctrl,
                                      const DisturbanceConfig& dist,
                                      const MatrixXd& speed_reference,
                                      const VectorXd& q_a0,
                                      const SimulationOptions& opt);

}  // namespace frf::plant
