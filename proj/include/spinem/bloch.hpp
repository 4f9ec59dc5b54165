#pragma once

#include <cmath>

#include <Eigen/Core>

#include "spinem/constants.hpp"

namespace spinem {

/// Spin ensemble of the specimen.
struct SpinSystem {
    double gyromagnetic_ratio = 28.0e9;  // Γ, Hz/T
    double t1 = 100e-9;                  // s
    double t2 = 100e-9;                  // s
    double spin_density = 1.5e27;        // spins/m^3
    double volume = 0.0;                 // m^3
    double temperature = 290.0;          // K

    /// Throws ConfigError when an invariant is violated.
    void validate() const;
};

/// Continuous-wave drive, linearly polarized along the specimen-plane x axis.
struct DriveField {
    double angular_frequency = 0.0;  // ω, rad/s
    double b1_max = 20e-6;           // T
    double extent = 1.4e-3;          // l, m

    static DriveField from_frequency(double frequency_hz, double b1_max, double extent);
    double frequency() const { return angular_frequency / (2.0 * kPi); }
    void validate() const;
};

/// Static bias field along the optical axis.
struct BiasField {
    double b0 = 0.0;  // T
};

/// Rotating-frame steady state. mx_rot is the dispersion (M_x'), my_rot the
/// absorption (M_y') component, mz_rot the longitudinal remainder.
struct SteadyState {
    double mx_rot = 0.0;     // A/m
    double my_rot = 0.0;     // A/m
    double mz_rot = 0.0;     // A/m
    double amplitude = 0.0;  // m = |(M_x', M_y')|
    double phase_lag = 0.0;  // θ in (-π, π], m_par = m cos(ωt + θ)
    double m0 = 0.0;         // equilibrium magnetization
};

/// ω_res = 2π Γ B0.
inline double resonance_frequency(double gyromagnetic_ratio, double b0) {
    return 2.0 * kPi * gyromagnetic_ratio * b0;
}

/// Thermal polarization tanh(g µB B0 / 2kT) of a spin-1/2 ensemble.
double thermal_polarization(double temperature, double b0,
                            const PhysicalConstants& constants = kConstants);

/// M0 = ρ µB p.
double equilibrium_magnetization(const SpinSystem& spins, double polarization,
                                 const PhysicalConstants& constants = kConstants);

/// Closed-form steady state of the Bloch equations in the frame rotating with
/// the drive. The linear drive contributes a single co-rotating component of
/// amplitude B1/2.
SteadyState steady_state(const SpinSystem& spins, const DriveField& drive, const BiasField& bias,
                         double m0);

/// Steady state for an explicit angular detuning ω − ω_res.
SteadyState steady_state_at_detuning(const SpinSystem& spins, double b1_max, double detuning,
                                     double m0);

/// Builds the (m, θ) representation from rotating-frame components.
SteadyState make_steady_state(double mx_rot, double my_rot, double mz_rot, double m0);

/// Opening angle of the precession cone, atan(m / M_z). Diagnostic only.
inline double precession_cone_angle(const SteadyState& state) {
    return std::atan2(state.amplitude, state.mz_rot);
}

/// Lab-frame in-plane magnetization at drive phase ωt, split into the
/// components parallel and perpendicular to B1.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> inplane_magnetization(Scalar mx_rot, Scalar my_rot, Scalar phase) {
    using std::cos;
    using std::sin;
    const Scalar c = cos(phase);
    const Scalar s = sin(phase);
    return {mx_rot * c - my_rot * s, my_rot * c + mx_rot * s};
}

inline Eigen::Vector2d inplane_magnetization(const SteadyState& state, double phase) {
    return inplane_magnetization<double>(state.mx_rot, state.my_rot, phase);
}

}  // namespace spinem
