#pragma once

#include <cmath>

#include <Eigen/Core>

#include "spinem/bloch.hpp"
#include "spinem/constants.hpp"

namespace spinem {

/// Relativistic state of the beam electrons.
struct ElectronKinematics {
    double kinetic_energy = 0.0;   // eV
    double velocity = 0.0;         // v_e, m/s
    double relativistic_mass = 0.0;  // m*, kg
    double lorentz_factor = 1.0;

    /// e / (m* v_e): converts a transverse field-path integral (T m) into an
    /// angle.
    double rigidity_inverse(const PhysicalConstants& constants = kConstants) const {
        return constants.electron_charge / (relativistic_mass * velocity);
    }
};

ElectronKinematics electron_kinematics(double kinetic_energy_ev,
                                       const PhysicalConstants& constants = kConstants);

/// Probe offset R = (x, y) from the specimen center in the specimen plane.
struct ProbePosition {
    double x = 0.0;                 // m
    double y = 0.0;                 // m
    double exclusion_radius = 0.0;  // m

    double radius() const { return std::hypot(x, y); }
    /// Throws DomainError when the probe sits inside the exclusion radius.
    void validate() const;
};

/// Beam deflection at one drive phase. alpha and beta are along the B1-driven
/// deflection axis, gamma perpendicular to it.
struct DeflectionSample {
    double alpha = 0.0;  // rad
    double beta = 0.0;   // rad
    double gamma = 0.0;  // rad
    double phase = 0.0;  // ωt, rad
};

struct SpecimenDeflection {
    double beta = 0.0;   // rad
    double gamma = 0.0;  // rad
};

/// 𝒜, ℬ, 𝒞 = 1/R² and the extra phase lag φ entering γ.
struct GammaDecomposition {
    double a = 0.0;    // 1/m^2
    double b = 0.0;    // 1/m^2
    double c = 0.0;    // 1/m^2
    double phi = 0.0;  // rad
};

/// Point-dipole field µ0/(4π r³) [3(µ·r̂)r̂ − µ].
template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> dipole_field(const Eigen::Matrix<Scalar, 3, 1>& moment,
                                         const Eigen::Matrix<Scalar, 3, 1>& r,
                                         Scalar vacuum_permeability = Scalar(kConstants.vacuum_permeability)) {
    using std::sqrt;
    const Scalar r2 = r.squaredNorm();
    const Scalar inv_r = Scalar(1) / sqrt(r2);
    const Scalar inv_r3 = inv_r * inv_r * inv_r;
    const Scalar scale = vacuum_permeability / Scalar(4 * kPi) * inv_r3;
    return scale * (Scalar(3) * moment.dot(r) / r2 * r - moment);
}

/// dipole_field that refuses points inside the exclusion radius.
Eigen::Vector3d dipole_field(const Eigen::Vector3d& moment, const Eigen::Vector3d& r,
                             double exclusion_radius,
                             const PhysicalConstants& constants = kConstants);

/// α(ωt) = e l B1 cos(ωt) / (m* v_e) for a uniform B1 over |z| <= l/2.
double drive_deflection(const DriveField& drive, const ElectronKinematics& kin, double phase,
                        const PhysicalConstants& constants = kConstants);

/// Prefactor 𝒩 = −e/(m* v_e) · µ0 V / 2π, in rad m²/(A/m).
double deflection_prefactor(double volume, const ElectronKinematics& kin,
                            const PhysicalConstants& constants = kConstants);

/// Closed-form (β, γ) for an in-plane magnetization (m_par, m_perp) at R = (x, y).
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> specimen_deflection_closed(Scalar x, Scalar y, Scalar m_par,
                                                       Scalar m_perp, Scalar prefactor) {
    const Scalar x2 = x * x;
    const Scalar y2 = y * y;
    const Scalar r2 = x2 + y2;
    const Scalar scale = prefactor / (r2 * r2);
    const Scalar beta = scale * (y2 * m_par - Scalar(2) * x * y * m_perp - x2 * m_par);
    const Scalar gamma = scale * (y2 * m_perp + Scalar(2) * x * y * m_par - x2 * m_perp);
    return {beta, gamma};
}

SpecimenDeflection specimen_deflection_closed(const ProbePosition& pos, double m_par, double m_perp,
                                              const SpinSystem& spins, const ElectronKinematics& kin,
                                              const PhysicalConstants& constants = kConstants);

/// Numerical line integral of the Lorentz deflection (−e/(m* v²)) ∫ v × B dz
/// through the dipole field of `moment`, over z in [−z_range, z_range].
/// Independent of the closed form; used to validate it.
SpecimenDeflection specimen_deflection_numeric(const ProbePosition& pos,
                                               const Eigen::Vector3d& moment,
                                               const ElectronKinematics& kin, double z_range,
                                               int n_steps,
                                               const PhysicalConstants& constants = kConstants);

GammaDecomposition gamma_decomposition(const ProbePosition& pos);

/// γ at ωt = 0: 𝒩 [𝒜 M_y' + ℬ M_x'].
double gamma_max(const ProbePosition& pos, const SteadyState& state, double prefactor);

/// Time-averaged pattern tilt: tan ε = 𝒩 (𝒜 M_y' + ℬ M_x') / α_max.
double pattern_tilt_closed(const ProbePosition& pos, const SteadyState& state, double alpha_max,
                           double prefactor);

/// All three deflections at one drive phase.
DeflectionSample deflection_sample(const ProbePosition& pos, const SteadyState& state,
                                   double alpha_max, double prefactor, double phase);

}  // namespace spinem
