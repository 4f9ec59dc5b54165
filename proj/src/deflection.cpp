#include "spinem/deflection.hpp"

#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "spinem/errors.hpp"

namespace spinem {

ElectronKinematics electron_kinematics(double kinetic_energy_ev, const PhysicalConstants& constants) {
    if (!(kinetic_energy_ev > 0.0)) {
        throw ConfigError("beam kinetic energy must be positive");
    }
    const double rest_energy_ev = constants.electron_rest_mass * constants.speed_of_light *
                                  constants.speed_of_light / constants.electron_charge;
    ElectronKinematics kin;
    kin.kinetic_energy = kinetic_energy_ev;
    kin.lorentz_factor = 1.0 + kinetic_energy_ev / rest_energy_ev;
    kin.relativistic_mass = kin.lorentz_factor * constants.electron_rest_mass;
    // 1 - 1/γ² written to avoid cancellation at low energy.
    const double t = kinetic_energy_ev / rest_energy_ev;
    const double beta2 = t * (t + 2.0) / (kin.lorentz_factor * kin.lorentz_factor);
    kin.velocity = constants.speed_of_light * std::sqrt(beta2);
    return kin;
}

void ProbePosition::validate() const {
    if (!(exclusion_radius > 0.0)) {
        throw DomainError("probe exclusion radius must be positive");
    }
    if (!(radius() > exclusion_radius)) {
        throw DomainError("probe position lies inside the specimen exclusion radius");
    }
}

Eigen::Vector3d dipole_field(const Eigen::Vector3d& moment, const Eigen::Vector3d& r,
                             double exclusion_radius, const PhysicalConstants& constants) {
    if (!(r.norm() > exclusion_radius)) {
        throw DomainError("dipole field evaluated inside the exclusion radius");
    }
    return dipole_field<double>(moment, r, constants.vacuum_permeability);
}

double drive_deflection(const DriveField& drive, const ElectronKinematics& kin, double phase,
                        const PhysicalConstants& constants) {
    return kin.rigidity_inverse(constants) * drive.extent * drive.b1_max * std::cos(phase);
}

double deflection_prefactor(double volume, const ElectronKinematics& kin,
                            const PhysicalConstants& constants) {
    return -kin.rigidity_inverse(constants) * constants.vacuum_permeability * volume / (2.0 * kPi);
}

SpecimenDeflection specimen_deflection_closed(const ProbePosition& pos, double m_par, double m_perp,
                                              const SpinSystem& spins, const ElectronKinematics& kin,
                                              const PhysicalConstants& constants) {
    pos.validate();
    const Eigen::Vector2d bg = specimen_deflection_closed<double>(
        pos.x, pos.y, m_par, m_perp, deflection_prefactor(spins.volume, kin, constants));
    return {bg[0], bg[1]};
}

SpecimenDeflection specimen_deflection_numeric(const ProbePosition& pos,
                                               const Eigen::Vector3d& moment,
                                               const ElectronKinematics& kin, double z_range,
                                               int n_steps, const PhysicalConstants& constants) {
    const double rho = pos.radius();
    if (!(rho > pos.exclusion_radius) || !(pos.exclusion_radius > 0.0)) {
        throw DomainError("electron trajectory passes within the exclusion radius");
    }
    if (!(z_range >= 100.0 * rho)) {
        throw DomainError("z_range must span at least 100 |R| on each side");
    }
    if (n_steps < 1000) {
        throw DomainError("n_steps must be at least 1000");
    }
    if (n_steps % 2 != 0) {
        ++n_steps;
    }

    // Composite Simpson in t with z = ρ tan t, which keeps the 1/r³ peak
    // well resolved for any z_range.
    const Eigen::Vector3d velocity(0.0, 0.0, -kin.velocity);
    const double t_max = std::atan(z_range / rho);
    const double h = 2.0 * t_max / n_steps;
    Eigen::Vector3d integral = Eigen::Vector3d::Zero();
    for (int i = 0; i <= n_steps; ++i) {
        const double t = -t_max + h * i;
        const double cos_t = std::cos(t);
        const double z = rho * std::tan(t);
        const double dz_dt = rho / (cos_t * cos_t);
        const Eigen::Vector3d r(pos.x, pos.y, z);
        const Eigen::Vector3d b = dipole_field(moment, r, pos.exclusion_radius, constants);
        const double weight = (i == 0 || i == n_steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        integral += weight * dz_dt * velocity.cross(b);
    }
    integral *= h / 3.0;

    const double scale = -constants.electron_charge /
                         (kin.relativistic_mass * kin.velocity * kin.velocity);
    const Eigen::Vector3d delta = scale * integral;
    // δ = (γ, β, 0)
    return {delta.y(), delta.x()};
}

GammaDecomposition gamma_decomposition(const ProbePosition& pos) {
    pos.validate();
    const double x2 = pos.x * pos.x;
    const double y2 = pos.y * pos.y;
    const double r2 = x2 + y2;
    GammaDecomposition out;
    out.a = (y2 - x2) / (r2 * r2);
    out.b = 2.0 * pos.x * pos.y / (r2 * r2);
    out.c = 1.0 / r2;
    out.phi = std::atan2(2.0 * pos.x * pos.y, y2 - x2);
    return out;
}

double gamma_max(const ProbePosition& pos, const SteadyState& state, double prefactor) {
    const GammaDecomposition d = gamma_decomposition(pos);
    return prefactor * (d.a * state.my_rot + d.b * state.mx_rot);
}

double pattern_tilt_closed(const ProbePosition& pos, const SteadyState& state, double alpha_max,
                           double prefactor) {
    if (!(alpha_max > 0.0)) {
        throw DomainError("pattern tilt undefined for alpha_max <= 0");
    }
    return std::atan(gamma_max(pos, state, prefactor) / alpha_max);
}

DeflectionSample deflection_sample(const ProbePosition& pos, const SteadyState& state,
                                   double alpha_max, double prefactor, double phase) {
    const Eigen::Vector2d m = inplane_magnetization(state, phase);
    const Eigen::Vector2d bg =
        specimen_deflection_closed<double>(pos.x, pos.y, m[0], m[1], prefactor);
    return {alpha_max * std::cos(phase), bg[0], bg[1], phase};
}

}  // namespace spinem
