#include "spinem/bloch.hpp"

#include <cmath>
#include <string>

#include "spinem/errors.hpp"

namespace spinem {
namespace {

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw ConfigError(message);
    }
}

double wrap_angle(double angle) {
    // (-π, π]
    double wrapped = std::remainder(angle, 2.0 * kPi);
    if (wrapped <= -kPi) {
        wrapped += 2.0 * kPi;
    }
    return wrapped;
}

}  // namespace

void SpinSystem::validate() const {
    require(gyromagnetic_ratio > 0.0, "spin.gyromagnetic_ratio must be positive");
    require(t2 > 0.0, "spin.t2 must be positive");
    require(t1 >= t2, "spin.t1 must be >= spin.t2");
    require(spin_density >= 0.0, "spin.density must be non-negative");
    require(volume > 0.0, "spin.volume must be positive");
    require(temperature > 0.0, "spin.temperature must be positive");
}

DriveField DriveField::from_frequency(double frequency_hz, double b1_max, double extent) {
    return DriveField{2.0 * kPi * frequency_hz, b1_max, extent};
}

void DriveField::validate() const {
    require(angular_frequency > 0.0, "drive.frequency must be positive");
    require(b1_max >= 0.0, "drive.b1 must be non-negative");
    require(extent > 0.0, "drive.extent must be positive");
}

double thermal_polarization(double temperature, double b0, const PhysicalConstants& constants) {
    if (!(temperature > 0.0)) {
        throw ConfigError("temperature must be positive");
    }
    const double zeeman = constants.g_factor * constants.bohr_magneton * b0;
    return std::tanh(zeeman / (2.0 * constants.boltzmann * temperature));
}

double equilibrium_magnetization(const SpinSystem& spins, double polarization,
                                 const PhysicalConstants& constants) {
    if (!(polarization >= 0.0 && polarization < 1.0)) {
        throw ConfigError("polarization must lie in [0, 1)");
    }
    return spins.spin_density * constants.bohr_magneton * polarization;
}

SteadyState make_steady_state(double mx_rot, double my_rot, double mz_rot, double m0) {
    SteadyState state;
    state.mx_rot = mx_rot;
    state.my_rot = my_rot;
    state.mz_rot = mz_rot;
    state.m0 = m0;
    state.amplitude = std::hypot(mx_rot, my_rot);
    // m_par = m cos(ωt + θ), m_perp = m sin(ωt + θ)
    state.phase_lag = wrap_angle(0.5 * kPi - std::atan2(mx_rot, my_rot));
    return state;
}

SteadyState steady_state(const SpinSystem& spins, const DriveField& drive, const BiasField& bias,
                         double m0) {
    const double detuning =
        drive.angular_frequency - resonance_frequency(spins.gyromagnetic_ratio, bias.b0);
    return steady_state_at_detuning(spins, drive.b1_max, detuning, m0);
}

SteadyState steady_state_at_detuning(const SpinSystem& spins, double b1_max, double detuning,
                                     double m0) {
    const double rabi = 2.0 * kPi * spins.gyromagnetic_ratio * 0.5 * b1_max;
    const double dt2 = detuning * spins.t2;
    const double denom = 1.0 + dt2 * dt2 + rabi * rabi * spins.t1 * spins.t2;

    const double mx = detuning * rabi * spins.t2 * spins.t2 / denom * m0;
    const double my = rabi * spins.t2 / denom * m0;
    const double mz = (1.0 + dt2 * dt2) / denom * m0;
    return make_steady_state(mx, my, mz, m0);
}

}  // namespace spinem
