// Shared sphere, drive and probe setups for tests.
#pragma once

#include <cmath>

#include "spinem/bloch.hpp"
#include "spinem/deflection.hpp"
#include "spinem/pattern.hpp"

namespace fixture {

inline constexpr double kRadius = 75e-6;
inline constexpr double kFrequency = 4.89e9;

inline spinem::SpinSystem sphere() {
    spinem::SpinSystem s;
    s.volume = 4.0 / 3.0 * spinem::kPi * std::pow(kRadius, 3);
    return s;
}

inline spinem::DriveField drive(double b1 = 20e-6) {
    return spinem::DriveField::from_frequency(kFrequency, b1, 1.4e-3);
}

inline double resonance_field() { return kFrequency / sphere().gyromagnetic_ratio; }

inline spinem::ProbePosition probe(double x, double y) { return {x, y, kRadius}; }

/// Scene at B0 = B_res + field_detuning.
inline spinem::PatternScene scene(const spinem::ProbePosition& p, double field_detuning,
                                  double b1 = 20e-6) {
    const spinem::SpinSystem s = sphere();
    const spinem::DriveField d = drive(b1);
    const double b0 = resonance_field() + field_detuning;
    const double m0 = spinem::equilibrium_magnetization(s, spinem::thermal_polarization(s.temperature, b0));
    const spinem::SteadyState st = spinem::steady_state(s, d, spinem::BiasField{b0}, m0);
    return spinem::make_scene(p, d, st, s, spinem::electron_kinematics(200e3));
}

/// Scene with no specimen response: a pure drive line.
inline spinem::PatternScene drive_only() {
    spinem::PatternScene sc = scene(probe(0.0, 160e-6), 0.0);
    sc.state = spinem::make_steady_state(0.0, 0.0, 0.0, 0.0);
    return sc;
}

}  // namespace fixture
