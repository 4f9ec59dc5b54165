#pragma once

#include <numbers>

namespace spinem {

inline constexpr double kPi = std::numbers::pi;

/// CODATA 2018 values in SI units.
struct PhysicalConstants {
    double electron_charge = 1.602176634e-19;         // C
    double electron_rest_mass = 9.1093837015e-31;     // kg
    double bohr_magneton = 9.2740100783e-24;          // J/T
    double reduced_planck = 1.054571817e-34;          // J s
    double boltzmann = 1.380649e-23;                  // J/K
    double vacuum_permeability = 1.25663706212e-6;    // T m/A
    double speed_of_light = 299792458.0;              // m/s
    double g_factor = 2.00231930436256;               // free electron, magnitude

    /// Free-electron gyromagnetic ratio g µB / (2π ħ) in Hz/T.
    double free_electron_gyromagnetic_ratio() const {
        return g_factor * bohr_magneton / (2.0 * kPi * reduced_planck);
    }
};

inline constexpr PhysicalConstants kConstants{};

}  // namespace spinem
