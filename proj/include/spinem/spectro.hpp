#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "spinem/analysis.hpp"
#include "spinem/bloch.hpp"
#include "spinem/deflection.hpp"
#include "spinem/fit.hpp"
#include "spinem/pattern.hpp"

namespace spinem {

enum class SweepMode { field, frequency };

struct SweepPoint {
    double b0 = 0.0;                 // T
    double angular_frequency = 0.0;  // rad/s
};

/// Field sweep at fixed drive frequency, `n` evenly spaced points.
std::vector<SweepPoint> field_sweep_points(double center_b0, double span, int n, double angular_frequency);
/// Frequency sweep at fixed bias field; center and span in Hz.
std::vector<SweepPoint> frequency_sweep_points(double center_hz, double span_hz, int n, double b0);

struct SweepConfig {
    SweepMode mode = SweepMode::field;
    std::vector<SweepPoint> points;
    ProbePosition probe;
    DriveField drive;  // angular_frequency is taken from each point
    SpinSystem spins;
    CameraModel camera;
    BeamSpot spot;
    double beam_energy = 200e3;  // eV
    int frames_per_point = 4;
    int n_phases = 4096;

    // Injected LAD image drift, polynomial in the sweep index i:
    // c0 + c1 i + c2 i². Rotation in rad, magnification as a fraction.
    Eigen::Vector3d background_tilt_poly = Eigen::Vector3d::Zero();
    Eigen::Vector3d background_scale_poly = Eigen::Vector3d::Zero();
    double frame_rotation_jitter = 0.0;  // rad rms, independent per frame
    double frame_drift = 0.0;            // px rms, independent per frame and axis
    bool shot_noise = true;
    std::uint64_t seed = 1;

    MeasureOptions analysis;
    unsigned jobs = 0;  // 0 = hardware concurrency

    void validate() const;
    /// B0 for field sweeps, drive frequency in Hz for frequency sweeps.
    double sweep_value(std::size_t i) const;
};

/// One channel of a sweep: raw values plus the fit products once fitted.
struct Spectrum {
    SweepMode mode = SweepMode::field;
    std::vector<double> sweep;      // T (field) or Hz (frequency)
    std::vector<double> b0;         // T
    std::vector<double> frequency;  // Hz
    std::vector<double> raw;        // rad

    std::optional<FitReport> fit;
    std::vector<double> offset;
    std::vector<double> signal;     // raw − offset
    std::vector<double> residuals;  // raw − offset − fitted line

    /// Fitted absorption FWHM in Hz; field sweeps convert with dν/dB0 = Γ.
    double fwhm_hz(double gyromagnetic_ratio) const;
    /// Fitted center as a resonance (B0, ν) pair.
    GyromagneticPoint resonance(double gyromagnetic_ratio) const;
};

struct SweepResult {
    std::vector<PatternMeasurement> measurements;
    Spectrum tilt;
    Spectrum length;
};

/// Renders the frames of sweep point `index` exactly as run_sweep does,
/// including drift, jitter and shot noise, stored at float32 precision.
ImageStack render_point(const SweepConfig& config, std::size_t index);

SweepResult run_sweep(const SweepConfig& config);

/// Fits the spectrum and fills offset, signal and residuals.
const FitReport& fit_spectrum(Spectrum& spectrum, const FitOptions& options);

/// Absorption line without field modulation: the field derivative of the
/// Lorentzian M_y'(B0), unit peak-to-peak. Reference curve only.
std::vector<double> lockin_reference(const SpinSystem& spins, const DriveField& drive,
                                     std::span<const double> b0);

struct MapScenario {
    SpinSystem spins;
    DriveField drive;
    ElectronKinematics kin;
    double exclusion_radius = 0.0;  // m
    double temperature_b0 = 0.0;    // field used for the thermal polarization, T
};

/// γ_max over a square grid; row index runs along y, column index along x.
/// Points inside the exclusion radius hold NaN.
struct GammaMap {
    double detuning = 0.0;  // B0 − B_res, T
    std::vector<double> coords;
    ImageD values;          // rad
};

std::vector<GammaMap> map2d(const MapScenario& scenario, double half_extent, int n,
                            std::span<const double> detunings);

/// Microresonator field amplitude versus drive frequency.
struct B1Profile {
    enum class Kind { flat, lorentzian, table };
    Kind kind = Kind::flat;
    double peak = 20e-6;     // T
    double center_hz = 4.7e9;
    double fwhm_hz = 100e6;
    std::vector<double> table_hz;
    std::vector<double> table_b1;

    double at(double frequency_hz) const;
};

struct ImpedancePoint {
    double frequency = 0.0;  // Hz
    double b1 = 0.0;         // T
    double alpha_max = 0.0;  // rad
};

std::vector<ImpedancePoint> impedance_scan(std::span<const double> frequencies, const B1Profile& profile,
                                           double extent, const ElectronKinematics& kin,
                                           const PhysicalConstants& constants = kConstants);

struct S11Table {
    std::vector<double> frequency;  // Hz, ascending
    std::vector<double> s11_db;

    /// Delivered power fraction 1 − |S11|², linearly interpolated.
    double delivered(double frequency_hz) const;
};

struct ImpedanceComparison {
    std::vector<double> frequency;
    std::vector<double> alpha_normalized;
    std::vector<double> delivered_normalized;
    double correlation = 0.0;
    double alpha_peak_hz = 0.0;
    double delivered_peak_hz = 0.0;
};

/// Peak-normalized overlay of α_max(ν) and 1 − |S11(ν)|². Throws DomainError
/// when the S11 table does not cover the scan.
ImpedanceComparison compare_impedance(std::span<const ImpedancePoint> scan, const S11Table& s11);

}  // namespace spinem
