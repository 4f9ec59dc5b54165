#pragma once

#include <cstdint>
#include <optional>

#include "spinem/bloch.hpp"
#include "spinem/deflection.hpp"
#include "spinem/image.hpp"

namespace spinem {

/// Isotropic Gaussian probe profile, in detector-plane angle.
struct BeamSpot {
    double rms_width = 3.0e-7;  // rad
};

struct PixelPosition {
    double u = 0.0;
    double v = 0.0;
    bool on_detector = true;
};

/// Maps a deflection (along α, along γ) to fractional pixel coordinates.
/// Off-detector positions come back flagged rather than throwing.
PixelPosition angle_to_pixel(const CameraModel& camera, double along_alpha, double along_gamma);

/// Everything the renderer needs to evaluate (α + β, γ) at a drive phase.
struct PatternScene {
    ProbePosition probe;
    SteadyState state;
    double alpha_max = 0.0;   // rad
    double prefactor = 0.0;   // 𝒩

    DeflectionSample at_phase(double phase) const {
        return deflection_sample(probe, state, alpha_max, prefactor, phase);
    }
};

PatternScene make_scene(const ProbePosition& probe, const DriveField& drive, const SteadyState& state,
                        const SpinSystem& spins, const ElectronKinematics& kin,
                        const PhysicalConstants& constants = kConstants);

/// Rigid rotation and magnification of the projected pattern about the
/// optical axis (LAD image drift), plus a translation in pixels.
struct PatternDistortion {
    double rotation = 0.0;  // rad
    double scale = 1.0;
    double shift_u = 0.0;   // px
    double shift_v = 0.0;   // px
};

struct RenderOptions {
    int n_phases = 4096;
    std::optional<std::uint64_t> noise_seed;
    PatternDistortion distortion;
};

/// Time-averaged detector image of the sinusoidally deflected beam. Phases
/// are stratified midpoints on [0, 2π); each contributes a pixel-integrated
/// Gaussian spot carrying exposure·current/(e·n_phases) electrons. With a
/// noise seed every pixel is replaced by a Poisson draw of its mean.
/// Throws DomainError when the pattern leaves the detector.
DetectorImage render_pattern(const PatternScene& scene, const CameraModel& camera,
                             const BeamSpot& spot, const RenderOptions& options = {},
                             const PhysicalConstants& constants = kConstants);

/// Pixelwise a − b, no clipping.
ImageD difference_image(const DetectorImage& a, const DetectorImage& b);

/// Mean number of electrons per exposure.
double electrons_per_exposure(const CameraModel& camera, const PhysicalConstants& constants = kConstants);

}  // namespace spinem
