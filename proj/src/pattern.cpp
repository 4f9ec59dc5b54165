#include "spinem/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "spinem/errors.hpp"
#include "spinem/rng.hpp"

namespace spinem {
namespace {

// Pixel-integrated 1D Gaussian weights for pixels [first, first + n),
// normalized to unit sum.
void spot_weights(double center, double sigma, int first, int n, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(n));
    const double inv = 1.0 / (std::sqrt(2.0) * sigma);
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
        const double lo = (first + k - 0.5 - center) * inv;
        const double hi = (first + k + 0.5 - center) * inv;
        // erfc difference keeps precision in the far tails on either side
        const double w = lo >= 0.0 ? 0.5 * (std::erfc(lo) - std::erfc(hi))
                                   : 0.5 * (std::erfc(-hi) - std::erfc(-lo));
        out[static_cast<std::size_t>(k)] = w;
        sum += w;
    }
    for (double& w : out) {
        w /= sum;
    }
}

}  // namespace

void CameraModel::validate() const {
    if (!(camera_length > 0.0)) throw ConfigError("camera.length must be positive");
    if (!(pixel_pitch > 0.0)) throw ConfigError("camera.pixel_pitch must be positive");
    if (width_px < 64 || height_px < 64) throw ConfigError("camera must be at least 64x64 pixels");
    if (!(exposure > 0.0)) throw ConfigError("camera.exposure must be positive");
    if (!(beam_current >= 0.0)) throw ConfigError("camera.beam_current must be non-negative");
    if (!(max_counts > 0.0)) throw ConfigError("camera.max_counts must be positive");
    if (!(background_counts >= 0.0)) throw ConfigError("camera.background_counts must be non-negative");
}

bool same_geometry(const CameraModel& a, const CameraModel& b) {
    return a.width_px == b.width_px && a.height_px == b.height_px &&
           a.camera_length == b.camera_length && a.pixel_pitch == b.pixel_pitch;
}

PixelPosition angle_to_pixel(const CameraModel& camera, double along_alpha, double along_gamma) {
    PixelPosition p;
    p.u = camera.center_u() + along_alpha / camera.pixel_angle();
    p.v = camera.center_v() + along_gamma / camera.pixel_angle();
    p.on_detector = p.u >= 0.0 && p.u <= camera.width_px - 1 && p.v >= 0.0 &&
                    p.v <= camera.height_px - 1;
    return p;
}

PatternScene make_scene(const ProbePosition& probe, const DriveField& drive, const SteadyState& state,
                        const SpinSystem& spins, const ElectronKinematics& kin,
                        const PhysicalConstants& constants) {
    probe.validate();
    PatternScene scene;
    scene.probe = probe;
    scene.state = state;
    scene.alpha_max = drive_deflection(drive, kin, 0.0, constants);
    scene.prefactor = deflection_prefactor(spins.volume, kin, constants);
    return scene;
}

double electrons_per_exposure(const CameraModel& camera, const PhysicalConstants& constants) {
    return camera.exposure * camera.beam_current / constants.electron_charge;
}

DetectorImage render_pattern(const PatternScene& scene, const CameraModel& camera,
                             const BeamSpot& spot, const RenderOptions& options,
                             const PhysicalConstants& constants) {
    camera.validate();
    if (options.n_phases < 256) {
        throw ConfigError("render_pattern needs at least 256 phases");
    }
    if (!(spot.rms_width > 0.0)) {
        throw ConfigError("beam spot rms width must be positive");
    }

    const int width = camera.width_px;
    const int height = camera.height_px;
    const int n = options.n_phases;
    const double weight = electrons_per_exposure(camera, constants) / n;
    const double sigma_px = spot.rms_width / camera.pixel_angle();
    // window of pixels within `reach` of the spot center on each axis, so the
    // footprint is mirror symmetric about the center
    const double reach = 5.0 * sigma_px + 1.0;

    const PatternDistortion& dist = options.distortion;
    const double rot_c = std::cos(dist.rotation) * dist.scale;
    const double rot_s = std::sin(dist.rotation) * dist.scale;

    ImageD mean = ImageD::Zero(height, width);
    std::vector<double> wu;
    std::vector<double> wv;
    double clipped = 0.0;

    for (int i = 0; i < n; ++i) {
        const double phase = 2.0 * kPi * (i + 0.5) / n;
        const DeflectionSample d = scene.at_phase(phase);
        const double a = d.alpha + d.beta;
        const double g = d.gamma;
        PixelPosition p = angle_to_pixel(camera, rot_c * a - rot_s * g, rot_s * a + rot_c * g);
        p.u += dist.shift_u;
        p.v += dist.shift_v;
        if (p.u < 0.0 || p.u > width - 1 || p.v < 0.0 || p.v > height - 1) {
            throw DomainError("pattern endpoint falls off the detector; reduce camera length or drive");
        }

        const int u0 = static_cast<int>(std::ceil(p.u - reach));
        const int v0 = static_cast<int>(std::ceil(p.v - reach));
        const int nu = static_cast<int>(std::floor(p.u + reach)) - u0 + 1;
        const int nv = static_cast<int>(std::floor(p.v + reach)) - v0 + 1;
        spot_weights(p.u, sigma_px, u0, nu, wu);
        spot_weights(p.v, sigma_px, v0, nv, wv);

        double deposited = 0.0;
        for (int r = 0; r < nv; ++r) {
            const int row = v0 + r;
            if (row < 0 || row >= height) continue;
            const double wr = weight * wv[static_cast<std::size_t>(r)];
            for (int c = 0; c < nu; ++c) {
                const int col = u0 + c;
                if (col < 0 || col >= width) continue;
                const double w = wr * wu[static_cast<std::size_t>(c)];
                mean(row, col) += w;
                deposited += w;
            }
        }
        clipped += weight - deposited;
    }

    if (camera.background_counts > 0.0) {
        mean += camera.background_counts;
    }

    DetectorImage out;
    out.camera = camera;
    out.meta.n_phases = n;
    out.meta.probe_x = scene.probe.x;
    out.meta.probe_y = scene.probe.y;
    const double total = weight * n;
    out.meta.clipped_fraction = total > 0.0 ? clipped / total : 0.0;

    if (options.noise_seed) {
        out.meta.seed = options.noise_seed;
        std::mt19937_64 gen(stream_key(*options.noise_seed, {0x706f6973736f6eULL}));
        for (Eigen::Index k = 0; k < mean.size(); ++k) {
            double& px = mean.data()[k];
            if (px > 0.0) {
                std::poisson_distribution<std::int64_t> draw(px);
                px = static_cast<double>(draw(gen));
            }
        }
    }
    out.pixels = mean.min(camera.max_counts);
    return out;
}

ImageD difference_image(const DetectorImage& a, const DetectorImage& b) {
    if (a.pixels.rows() != b.pixels.rows() || a.pixels.cols() != b.pixels.cols() ||
        !same_geometry(a.camera, b.camera)) {
        throw DomainError("difference_image: images differ in shape or camera model");
    }
    return a.pixels - b.pixels;
}

}  // namespace spinem
