#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

namespace spinem {

/// Row-major pixel grid: row index runs along the detector v (γ) axis, column
/// index along u (α).
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ImageD = Image<double>;
using ImageF = Image<float>;

/// LAD-mode detector geometry and dose.
struct CameraModel {
    double camera_length = 600.0;      // m
    double pixel_pitch = 51.2e-6;      // m (4096² sensor at 6.4 µm, binned 8×)
    int width_px = 512;
    int height_px = 512;
    double exposure = 5.0;             // s
    double beam_current = 500e-12;     // A
    double max_counts = 1e12;          // per-pixel saturation level
    double background_counts = 0.0;    // mean dark level per pixel

    double center_u() const { return 0.5 * (width_px - 1); }
    double center_v() const { return 0.5 * (height_px - 1); }
    /// Angle (rad) subtended by one pixel.
    double pixel_angle() const { return pixel_pitch / camera_length; }
    void validate() const;
};

bool same_geometry(const CameraModel& a, const CameraModel& b);

/// Sweep-point bookkeeping carried along with an image.
struct ImageMetadata {
    double b0 = 0.0;                 // T
    double angular_frequency = 0.0;  // rad/s
    double probe_x = 0.0;            // m
    double probe_y = 0.0;            // m
    std::int64_t n_phases = 0;
    std::optional<std::uint64_t> seed;
    std::int64_t index = -1;         // sweep point
    std::int64_t frame = -1;
    double clipped_fraction = 0.0;
};

struct DetectorImage {
    ImageD pixels;
    CameraModel camera;
    ImageMetadata meta;

    int width() const { return static_cast<int>(pixels.cols()); }
    int height() const { return static_cast<int>(pixels.rows()); }
};

/// Rounds every pixel through float32, the on-disk precision.
inline ImageD quantize_to_float(const ImageD& image) { return image.cast<float>().cast<double>(); }

}  // namespace spinem
