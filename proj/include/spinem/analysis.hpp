#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "spinem/image.hpp"

namespace spinem {

/// Ordered frames of one measurement point.
struct ImageStack {
    std::vector<DetectorImage> frames;
    /// Per-frame (du, dv) applied by drift_correct; empty before alignment.
    std::vector<Eigen::Vector2d> alignment_shifts;
};

struct PatternMeasurement {
    Eigen::Vector2d com = Eigen::Vector2d::Zero();  // (u, v) px
    double tilt = 0.0;                              // ε, rad
    double tilt_std = 0.0;                          // sample std of per-frame ε
    double length = 0.0;                            // rad
    double length_px = 0.0;
    std::vector<double> frame_tilts;
    std::vector<double> frame_lengths_px;
};

/// Result of the intensity-weighted principal component analysis.
struct PrincipalAxes {
    Eigen::Vector2d com = Eigen::Vector2d::Zero();
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
    double lambda_major = 0.0;
    double lambda_minor = 0.0;
    double angle = 0.0;  // major-axis angle to the u axis, (-π/2, π/2]
};

/// 3×3 median with edge replication at the borders.
ImageD median_filter_3x3(const ImageD& image);

/// Zeroes every pixel below `level`.
ImageD global_threshold(const ImageD& image, double level);

/// mean + 3 std of a square patch in the top-left corner.
double background_threshold(const ImageD& image, int patch = 16);

/// Intensity-weighted centroid (u, v). Throws NumericError on zero total.
Eigen::Vector2d weighted_com(const ImageD& image);

/// Bilinear translation: out(v, u) = in(v − dv, u − du); zero outside.
ImageD shift_image(const ImageD& image, double du, double dv);

/// Bilinear rotation by `angle` (counter-clockwise in (u, v)) about `center`.
ImageD rotate_image(const ImageD& image, double angle, const Eigen::Vector2d& center);

/// Translates frames so every COM coincides with the first frame's COM.
ImageStack drift_correct(const ImageStack& stack);

PrincipalAxes principal_axes(const ImageD& image);

/// Pattern tilt from the closed-form 2×2 eigendecomposition of the weighted
/// covariance. Throws NumericError when the two eigenvalues coincide.
double pca_tilt(const ImageD& image);

/// Bisects the image through its COM along ε + 90° and returns the distance
/// between the two half-plane centroids. Pixels on the bisector are split
/// evenly.
double pattern_length(const ImageD& image, double tilt);

struct MeasureOptions {
    std::optional<double> threshold;  // counts; default is background_threshold
    bool align = true;                // drift-correct stacks with >= 2 frames
};

PatternMeasurement measure(const ImageStack& stack, const MeasureOptions& options = {});

}  // namespace spinem
