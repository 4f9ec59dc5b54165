#include "spinem/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "spinem/constants.hpp"
#include "spinem/errors.hpp"

namespace spinem {
namespace {

double bilinear(const ImageD& image, double u, double v) {
    const double fu = std::floor(u);
    const double fv = std::floor(v);
    const int c0 = static_cast<int>(fu);
    const int r0 = static_cast<int>(fv);
    const double tu = u - fu;
    const double tv = v - fv;
    auto at = [&](int r, int c) {
        if (r < 0 || c < 0 || r >= image.rows() || c >= image.cols()) return 0.0;
        return image(r, c);
    };
    return (1.0 - tv) * ((1.0 - tu) * at(r0, c0) + tu * at(r0, c0 + 1)) +
           tv * ((1.0 - tu) * at(r0 + 1, c0) + tu * at(r0 + 1, c0 + 1));
}

}  // namespace

ImageD median_filter_3x3(const ImageD& image) {
    const Eigen::Index rows = image.rows();
    const Eigen::Index cols = image.cols();
    ImageD out(rows, cols);
    std::array<double, 9> window{};
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            int k = 0;
            for (Eigen::Index dr = -1; dr <= 1; ++dr) {
                const Eigen::Index rr = std::clamp<Eigen::Index>(r + dr, 0, rows - 1);
                for (Eigen::Index dc = -1; dc <= 1; ++dc) {
                    const Eigen::Index cc = std::clamp<Eigen::Index>(c + dc, 0, cols - 1);
                    window[static_cast<std::size_t>(k++)] = image(rr, cc);
                }
            }
            std::nth_element(window.begin(), window.begin() + 4, window.end());
            out(r, c) = window[4];
        }
    }
    return out;
}

ImageD global_threshold(const ImageD& image, double level) {
    if (!(level >= 0.0)) {
        throw ConfigError("threshold level must be non-negative");
    }
    return (image < level).select(0.0, image);
}

double background_threshold(const ImageD& image, int patch) {
    const Eigen::Index n = std::min<Eigen::Index>({patch, image.rows(), image.cols()});
    const auto block = image.topLeftCorner(n, n);
    const double mean = block.mean();
    const double var = (block - mean).square().sum() / static_cast<double>(block.size());
    return mean + 3.0 * std::sqrt(var);
}

Eigen::Vector2d weighted_com(const ImageD& image) {
    const double total = image.sum();
    if (!(total > 0.0)) {
        throw NumericError("center of mass undefined for an image with zero total intensity");
    }
    const Eigen::ArrayXd row_sums = image.rowwise().sum();
    const Eigen::ArrayXd col_sums = image.colwise().sum().transpose();
    const Eigen::ArrayXd rows = Eigen::ArrayXd::LinSpaced(image.rows(), 0.0, image.rows() - 1.0);
    const Eigen::ArrayXd cols = Eigen::ArrayXd::LinSpaced(image.cols(), 0.0, image.cols() - 1.0);
    return {(col_sums * cols).sum() / total, (row_sums * rows).sum() / total};
}

ImageD shift_image(const ImageD& image, double du, double dv) {
    ImageD out(image.rows(), image.cols());
    for (Eigen::Index r = 0; r < image.rows(); ++r) {
        for (Eigen::Index c = 0; c < image.cols(); ++c) {
            out(r, c) = bilinear(image, static_cast<double>(c) - du, static_cast<double>(r) - dv);
        }
    }
    return out;
}

ImageD rotate_image(const ImageD& image, double angle, const Eigen::Vector2d& center) {
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    ImageD out(image.rows(), image.cols());
    for (Eigen::Index r = 0; r < image.rows(); ++r) {
        for (Eigen::Index c = 0; c < image.cols(); ++c) {
            // inverse map: rotate the output coordinate by -angle
            const double du = static_cast<double>(c) - center.x();
            const double dv = static_cast<double>(r) - center.y();
            const double su = center.x() + ca * du + sa * dv;
            const double sv = center.y() - sa * du + ca * dv;
            out(r, c) = bilinear(image, su, sv);
        }
    }
    return out;
}

ImageStack drift_correct(const ImageStack& stack) {
    if (stack.frames.size() < 2) {
        throw ConfigError("drift_correct needs at least two frames");
    }
    std::vector<Eigen::Vector2d> coms;
    coms.reserve(stack.frames.size());
    for (const DetectorImage& frame : stack.frames) {
        coms.push_back(weighted_com(frame.pixels));
    }
    ImageStack out;
    out.frames.reserve(stack.frames.size());
    for (std::size_t k = 0; k < stack.frames.size(); ++k) {
        const Eigen::Vector2d shift = coms.front() - coms[k];
        DetectorImage frame = stack.frames[k];
        if (k > 0) {
            frame.pixels = shift_image(frame.pixels, shift.x(), shift.y());
        }
        out.frames.push_back(std::move(frame));
        out.alignment_shifts.push_back(k > 0 ? shift : Eigen::Vector2d::Zero());
    }
    return out;
}

PrincipalAxes principal_axes(const ImageD& image) {
    PrincipalAxes axes;
    axes.com = weighted_com(image);
    const double total = image.sum();
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (Eigen::Index r = 0; r < image.rows(); ++r) {
        const double y = static_cast<double>(r) - axes.com.y();
        for (Eigen::Index c = 0; c < image.cols(); ++c) {
            const double w = image(r, c);
            if (w == 0.0) continue;
            const double x = static_cast<double>(c) - axes.com.x();
            sxx += w * x * x;
            sxy += w * x * y;
            syy += w * y * y;
        }
    }
    axes.covariance << sxx / total, sxy / total, sxy / total, syy / total;

    const double half_trace = 0.5 * (axes.covariance(0, 0) + axes.covariance(1, 1));
    const double half_diff = 0.5 * (axes.covariance(0, 0) - axes.covariance(1, 1));
    const double off = axes.covariance(0, 1);
    const double root = std::hypot(half_diff, off);
    axes.lambda_major = half_trace + root;
    axes.lambda_minor = half_trace - root;
    axes.angle = 0.5 * std::atan2(2.0 * off, 2.0 * half_diff);
    if (axes.angle <= -0.5 * kPi) {
        axes.angle += kPi;
    }
    return axes;
}

double pca_tilt(const ImageD& image) {
    const PrincipalAxes axes = principal_axes(image);
    if (!(axes.lambda_major - axes.lambda_minor > 1e-12 * (axes.lambda_major + axes.lambda_minor))) {
        throw NumericError("pattern is isotropic; principal direction undefined");
    }
    return axes.angle;
}

double pattern_length(const ImageD& image, double tilt) {
    const Eigen::Vector2d com = weighted_com(image);
    const double cu = std::cos(tilt);
    const double cv = std::sin(tilt);
    Eigen::Vector3d left = Eigen::Vector3d::Zero();   // (Σw, Σw u, Σw v)
    Eigen::Vector3d right = Eigen::Vector3d::Zero();
    for (Eigen::Index r = 0; r < image.rows(); ++r) {
        for (Eigen::Index c = 0; c < image.cols(); ++c) {
            const double w = image(r, c);
            if (w == 0.0) continue;
            const double u = static_cast<double>(c);
            const double v = static_cast<double>(r);
            const double s = (u - com.x()) * cu + (v - com.y()) * cv;
            const Eigen::Vector3d term(w, w * u, w * v);
            if (s < 0.0) {
                left += term;
            } else if (s > 0.0) {
                right += term;
            } else {
                left += 0.5 * term;
                right += 0.5 * term;
            }
        }
    }
    if (!(left[0] > 0.0) || !(right[0] > 0.0)) {
        throw NumericError("pattern_length: one half-plane carries no intensity");
    }
    const Eigen::Vector2d com_left = left.tail<2>() / left[0];
    const Eigen::Vector2d com_right = right.tail<2>() / right[0];
    return (com_right - com_left).norm();
}

PatternMeasurement measure(const ImageStack& stack, const MeasureOptions& options) {
    if (stack.frames.empty()) {
        throw ConfigError("measure: empty image stack");
    }
    for (const DetectorImage& frame : stack.frames) {
        if (frame.pixels.rows() != stack.frames.front().pixels.rows() ||
            frame.pixels.cols() != stack.frames.front().pixels.cols()) {
            throw ConfigError("measure: frames differ in size");
        }
    }
    const ImageStack aligned =
        (options.align && stack.frames.size() >= 2) ? drift_correct(stack) : stack;

    PatternMeasurement m;
    for (const DetectorImage& frame : aligned.frames) {
        const ImageD filtered = median_filter_3x3(frame.pixels);
        const double level = options.threshold ? *options.threshold : background_threshold(filtered);
        const ImageD clean = global_threshold(filtered, level);
        const double tilt = pca_tilt(clean);
        m.com += weighted_com(clean);
        m.frame_tilts.push_back(tilt);
        m.frame_lengths_px.push_back(pattern_length(clean, tilt));
    }
    const double n = static_cast<double>(aligned.frames.size());
    m.com /= n;
    const Eigen::Map<const Eigen::ArrayXd> tilts(m.frame_tilts.data(), static_cast<Eigen::Index>(n));
    const Eigen::Map<const Eigen::ArrayXd> lengths(m.frame_lengths_px.data(), static_cast<Eigen::Index>(n));
    m.tilt = tilts.mean();
    m.tilt_std = n > 1 ? std::sqrt((tilts - m.tilt).square().sum() / (n - 1.0)) : 0.0;
    m.length_px = lengths.mean();
    m.length = m.length_px * aligned.frames.front().camera.pixel_angle();
    return m;
}

}  // namespace spinem
