#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spinem {

/// Which line components sit on top of the quadratic offset.
enum class Channel { absorption, dispersion, combined };

/// Gaussian is the default lineshape; Lorentzian matches the Bloch steady
/// state exactly.
enum class LineProfile { gaussian, lorentzian };

struct FitOptions {
    Channel channel = Channel::absorption;
    LineProfile profile = LineProfile::gaussian;
    int max_iterations = 200;
    std::optional<double> initial_center;
    std::optional<double> initial_width;
};

/// Least-squares result. Offset coefficients are in the normalized sweep
/// coordinate u = (x − x_mid) / x_half_span; everything else is in units of x.
struct FitReport {
    Channel channel = Channel::absorption;
    LineProfile profile = LineProfile::gaussian;

    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
    double x_mid = 0.0;
    double x_half_span = 1.0;

    double center = 0.0;
    double width = 0.0;                 // Gaussian σ or Lorentzian HWHM
    double amplitude = 0.0;             // absorption peak height
    double dispersion_amplitude = 0.0;  // derivative-lobe height

    double fwhm = 0.0;                  // of the absorption line
    double peak_to_peak = 0.0;          // lobe separation of the derivative line

    double center_sigma = 0.0;
    double width_sigma = 0.0;
    double amplitude_sigma = 0.0;
    double dispersion_amplitude_sigma = 0.0;
    double fwhm_sigma = 0.0;
    Eigen::Vector3d offset_sigma = Eigen::Vector3d::Zero();

    double residual_std = 0.0;
    double snr = 0.0;
    int iterations = 0;

    std::vector<std::string> parameter_names;
    Eigen::VectorXd parameters;
    Eigen::MatrixXd covariance;

    double offset_at(double x) const;
    double signal_at(double x) const;
    double model_at(double x) const { return offset_at(x) + signal_at(x); }
};

/// Fits quadratic offset + line by Levenberg-Marquardt. Needs at least nine
/// points. Throws FitError when the iteration does not converge.
FitReport fit_line(std::span<const double> x, std::span<const double> y, const FitOptions& options = {});

/// Unit-peak line shapes, u = (x − center) / width. The derivative shapes
/// peak at +1 on the positive side.
double absorption_shape(LineProfile profile, double u);
double dispersion_shape(LineProfile profile, double u);

/// Full width at half maximum per unit width parameter.
double fwhm_per_width(LineProfile profile);

struct GyromagneticPoint {
    double b0 = 0.0;         // T
    double frequency = 0.0;  // Hz
    double sigma = 0.0;      // Hz; 0 = unweighted
};

struct GyromagneticFit {
    double gamma = 0.0;        // Hz/T
    double gamma_sigma = 0.0;
    double intercept = 0.0;    // Hz
    double intercept_sigma = 0.0;
    double residual_rms = 0.0; // Hz
};

/// Weighted straight line ν = Γ B0 + c. Throws NumericError on fewer than two
/// distinct fields.
GyromagneticFit gyromagnetic_fit(std::span<const GyromagneticPoint> points);

}  // namespace spinem
