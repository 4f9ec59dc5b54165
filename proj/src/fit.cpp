#include "spinem/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "spinem/errors.hpp"

namespace spinem {
namespace {

constexpr double kLorentzDerivativeNorm = 3.0792014356780038;  // 16 / (3√3)

double absorption_slope(LineProfile profile, double s) {
    if (profile == LineProfile::gaussian) {
        return -s * std::exp(-0.5 * s * s);
    }
    const double q = 1.0 + s * s;
    return -2.0 * s / (q * q);
}

double dispersion_slope(LineProfile profile, double s) {
    if (profile == LineProfile::gaussian) {
        return (1.0 - s * s) * std::exp(0.5 - 0.5 * s * s);
    }
    const double q = 1.0 + s * s;
    return kLorentzDerivativeNorm * (1.0 - 3.0 * s * s) / (q * q * q);
}

// Parameter layout in normalized units: [o0, o1, o2, center, width, amps...]
struct Layout {
    bool absorption = false;
    bool dispersion = false;
    int size() const { return 5 + int(absorption) + int(dispersion); }
    int abs_index() const { return 5; }
    int disp_index() const { return absorption ? 6 : 5; }
};

Layout layout_for(Channel channel) {
    Layout l;
    l.absorption = channel != Channel::dispersion;
    l.dispersion = channel != Channel::absorption;
    return l;
}

double model_value(const Layout& l, LineProfile profile, const Eigen::VectorXd& p, double u) {
    const double s = (u - p[3]) / p[4];
    double f = p[0] + p[1] * u + p[2] * u * u;
    if (l.absorption) f += p[l.abs_index()] * absorption_shape(profile, s);
    if (l.dispersion) f += p[l.disp_index()] * dispersion_shape(profile, s);
    return f;
}

void residuals_and_jacobian(const Layout& l, LineProfile profile, const Eigen::VectorXd& p,
                            const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                            Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const Eigen::Index n = u.size();
    r.resize(n);
    if (jac) jac->resize(n, l.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = (u[i] - p[3]) / p[4];
        r[i] = y[i] - model_value(l, profile, p, u[i]);
        if (!jac) continue;
        auto row = jac->row(i);
        row[0] = 1.0;
        row[1] = u[i];
        row[2] = u[i] * u[i];
        double slope = 0.0;
        if (l.absorption) {
            row[l.abs_index()] = absorption_shape(profile, s);
            slope += p[l.abs_index()] * absorption_slope(profile, s);
        }
        if (l.dispersion) {
            row[l.disp_index()] = dispersion_shape(profile, s);
            slope += p[l.disp_index()] * dispersion_slope(profile, s);
        }
        row[3] = -slope / p[4];
        row[4] = -s * slope / p[4];
    }
}

struct LmResult {
    Eigen::VectorXd params;
    Eigen::MatrixXd jtj;
    double rss = 0.0;
    int iterations = 0;
    bool converged = false;
};

LmResult levenberg_marquardt(const Layout& l, LineProfile profile, Eigen::VectorXd p,
                             const Eigen::VectorXd& u, const Eigen::VectorXd& y, int max_iterations,
                             double width_min, double width_max) {
    LmResult out;
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    residuals_and_jacobian(l, profile, p, u, y, r, &jac);
    double rss = r.squaredNorm();
    double lambda = 1e-3;
    Eigen::VectorXd r_trial;

    for (int it = 1; it <= max_iterations; ++it) {
        out.iterations = it;
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * r;
        Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12 * std::max(1.0, jtj.diagonal().maxCoeff()));

        bool accepted = false;
        while (lambda < 1e14) {
            Eigen::MatrixXd damped = jtj;
            damped.diagonal() += lambda * diag;
            const Eigen::VectorXd step = damped.ldlt().solve(grad);
            Eigen::VectorXd trial = p + step;
            const bool in_bounds = trial[4] > width_min && trial[4] < width_max &&
                                   std::abs(trial[3]) < 1.5 && step.allFinite();
            if (in_bounds) {
                residuals_and_jacobian(l, profile, trial, u, y, r_trial, nullptr);
                const double rss_trial = r_trial.squaredNorm();
                if (rss_trial <= rss) {
                    const double drop = rss - rss_trial;
                    const double rel_step =
                        (step.array().abs() / (trial.array().abs() + 1e-8)).maxCoeff();
                    p = trial;
                    rss = rss_trial;
                    lambda = std::max(lambda * 0.1, 1e-12);
                    accepted = true;
                    if (drop <= 1e-12 * rss + 1e-300 || rel_step < 1e-10) {
                        out.converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // No downhill step at any damping: stationary point.
            out.converged = true;
        }
        residuals_and_jacobian(l, profile, p, u, y, r, &jac);
        if (out.converged) break;
    }
    out.params = p;
    out.jtj = jac.transpose() * jac;
    out.rss = rss;
    return out;
}

Eigen::Vector3d quadratic_ls(const Eigen::VectorXd& u, const Eigen::VectorXd& y,
                             const std::vector<Eigen::Index>& rows) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), 3);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double ui = u[rows[k]];
        a.row(static_cast<Eigen::Index>(k)) << 1.0, ui, ui * ui;
        b[static_cast<Eigen::Index>(k)] = y[rows[k]];
    }
    return a.colPivHouseholderQr().solve(b);
}

}  // namespace

double absorption_shape(LineProfile profile, double u) {
    if (profile == LineProfile::gaussian) {
        return std::exp(-0.5 * u * u);
    }
    return 1.0 / (1.0 + u * u);
}

double dispersion_shape(LineProfile profile, double u) {
    if (profile == LineProfile::gaussian) {
        return u * std::exp(0.5 - 0.5 * u * u);
    }
    const double q = 1.0 + u * u;
    return kLorentzDerivativeNorm * u / (q * q);
}

double fwhm_per_width(LineProfile profile) {
    return profile == LineProfile::gaussian ? 2.0 * std::sqrt(2.0 * std::log(2.0)) : 2.0;
}

double FitReport::offset_at(double x) const {
    const double u = (x - x_mid) / x_half_span;
    return offset[0] + offset[1] * u + offset[2] * u * u;
}

double FitReport::signal_at(double x) const {
    const double s = (x - center) / width;
    double f = 0.0;
    if (channel != Channel::dispersion) f += amplitude * absorption_shape(profile, s);
    if (channel != Channel::absorption) f += dispersion_amplitude * dispersion_shape(profile, s);
    return f;
}

FitReport fit_line(std::span<const double> x, std::span<const double> y, const FitOptions& options) {
    if (x.size() != y.size()) {
        throw ConfigError("fit_line: x and y differ in length");
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    if (n < 9) {
        throw ConfigError("fit_line needs at least 9 points");
    }
    const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
    const double x_mid = 0.5 * (*xmin_it + *xmax_it);
    const double x_half = 0.5 * (*xmax_it - *xmin_it);
    if (!(x_half > 0.0)) {
        throw ConfigError("fit_line: sweep variable has zero span");
    }

    Eigen::VectorXd u(n);
    Eigen::VectorXd yv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        u[i] = (x[static_cast<std::size_t>(i)] - x_mid) / x_half;
        yv[i] = y[static_cast<std::size_t>(i)];
    }
    double y_scale = (yv.array() - yv.mean()).abs().maxCoeff();
    if (!(y_scale > 0.0)) y_scale = 1.0;
    const Eigen::VectorXd yn = yv / y_scale;

    // Robust detrend: quadratic through the outer wings only.
    std::vector<Eigen::Index> wings;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(u[i]) >= 0.6) wings.push_back(i);
    }
    if (wings.size() < 6) {
        wings.resize(static_cast<std::size_t>(n));
        std::iota(wings.begin(), wings.end(), Eigen::Index{0});
    }
    const Eigen::Vector3d trend = quadratic_ls(u, yn, wings);
    const Eigen::VectorXd detrended =
        yn - (trend[0] + trend[1] * u.array() + trend[2] * u.array().square()).matrix();

    Eigen::Index k_abs = 0;
    detrended.cwiseAbs().maxCoeff(&k_abs);
    Eigen::Index k_max = 0;
    Eigen::Index k_min = 0;
    detrended.maxCoeff(&k_max);
    detrended.minCoeff(&k_min);

    const Layout layout = layout_for(options.channel);
    const double du = 2.0 / static_cast<double>(n - 1);
    const double width_min = 0.25 * du;
    const double width_max = 4.0;

    std::vector<double> width_starts;
    if (options.initial_width) {
        width_starts.push_back(*options.initial_width / x_half);
    }
    width_starts.push_back(0.2);  // span / 10
    width_starts.push_back(std::max(0.5 * std::abs(u[k_max] - u[k_min]), 2.0 * du));
    width_starts.push_back(0.07);

    LmResult best;
    best.rss = std::numeric_limits<double>::infinity();
    for (double w0 : width_starts) {
        Eigen::VectorXd p0(layout.size());
        p0[0] = trend[0];
        p0[1] = trend[1];
        p0[2] = trend[2];
        p0[4] = std::clamp(w0, 2.0 * width_min, 1.0);
        if (options.channel == Channel::dispersion) {
            p0[3] = 0.5 * (u[k_max] + u[k_min]);
            const double lobe = 0.5 * (detrended[k_max] - detrended[k_min]);
            p0[layout.disp_index()] = u[k_max] > u[k_min] ? lobe : -lobe;
        } else {
            p0[3] = u[k_abs];
            p0[layout.abs_index()] = detrended[k_abs];
            if (layout.dispersion) p0[layout.disp_index()] = 0.0;
        }
        if (options.initial_center) {
            p0[3] = (*options.initial_center - x_mid) / x_half;
        }
        LmResult attempt = levenberg_marquardt(layout, options.profile, p0, u, yn,
                                               options.max_iterations, width_min, width_max);
        if (attempt.converged && attempt.rss < best.rss) {
            best = std::move(attempt);
        } else if (!best.converged && !attempt.converged && attempt.rss < best.rss) {
            best = std::move(attempt);
        }
    }
    if (!best.converged) {
        std::vector<double> last(best.params.data(), best.params.data() + best.params.size());
        throw FitError("Levenberg-Marquardt did not converge", std::move(last), best.iterations);
    }

    const int dof = static_cast<int>(n) - layout.size();
    const double s2 = best.rss / std::max(dof, 1);
    Eigen::MatrixXd cov_n = s2 * best.jtj.ldlt().solve(Eigen::MatrixXd::Identity(layout.size(), layout.size()));

    Eigen::VectorXd scale = Eigen::VectorXd::Constant(layout.size(), y_scale);
    scale[3] = x_half;
    scale[4] = x_half;

    FitReport rep;
    rep.channel = options.channel;
    rep.profile = options.profile;
    rep.x_mid = x_mid;
    rep.x_half_span = x_half;
    rep.iterations = best.iterations;
    rep.parameters = best.params.cwiseProduct(scale);
    rep.parameters[3] = x_mid + best.params[3] * x_half;
    rep.covariance = scale.asDiagonal() * cov_n * scale.asDiagonal();
    rep.parameter_names = {"offset0", "offset1", "offset2", "center", "width"};
    if (layout.absorption) rep.parameter_names.emplace_back("amplitude");
    if (layout.dispersion) rep.parameter_names.emplace_back("dispersion_amplitude");

    auto sd = [&](int i) { return std::sqrt(std::max(rep.covariance(i, i), 0.0)); };
    rep.offset = rep.parameters.head<3>();
    rep.offset_sigma << sd(0), sd(1), sd(2);
    rep.center = rep.parameters[3];
    rep.center_sigma = sd(3);
    rep.width = rep.parameters[4];
    rep.width_sigma = sd(4);
    if (layout.absorption) {
        rep.amplitude = rep.parameters[layout.abs_index()];
        rep.amplitude_sigma = sd(layout.abs_index());
    }
    if (layout.dispersion) {
        rep.dispersion_amplitude = rep.parameters[layout.disp_index()];
        rep.dispersion_amplitude_sigma = sd(layout.disp_index());
    }
    rep.fwhm = fwhm_per_width(options.profile) * rep.width;
    rep.fwhm_sigma = fwhm_per_width(options.profile) * rep.width_sigma;
    rep.peak_to_peak = (options.profile == LineProfile::gaussian ? 2.0 : 2.0 / std::sqrt(3.0)) * rep.width;
    rep.residual_std = y_scale * std::sqrt(s2);
    const double peak = options.channel == Channel::dispersion ? rep.dispersion_amplitude : rep.amplitude;
    rep.snr = rep.residual_std > 0.0 ? std::abs(peak) / rep.residual_std
                                     : std::numeric_limits<double>::infinity();
    return rep;
}

GyromagneticFit gyromagnetic_fit(std::span<const GyromagneticPoint> points) {
    std::vector<double> fields;
    for (const GyromagneticPoint& p : points) fields.push_back(p.b0);
    std::sort(fields.begin(), fields.end());
    if (points.size() < 2 || std::unique(fields.begin(), fields.end()) - fields.begin() < 2) {
        throw NumericError("gyromagnetic_fit: need at least two distinct B0 values (singular design)");
    }
    const bool weighted = std::all_of(points.begin(), points.end(),
                                      [](const GyromagneticPoint& p) { return p.sigma > 0.0; });
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::VectorXd w(n);
    Eigen::VectorXd b(n);
    Eigen::VectorXd nu(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const GyromagneticPoint& p = points[static_cast<std::size_t>(i)];
        w[i] = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
        b[i] = p.b0;
        nu[i] = p.frequency;
    }
    const double wsum = w.sum();
    const double b_bar = w.dot(b) / wsum;
    const Eigen::VectorXd db = b.array() - b_bar;
    const double sxx = (w.array() * db.array().square()).sum();
    const double slope = (w.array() * db.array() * nu.array()).sum() / sxx;
    const double mean_nu = w.dot(nu) / wsum;

    GyromagneticFit fit;
    fit.gamma = slope;
    fit.intercept = mean_nu - slope * b_bar;
    const Eigen::VectorXd resid = nu - (fit.intercept + slope * b.array()).matrix();
    fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(n));

    double var_scale = 1.0;
    if (!weighted) {
        var_scale = n > 2 ? resid.squaredNorm() / static_cast<double>(n - 2)
                          : std::numeric_limits<double>::quiet_NaN();
    }
    const double var_slope = var_scale / sxx;
    const double var_mean = var_scale / wsum;
    fit.gamma_sigma = std::sqrt(var_slope);
    fit.intercept_sigma = std::sqrt(var_mean + b_bar * b_bar * var_slope);
    return fit;
}

}  // namespace spinem
