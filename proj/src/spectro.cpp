#include "spinem/spectro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "spinem/errors.hpp"
#include "spinem/parallel.hpp"
#include "spinem/rng.hpp"

namespace spinem {
namespace {

double poly_at(const Eigen::Vector3d& c, double i) { return c[0] + c[1] * i + c[2] * i * i; }

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    if (it == xs.end()) return ys.back();
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

Spectrum make_spectrum(const SweepConfig& config) {
    Spectrum s;
    s.mode = config.mode;
    for (std::size_t i = 0; i < config.points.size(); ++i) {
        s.sweep.push_back(config.sweep_value(i));
        s.b0.push_back(config.points[i].b0);
        s.frequency.push_back(config.points[i].angular_frequency / (2.0 * kPi));
    }
    return s;
}

}  // namespace

std::vector<SweepPoint> field_sweep_points(double center_b0, double span, int n, double angular_frequency) {
    if (n < 2) throw ConfigError("sweep needs at least two points");
    std::vector<SweepPoint> points;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(2 * i - (n - 1)) / (n - 1);
        points.push_back({center_b0 + 0.5 * span * t, angular_frequency});
    }
    return points;
}

std::vector<SweepPoint> frequency_sweep_points(double center_hz, double span_hz, int n, double b0) {
    if (n < 2) throw ConfigError("sweep needs at least two points");
    std::vector<SweepPoint> points;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(2 * i - (n - 1)) / (n - 1);
        points.push_back({b0, 2.0 * kPi * (center_hz + 0.5 * span_hz * t)});
    }
    return points;
}

double SweepConfig::sweep_value(std::size_t i) const {
    const SweepPoint& p = points.at(i);
    return mode == SweepMode::field ? p.b0 : p.angular_frequency / (2.0 * kPi);
}

void SweepConfig::validate() const {
    if (points.size() < 5) throw ConfigError("sweep needs at least 5 points");
    bool increasing = true;
    bool decreasing = true;
    for (std::size_t i = 1; i < points.size(); ++i) {
        increasing = increasing && sweep_value(i) > sweep_value(i - 1);
        decreasing = decreasing && sweep_value(i) < sweep_value(i - 1);
    }
    if (!increasing && !decreasing) throw ConfigError("sweep variable must be strictly monotone");
    if (frames_per_point < 1) throw ConfigError("sweep.frames_per_point must be >= 1");
    if (n_phases < 256) throw ConfigError("sweep.n_phases must be >= 256");
    if (frame_rotation_jitter < 0.0 || frame_drift < 0.0) {
        throw ConfigError("noise amplitudes must be non-negative");
    }
    spins.validate();
    if (!(drive.b1_max >= 0.0) || !(drive.extent > 0.0)) {
        throw ConfigError("drive.b1 must be >= 0 and drive.extent > 0");
    }
    camera.validate();
    probe.validate();
}

ImageStack render_point(const SweepConfig& config, std::size_t index) {
    const SweepPoint& point = config.points.at(index);
    const ElectronKinematics kin = electron_kinematics(config.beam_energy);
    DriveField drive = config.drive;
    drive.angular_frequency = point.angular_frequency;

    const double p = thermal_polarization(config.spins.temperature, point.b0);
    const double m0 = equilibrium_magnetization(config.spins, p);
    const SteadyState state = steady_state(config.spins, drive, BiasField{point.b0}, m0);
    const PatternScene scene = make_scene(config.probe, drive, state, config.spins, kin);

    const double i = static_cast<double>(index);
    ImageStack stack;
    for (int k = 0; k < config.frames_per_point; ++k) {
        const auto frame = static_cast<std::uint64_t>(k);
        std::mt19937_64 gen = make_stream(config.seed, {index, frame, 1});
        std::normal_distribution<double> normal;
        const double jitter = normal(gen);
        const double drift_u = normal(gen);
        const double drift_v = normal(gen);

        RenderOptions options;
        options.n_phases = config.n_phases;
        options.distortion.rotation = poly_at(config.background_tilt_poly, i) +
                                      config.frame_rotation_jitter * jitter;
        options.distortion.scale = 1.0 + poly_at(config.background_scale_poly, i);
        options.distortion.shift_u = config.frame_drift * drift_u;
        options.distortion.shift_v = config.frame_drift * drift_v;
        if (config.shot_noise) {
            options.noise_seed = stream_key(config.seed, {index, frame, 2});
        }
        DetectorImage image = render_pattern(scene, config.camera, config.spot, options);
        image.pixels = quantize_to_float(image.pixels);
        image.meta.b0 = point.b0;
        image.meta.angular_frequency = point.angular_frequency;
        image.meta.index = static_cast<std::int64_t>(index);
        image.meta.frame = k;
        stack.frames.push_back(std::move(image));
    }
    return stack;
}

SweepResult run_sweep(const SweepConfig& config) {
    config.validate();
    SweepResult result;
    result.measurements.resize(config.points.size());
    parallel_for(config.points.size(), config.jobs, [&](std::size_t i) {
        result.measurements[i] = measure(render_point(config, i), config.analysis);
    });

    result.tilt = make_spectrum(config);
    result.length = make_spectrum(config);
    for (const PatternMeasurement& m : result.measurements) {
        result.tilt.raw.push_back(m.tilt);
        result.length.raw.push_back(m.length);
    }
    return result;
}

const FitReport& fit_spectrum(Spectrum& spectrum, const FitOptions& options) {
    if (spectrum.sweep.size() != spectrum.raw.size()) {
        throw ConfigError("spectrum arrays differ in length");
    }
    spectrum.fit = fit_line(spectrum.sweep, spectrum.raw, options);
    const FitReport& fit = *spectrum.fit;
    spectrum.offset.clear();
    spectrum.signal.clear();
    spectrum.residuals.clear();
    for (std::size_t i = 0; i < spectrum.sweep.size(); ++i) {
        const double off = fit.offset_at(spectrum.sweep[i]);
        spectrum.offset.push_back(off);
        spectrum.signal.push_back(spectrum.raw[i] - off);
        spectrum.residuals.push_back(spectrum.raw[i] - off - fit.signal_at(spectrum.sweep[i]));
    }
    return fit;
}

double Spectrum::fwhm_hz(double gyromagnetic_ratio) const {
    if (!fit) throw NumericError("spectrum has not been fitted");
    return mode == SweepMode::field ? gyromagnetic_ratio * fit->fwhm : fit->fwhm;
}

GyromagneticPoint Spectrum::resonance(double gyromagnetic_ratio) const {
    if (!fit) throw NumericError("spectrum has not been fitted");
    GyromagneticPoint p;
    if (mode == SweepMode::field) {
        p.b0 = fit->center;
        p.frequency = frequency.front();
        p.sigma = gyromagnetic_ratio * fit->center_sigma;
    } else {
        p.b0 = b0.front();
        p.frequency = fit->center;
        p.sigma = fit->center_sigma;
    }
    return p;
}

std::vector<double> lockin_reference(const SpinSystem& spins, const DriveField& drive,
                                     std::span<const double> b0) {
    const double two_pi_gamma = 2.0 * kPi * spins.gyromagnetic_ratio;
    const double rabi = two_pi_gamma * 0.5 * drive.b1_max;
    const double sat = rabi * rabi * spins.t1 * spins.t2;
    std::vector<double> out;
    for (double b : b0) {
        const double detuning = drive.angular_frequency - two_pi_gamma * b;
        const double d = 1.0 + detuning * detuning * spins.t2 * spins.t2 + sat;
        // d/dB0 of 1/d
        out.push_back(2.0 * detuning * spins.t2 * spins.t2 * two_pi_gamma / (d * d));
    }
    if (!out.empty()) {
        const auto [lo, hi] = std::minmax_element(out.begin(), out.end());
        const double pp = *hi - *lo;
        if (pp > 0.0) {
            for (double& v : out) v /= pp;
        }
    }
    return out;
}

std::vector<GammaMap> map2d(const MapScenario& scenario, double half_extent, int n,
                            std::span<const double> detunings) {
    if (n < 2) throw ConfigError("map grid needs at least 2 points per axis");
    if (!(half_extent > 0.0)) throw ConfigError("map extent must be positive");
    if (!(scenario.exclusion_radius > 0.0)) throw ConfigError("exclusion radius must be positive");

    const double p = thermal_polarization(scenario.spins.temperature, scenario.temperature_b0);
    const double m0 = equilibrium_magnetization(scenario.spins, p);
    const double prefactor = deflection_prefactor(scenario.spins.volume, scenario.kin);
    const double two_pi_gamma = 2.0 * kPi * scenario.spins.gyromagnetic_ratio;

    // Integer numerators keep the grid exactly symmetric under x -> -x.
    std::vector<double> coords(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        coords[static_cast<std::size_t>(i)] = half_extent * static_cast<double>(2 * i - (n - 1)) / (n - 1);
    }

    std::vector<GammaMap> maps;
    for (double detuning : detunings) {
        // B0 above resonance raises ω_res, so ω − ω_res = −2πΓ ΔB0.
        const SteadyState state = steady_state_at_detuning(scenario.spins, scenario.drive.b1_max,
                                                           -two_pi_gamma * detuning, m0);
        GammaMap map;
        map.detuning = detuning;
        map.coords = coords;
        map.values.resize(n, n);
        for (int r = 0; r < n; ++r) {
            for (int c = 0; c < n; ++c) {
                const ProbePosition pos{coords[static_cast<std::size_t>(c)],
                                        coords[static_cast<std::size_t>(r)],
                                        scenario.exclusion_radius};
                map.values(r, c) = pos.radius() > pos.exclusion_radius
                                       ? gamma_max(pos, state, prefactor)
                                       : std::numeric_limits<double>::quiet_NaN();
            }
        }
        maps.push_back(std::move(map));
    }
    return maps;
}

double B1Profile::at(double frequency_hz) const {
    switch (kind) {
        case Kind::flat:
            return peak;
        case Kind::lorentzian: {
            const double u = (frequency_hz - center_hz) / (0.5 * fwhm_hz);
            return peak / (1.0 + u * u);
        }
        case Kind::table:
            if (table_hz.empty() || frequency_hz < table_hz.front() || frequency_hz > table_hz.back()) {
                throw DomainError("B1 profile table does not cover the requested frequency");
            }
            return interpolate(table_hz, table_b1, frequency_hz);
    }
    return peak;
}

std::vector<ImpedancePoint> impedance_scan(std::span<const double> frequencies, const B1Profile& profile,
                                           double extent, const ElectronKinematics& kin,
                                           const PhysicalConstants& constants) {
    if (frequencies.empty()) throw ConfigError("impedance scan needs at least one frequency");
    std::vector<ImpedancePoint> out;
    for (double f : frequencies) {
        DriveField drive = DriveField::from_frequency(f, profile.at(f), extent);
        out.push_back({f, drive.b1_max, drive_deflection(drive, kin, 0.0, constants)});
    }
    return out;
}

double S11Table::delivered(double frequency_hz) const {
    std::vector<double> power(s11_db.size());
    std::transform(s11_db.begin(), s11_db.end(), power.begin(),
                   [](double db) { return 1.0 - std::pow(10.0, db / 10.0); });
    return interpolate(frequency, power, frequency_hz);
}

ImpedanceComparison compare_impedance(std::span<const ImpedancePoint> scan, const S11Table& s11) {
    if (scan.empty()) throw ConfigError("empty impedance scan");
    if (s11.frequency.size() < 2 || s11.frequency.size() != s11.s11_db.size()) {
        throw ConfigError("S11 table needs at least two rows");
    }
    ImpedanceComparison cmp;
    for (const ImpedancePoint& p : scan) {
        if (p.frequency < s11.frequency.front() || p.frequency > s11.frequency.back()) {
            throw DomainError("S11 data does not cover the scanned frequency range");
        }
        cmp.frequency.push_back(p.frequency);
        cmp.alpha_normalized.push_back(p.alpha_max);
        cmp.delivered_normalized.push_back(s11.delivered(p.frequency));
    }
    auto normalize = [](std::vector<double>& v) {
        const auto peak = std::max_element(v.begin(), v.end());
        const std::size_t at = static_cast<std::size_t>(peak - v.begin());
        if (*peak > 0.0) {
            const double scale = *peak;
            for (double& x : v) x /= scale;
        }
        return at;
    };
    cmp.alpha_peak_hz = cmp.frequency[normalize(cmp.alpha_normalized)];
    cmp.delivered_peak_hz = cmp.frequency[normalize(cmp.delivered_normalized)];

    const auto n = static_cast<Eigen::Index>(cmp.frequency.size());
    const Eigen::Map<const Eigen::ArrayXd> a(cmp.alpha_normalized.data(), n);
    const Eigen::Map<const Eigen::ArrayXd> d(cmp.delivered_normalized.data(), n);
    const Eigen::ArrayXd da = a - a.mean();
    const Eigen::ArrayXd dd = d - d.mean();
    const double denom = std::sqrt(da.square().sum() * dd.square().sum());
    cmp.correlation = denom > 0.0 ? (da * dd).sum() / denom : 0.0;
    return cmp;
}

}  // namespace spinem
