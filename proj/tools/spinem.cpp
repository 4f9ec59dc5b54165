// Command-line front end: sweeps, pattern rendering, stack analysis, maps,
// impedance scans and gyromagnetic regression.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spinem/analysis.hpp"
#include "spinem/config.hpp"
#include "spinem/errors.hpp"
#include "spinem/fit.hpp"
#include "spinem/io.hpp"
#include "spinem/pattern.hpp"
#include "spinem/spectro.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spinem;

namespace {

constexpr double kMdeg = 180.0e3 / kPi;

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    unsigned jobs = 0;
    std::string out;
};

config::RunConfig load_config(const Common& c) {
    if (c.config_path.empty()) {
        config::RunConfig cfg;
        for (const std::string& o : c.overrides) cfg.set(o);
        cfg.set("schema_version=" + std::to_string(config::kSchemaVersion));
        return cfg;
    }
    return config::RunConfig::load(c.config_path, c.overrides);
}

void add_common(CLI::App* cmd, Common& c, bool config_required, const std::string& out_help,
                const std::vector<std::string>& sections) {
    auto* opt = cmd->add_option("-c,--config", c.config_path, "YAML config file");
    if (config_required) opt->required();
    cmd->add_option("--set", c.overrides, "override a config key, key=value (repeatable)");
    cmd->add_option("-j,--jobs", c.jobs, "worker threads (0 = all cores)");
    cmd->add_option("-o,--out", c.out, out_help)->required();
    cmd->footer(config::describe_keys(sections));
}

json fit_to_json(const FitReport& f, const Spectrum& s, double gamma) {
    json j;
    j["channel"] = f.channel == Channel::absorption ? "absorption"
                   : f.channel == Channel::dispersion ? "dispersion"
                                                      : "combined";
    j["profile"] = f.profile == LineProfile::gaussian ? "gaussian" : "lorentzian";
    j["center"] = f.center;
    j["center_sigma"] = f.center_sigma;
    j["width"] = f.width;
    j["amplitude"] = f.amplitude;
    j["amplitude_sigma"] = f.amplitude_sigma;
    j["dispersion_amplitude"] = f.dispersion_amplitude;
    j["dispersion_amplitude_sigma"] = f.dispersion_amplitude_sigma;
    j["fwhm"] = f.fwhm;
    j["fwhm_sigma"] = f.fwhm_sigma;
    j["fwhm_Hz"] = s.fwhm_hz(gamma);
    j["peak_to_peak"] = f.peak_to_peak;
    j["offset_coefficients_normalized"] = {f.offset[0], f.offset[1], f.offset[2]};
    j["offset_x_mid"] = f.x_mid;
    j["offset_x_half_span"] = f.x_half_span;
    j["residual_std"] = f.residual_std;
    j["snr"] = f.snr;
    j["iterations"] = f.iterations;
    return j;
}

io::CsvTable spectrum_table(const Spectrum& s) {
    io::CsvTable t;
    t.header = {"B0_T", "freq_Hz", "raw_rad"};
    if (s.fit) {
        t.header.insert(t.header.end(), {"offset_rad", "signal_rad", "fit_rad", "residual_rad"});
    }
    for (std::size_t i = 0; i < s.raw.size(); ++i) {
        std::vector<double> row = {s.b0[i], s.frequency[i], s.raw[i]};
        if (s.fit) {
            row.insert(row.end(), {s.offset[i], s.signal[i], s.fit->signal_at(s.sweep[i]), s.residuals[i]});
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::vector<double> scaled(const std::vector<double>& v, double k) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * k;
    return out;
}

void plot_spectrum(const fs::path& path, const Spectrum& s, const std::string& title, const std::string& unit,
                   double k) {
    const bool field = s.mode == SweepMode::field;
    const std::vector<double> x = field ? scaled(s.sweep, 1e3) : scaled(s.sweep, 1e-9);
    std::vector<io::PlotSeries> series = {{"raw", x, scaled(s.raw, k), "#1f77b4", true}};
    if (s.fit) {
        std::vector<double> model(s.sweep.size());
        for (std::size_t i = 0; i < s.sweep.size(); ++i) model[i] = s.fit->model_at(s.sweep[i]) * k;
        series.push_back({"fit", x, model, "#d62728", false});
        series.push_back({"offset", x, scaled(s.offset, k), "#7f7f7f", false});
    }
    io::write_svg_plot(path, title, field ? "B0 (mT)" : "frequency (GHz)", unit, series);
}

// Runs one sweep into `dir`. Returns the tilt-channel resonance when the fit succeeded.
std::optional<GyromagneticPoint> sweep_into(const config::RunConfig& cfg, const SweepConfig& sc, const fs::path& dir,
                                            bool save_frames, int& status) {
    fs::create_directories(dir);
    if (save_frames) {
        for (std::size_t i = 0; i < sc.points.size(); ++i) {
            const ImageStack stack = render_point(sc, i);
            for (const DetectorImage& f : stack.frames) {
                char name[64];
                std::snprintf(name, sizeof name, "p%04zu_f%02lld.spnm", i, static_cast<long long>(f.meta.frame));
                io::write_spnm(dir / "frames" / name, f);
            }
        }
    }
    SweepResult r = run_sweep(sc);
    io::write_csv(dir / "measurements.csv", io::measurement_table(r.measurements, r.tilt.b0, r.tilt.frequency));

    const double gamma = sc.spins.gyromagnetic_ratio;
    const ElectronKinematics kin = electron_kinematics(sc.beam_energy);
    DriveField drive = sc.drive;
    drive.angular_frequency = sc.points.front().angular_frequency;
    const double alpha_max = drive_deflection(drive, kin, 0.0);

    json report;
    report["alpha_max_rad"] = alpha_max;
    report["points"] = sc.points.size();
    report["frames_per_point"] = sc.frames_per_point;
    std::optional<GyromagneticPoint> resonance;
    for (auto [name, spectrum] : {std::pair<std::string, Spectrum*>{"tilt", &r.tilt}, {"length", &r.length}}) {
        try {
            const FitReport& f = fit_spectrum(*spectrum, config::fit_options(cfg, name));
            json j = fit_to_json(f, *spectrum, gamma);
            if (name == "tilt") {
                double peak = 0.0;
                for (double v : spectrum->signal) peak = std::max(peak, std::abs(v));
                j["signal_peak_abs"] = peak;
                j["angular_sensitivity_rad"] = alpha_max * std::tan(f.residual_std);
                resonance = spectrum->resonance(gamma);
            }
            report[name] = j;
        } catch (const FitError& e) {
            report[name] = {{"error", e.what()}, {"iterations", e.iterations()}, {"last_params", e.last_params()}};
            status = 3;
        }
        io::write_csv(dir / ("spectrum_" + name + ".csv"), spectrum_table(*spectrum));
    }
    plot_spectrum(dir / "tilt.svg", r.tilt, "pattern tilt", "tilt (mdeg)", kMdeg);
    plot_spectrum(dir / "length.svg", r.length, "pattern length", "length (nrad)", 1e9);
    if (r.tilt.fit) {
        const bool field = r.tilt.mode == SweepMode::field;
        io::write_svg_plot(dir / "residuals.svg", "tilt fit residuals", field ? "B0 (mT)" : "frequency (GHz)",
                           "residual (mdeg)",
                           {{"residual", field ? scaled(r.tilt.sweep, 1e3) : scaled(r.tilt.sweep, 1e-9),
                             scaled(r.tilt.residuals, kMdeg), "#2ca02c", true}});
    }
    if (sc.mode == SweepMode::field) {
        io::CsvTable ref;
        ref.header = {"B0_T", "reference"};
        const std::vector<double> curve = lockin_reference(sc.spins, drive, r.tilt.b0);
        for (std::size_t i = 0; i < curve.size(); ++i) ref.rows.push_back({r.tilt.b0[i], curve[i]});
        io::write_csv(dir / "lockin_reference.csv", ref);
    }
    io::write_text(dir / "fit_report.json", report.dump(2) + "\n");
    return resonance;
}

int cmd_simulate_sweep(const Common& c, bool save_frames) {
    const config::RunConfig cfg = load_config(c);
    const fs::path out(c.out);
    fs::create_directories(out);
    io::write_text(out / "resolved_config.yaml", cfg.dump());
    int status = 0;

    const std::vector<double> b0_list = cfg.list("sweep.b0_list_T");
    if (b0_list.empty()) {
        sweep_into(cfg, config::sweep_config(cfg, c.jobs), out, save_frames, status);
        return status;
    }
    if (cfg.text("sweep.mode") != "frequency") throw ConfigError("sweep.b0_list_T needs sweep.mode = frequency");
    io::CsvTable resonances;
    resonances.header = {"B0_T", "freq_Hz", "sigma_Hz"};
    for (std::size_t k = 0; k < b0_list.size(); ++k) {
        const SweepConfig sc = config::sweep_config(cfg, c.jobs, b0_list[k]);
        const auto res = sweep_into(cfg, sc, out / ("b0_" + std::to_string(k)), save_frames, status);
        if (res) resonances.rows.push_back({res->b0, res->frequency, res->sigma});
    }
    io::write_csv(out / "resonances.csv", resonances);
    return status;
}

int cmd_render_pattern(const Common& c, std::optional<double> b0, std::optional<double> detuning, bool diff,
                       bool png) {
    const config::RunConfig cfg = load_config(c);
    const SpinSystem spins = config::spin_system(cfg);
    const DriveField drive = config::drive_field(cfg);
    const ElectronKinematics kin = config::kinematics(cfg);
    const CameraModel camera = config::camera_model(cfg);
    const ProbePosition probe = config::probe_position(cfg);
    const BeamSpot spot = config::beam_spot(cfg);
    const double b_res = drive.frequency() / spins.gyromagnetic_ratio;
    if (b0 && detuning) throw ConfigError("give either --b0 or --detuning, not both");
    const double field = b0 ? *b0 : b_res + detuning.value_or(0.0);

    RenderOptions options;
    options.n_phases = static_cast<int>(cfg.integer("render.n_phases"));
    if (cfg.flag("noise.poisson")) options.noise_seed = static_cast<std::uint64_t>(cfg.integer("noise.seed"));

    auto render_at = [&](double b) {
        const double m0 = equilibrium_magnetization(spins, thermal_polarization(spins.temperature, b));
        const SteadyState state = steady_state(spins, drive, BiasField{b}, m0);
        DetectorImage img = render_pattern(make_scene(probe, drive, state, spins, kin), camera, spot, options);
        img.pixels = quantize_to_float(img.pixels);
        img.meta.b0 = b;
        return img;
    };

    const fs::path out(c.out);
    const DetectorImage image = render_at(field);
    io::write_spnm(out / "pattern.spnm", image);
    if (png) io::write_png16(out / "pattern.png", image.pixels);
    json info = {{"b0_T", field}, {"detuning_T", field - b_res}, {"clipped_fraction", image.meta.clipped_fraction}};
    if (diff) {
        const DetectorImage reference = render_at(b_res + cfg.number("render.reference_detuning_T"));
        io::write_spnm(out / "reference.spnm", reference);
        DetectorImage d = image;
        d.pixels = difference_image(image, reference);
        io::write_spnm(out / "difference.spnm", d);
        if (png) io::write_diverging_png(out / "difference.png", d.pixels);
        info["difference_sum"] = d.pixels.sum();
        info["difference_abs_max"] = d.pixels.abs().maxCoeff();
    }
    io::write_text(out / "render.json", info.dump(2) + "\n");
    return 0;
}

int cmd_analyze_stack(const Common& c, const std::string& pattern, int group_size) {
    const config::RunConfig cfg = load_config(c);
    const MeasureOptions options = config::measure_options(cfg);
    const CameraModel camera = config::camera_model(cfg);
    const std::vector<fs::path> files = io::expand_glob(pattern);
    if (files.empty()) throw IoError("no images match '" + pattern + "'");

    std::vector<DetectorImage> frames;
    for (const fs::path& f : files) {
        frames.push_back(io::read_image(f, camera));
        if (frames.back().width() != frames.front().width() || frames.back().height() != frames.front().height()) {
            throw IoError("image size mismatch: " + f.string() + " is " + std::to_string(frames.back().width()) + "x" +
                          std::to_string(frames.back().height()) + ", expected " +
                          std::to_string(frames.front().width()) + "x" + std::to_string(frames.front().height()));
        }
    }

    // Frames group by their stored sweep index when present, else in runs of group_size.
    std::vector<ImageStack> stacks;
    const bool indexed = group_size <= 0 && frames.front().meta.index >= 0;
    std::map<std::int64_t, std::size_t> slot;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        std::int64_t key = 0;
        if (indexed) {
            key = frames[i].meta.index;
        } else if (group_size > 0) {
            key = static_cast<std::int64_t>(i) / group_size;
        }
        auto [it, inserted] = slot.try_emplace(key, stacks.size());
        if (inserted) stacks.emplace_back();
        stacks[it->second].frames.push_back(std::move(frames[i]));
    }

    std::vector<PatternMeasurement> measurements;
    std::vector<double> b0;
    std::vector<double> freq;
    for (const ImageStack& s : stacks) {
        measurements.push_back(measure(s, options));
        b0.push_back(s.frames.front().meta.b0);
        freq.push_back(s.frames.front().meta.angular_frequency / (2.0 * kPi));
    }
    io::write_csv(c.out, io::measurement_table(measurements, b0, freq));
    return 0;
}

int cmd_map2d(const Common& c, bool png) {
    const config::RunConfig cfg = load_config(c);
    const MapScenario scenario = config::map_scenario(cfg);
    const double extent = cfg.number("map.half_extent_m");
    const int n = static_cast<int>(cfg.integer("map.points"));
    const std::vector<double> detunings = cfg.list("map.detunings_T");
    if (detunings.empty()) throw ConfigError("map.detunings_T is empty");
    const std::vector<GammaMap> maps = map2d(scenario, extent, n, detunings);

    double limit = 0.0;
    for (const GammaMap& m : maps) {
        for (Eigen::Index i = 0; i < m.values.size(); ++i) {
            if (std::isfinite(m.values.data()[i])) limit = std::max(limit, std::abs(m.values.data()[i]));
        }
    }
    const fs::path out(c.out);
    json summary = json::array();
    for (std::size_t k = 0; k < maps.size(); ++k) {
        DetectorImage img;
        img.pixels = maps[k].values;
        img.camera.width_px = n;
        img.camera.height_px = n;
        img.camera.pixel_pitch = 2.0 * extent / (n - 1);
        img.meta.b0 = scenario.temperature_b0 + maps[k].detuning;
        const std::string stem = "map_" + std::to_string(k);
        io::write_spnm(out / (stem + ".spnm"), img,
                       {{"detuning_T", maps[k].detuning}, {"half_extent_m", extent}, {"points", n}});
        if (png) io::write_diverging_png(out / (stem + ".png"), maps[k].values, limit);
        double peak = 0.0;
        for (Eigen::Index i = 0; i < maps[k].values.size(); ++i) {
            if (std::isfinite(maps[k].values.data()[i])) peak = std::max(peak, std::abs(maps[k].values.data()[i]));
        }
        summary.push_back({{"file", stem + ".spnm"}, {"detuning_T", maps[k].detuning}, {"abs_max_rad", peak}});
    }
    io::write_text(out / "maps.json", summary.dump(2) + "\n");
    return 0;
}

int cmd_impedance_scan(const Common& c, const std::string& s11_override) {
    const config::RunConfig cfg = load_config(c);
    const B1Profile profile = config::b1_profile(cfg);
    const ElectronKinematics kin = config::kinematics(cfg);
    const double start = cfg.number("impedance.start_Hz");
    const double stop = cfg.number("impedance.stop_Hz");
    const std::int64_t n = cfg.integer("impedance.points");
    if (n < 2 || !(stop > start)) throw ConfigError("impedance scan needs points >= 2 and stop_Hz > start_Hz");
    std::vector<double> freqs;
    for (std::int64_t i = 0; i < n; ++i) freqs.push_back(start + (stop - start) * static_cast<double>(i) / (n - 1));
    const std::vector<ImpedancePoint> scan = impedance_scan(freqs, profile, cfg.number("drive.extent_m"), kin);

    const fs::path out(c.out);
    io::CsvTable t;
    t.header = {"frequency_Hz", "b1_T", "alpha_max_rad"};
    std::vector<double> alpha;
    for (const ImpedancePoint& p : scan) {
        t.rows.push_back({p.frequency, p.b1, p.alpha_max});
        alpha.push_back(p.alpha_max * 1e6);
    }
    io::write_csv(out / "impedance.csv", t);
    std::vector<io::PlotSeries> series = {{"alpha_max (urad)", scaled(freqs, 1e-9), alpha, "#1f77b4", false}};

    std::string s11_path = s11_override;
    if (s11_path.empty() && cfg.has("impedance.s11_csv")) s11_path = cfg.text("impedance.s11_csv");
    if (!s11_path.empty()) {
        const ImpedanceComparison cmp = compare_impedance(scan, io::read_s11(s11_path));
        io::CsvTable ct;
        ct.header = {"frequency_Hz", "alpha_normalized", "delivered_normalized"};
        for (std::size_t i = 0; i < cmp.frequency.size(); ++i) {
            ct.rows.push_back({cmp.frequency[i], cmp.alpha_normalized[i], cmp.delivered_normalized[i]});
        }
        io::write_csv(out / "comparison.csv", ct);
        json j = {{"correlation", cmp.correlation},
                  {"alpha_peak_Hz", cmp.alpha_peak_hz},
                  {"delivered_peak_Hz", cmp.delivered_peak_hz}};
        io::write_text(out / "comparison.json", j.dump(2) + "\n");
        series = {{"alpha_max / peak", scaled(freqs, 1e-9), cmp.alpha_normalized, "#1f77b4", false},
                  {"1 - |S11|^2 / peak", scaled(freqs, 1e-9), cmp.delivered_normalized, "#d62728", false}};
        std::printf("correlation %.6f\n", cmp.correlation);
    }
    io::write_svg_plot(out / "impedance.svg", "drive deflection vs frequency", "frequency (GHz)", "", series);
    return 0;
}

int cmd_fit_gamma(const std::string& resonances, const std::string& out) {
    const std::vector<GyromagneticPoint> points = io::read_resonances(resonances);
    const GyromagneticFit fit = gyromagnetic_fit(points);
    json j = {{"gamma_Hz_per_T", fit.gamma},
              {"gamma_sigma_Hz_per_T", fit.gamma_sigma},
              {"intercept_Hz", fit.intercept},
              {"intercept_sigma_Hz", fit.intercept_sigma},
              {"residual_rms_Hz", fit.residual_rms},
              {"points", points.size()}};
    if (!out.empty()) io::write_text(out, j.dump(2) + "\n");
    std::printf("Gamma = %.6g +/- %.3g GHz/T (intercept %.4g MHz)\n", fit.gamma * 1e-9, fit.gamma_sigma * 1e-9,
                fit.intercept * 1e-6);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spin-resonance beam-deflection simulator and analysis pipeline"};
    app.require_subcommand(1);

    Common sweep_opts;
    bool save_frames = false;
    auto* sweep = app.add_subcommand("simulate-sweep", "simulate a field or frequency sweep, analyze and fit it");
    add_common(sweep, sweep_opts, true, "output directory",
               {"spin", "drive", "bias", "beam", "camera", "probe", "sweep", "noise", "fit", "analysis"});
    sweep->add_flag("--save-frames", save_frames, "also write every rendered frame as .spnm");

    Common render_opts;
    std::optional<double> b0;
    std::optional<double> detuning;
    bool diff = false;
    bool render_png = false;
    auto* render = app.add_subcommand("render-pattern", "render one detector image");
    add_common(render, render_opts, true, "output directory",
               {"spin", "drive", "beam", "camera", "probe", "noise", "render"});
    render->add_option("--b0", b0, "bias field B0 (T)");
    render->add_option("--detuning", detuning, "B0 minus the resonance field of drive.frequency_Hz (T)");
    render->add_flag("--diff", diff, "also write the difference to the off-resonance reference");
    render->add_flag("--png", render_png, "also write PNG previews");

    Common stack_opts;
    std::string images;
    int group_size = 0;
    auto* stack = app.add_subcommand("analyze-stack", "measure tilt and length of image stacks");
    add_common(stack, stack_opts, false, "output CSV path", {"camera", "analysis"});
    stack->add_option("--images", images, "image glob (.spnm, .png, .tif)")->required();
    stack->add_option("--group-size", group_size,
                      "frames per measurement point; 0 groups .spnm frames by stored index, else all together");

    Common map_opts;
    bool map_png = true;
    auto* map = app.add_subcommand("map2d", "gamma_max maps over the specimen plane");
    add_common(map, map_opts, true, "output directory", {"spin", "drive", "beam", "probe", "map"});
    map->add_flag("--png,!--no-png", map_png, "write diverging-color PNGs (default on)");

    Common imp_opts;
    std::string s11;
    auto* imp = app.add_subcommand("impedance-scan", "alpha_max versus drive frequency, optional S11 overlay");
    add_common(imp, imp_opts, true, "output directory", {"drive", "beam", "impedance"});
    imp->add_option("--s11", s11, "VNA CSV (frequency_Hz, S11_dB); overrides impedance.s11_csv");

    std::string resonances;
    std::string gamma_out;
    auto* gamma = app.add_subcommand("fit-gamma", "fit nu = Gamma B0 + c to resonance pairs");
    gamma->add_option("--resonances", resonances, "CSV with columns B0_T, freq_Hz[, sigma_Hz]")->required();
    gamma->add_option("-o,--out", gamma_out, "JSON report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*sweep) return cmd_simulate_sweep(sweep_opts, save_frames);
        if (*render) return cmd_render_pattern(render_opts, b0, detuning, diff, render_png);
        if (*stack) return cmd_analyze_stack(stack_opts, images, group_size);
        if (*map) return cmd_map2d(map_opts, map_png);
        if (*imp) return cmd_impedance_scan(imp_opts, s11);
        if (*gamma) return cmd_fit_gamma(resonances, gamma_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
