#include "spinem/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spinem/errors.hpp"
#include "spinem/io.hpp"

namespace spinem::config {
namespace {

const KeySpec* find_spec(const std::string& key) {
    const auto& keys = schema();
    const auto it = std::find_if(keys.begin(), keys.end(), [&](const KeySpec& s) { return s.key == key; });
    return it == keys.end() ? nullptr : &*it;
}

std::string stem_of(const std::string& key) {
    const auto dot = key.rfind('.');
    const auto underscore = key.rfind('_');
    if (underscore == std::string::npos || (dot != std::string::npos && underscore < dot)) return key;
    return key.substr(0, underscore);
}

// Suggests the schema key when only the unit suffix differs.
std::string unknown_key_message(const std::string& key, const std::string& origin) {
    std::string message = origin + ": unknown key '" + key + "'";
    for (const KeySpec& s : schema()) {
        if (stem_of(s.key) == stem_of(key) || stem_of(s.key) == key) {
            message += " (did you mean '" + s.key + "'? units are part of the key)";
            break;
        }
    }
    return message;
}

void flatten(const YAML::Node& node, const std::string& prefix, std::vector<std::pair<std::string, YAML::Node>>& out) {
    if (node.IsMap()) {
        for (const auto& kv : node) {
            const std::string name = kv.first.as<std::string>();
            flatten(kv.second, prefix.empty() ? name : prefix + "." + name, out);
        }
    } else {
        out.emplace_back(prefix, node);
    }
}

std::string kind_name(Kind kind) {
    switch (kind) {
        case Kind::number: return "number";
        case Kind::integer: return "integer";
        case Kind::text: return "string";
        case Kind::flag: return "bool";
        case Kind::vector3: return "[c0, c1, c2]";
        case Kind::list: return "list of numbers";
    }
    return "?";
}

void check_kind(const std::string& key, Kind kind, const YAML::Node& value, const std::string& origin) {
    const std::string where = origin + ": key '" + key + "' expects " + kind_name(kind);
    try {
        switch (kind) {
            case Kind::number: {
                if (!value.IsScalar()) throw ConfigError(where);
                const double v = value.as<double>();
                if (!std::isfinite(v)) throw ConfigError(where + " (finite)");
                break;
            }
            case Kind::integer:
                if (!value.IsScalar()) throw ConfigError(where);
                (void)value.as<std::int64_t>();
                break;
            case Kind::text:
                if (!value.IsScalar()) throw ConfigError(where);
                break;
            case Kind::flag:
                if (!value.IsScalar()) throw ConfigError(where);
                (void)value.as<bool>();
                break;
            case Kind::vector3:
                if (!value.IsSequence() || value.size() != 3) throw ConfigError(where);
                for (const auto& v : value) (void)v.as<double>();
                break;
            case Kind::list:
                if (!value.IsSequence()) throw ConfigError(where);
                for (const auto& v : value) (void)v.as<double>();
                break;
        }
    } catch (const YAML::Exception&) {
        throw ConfigError(where);
    }
}

std::string require_choice(const RunConfig& cfg, const std::string& key, std::initializer_list<const char*> choices) {
    const std::string v = cfg.text(key);
    for (const char* c : choices) {
        if (v == c) return v;
    }
    std::string message = "key '" + key + "' must be one of:";
    for (const char* c : choices) message += std::string(" ") + c;
    throw ConfigError(message + " (got '" + v + "')");
}

double sphere_volume(double radius) { return 4.0 / 3.0 * kPi * radius * radius * radius; }

}  // namespace

const std::vector<KeySpec>& schema() {
    static const std::vector<KeySpec> keys = {
        {"schema_version", Kind::integer, "", "config schema version, must be 1", true},

        {"spin.gamma_Hz_per_T", Kind::number, "28.0e9", "gyromagnetic ratio Γ"},
        {"spin.t1_s", Kind::number, "100e-9", "longitudinal relaxation time T1"},
        {"spin.t2_s", Kind::number, "100e-9", "transverse relaxation time T2"},
        {"spin.density_per_m3", Kind::number, "1.5e27", "spin density ρ"},
        {"spin.radius_m", Kind::number, "75e-6", "specimen radius (sphere)"},
        {"spin.volume_m3", Kind::number, "", "specimen volume; overrides spin.radius_m when set"},
        {"spin.temperature_K", Kind::number, "290", "specimen temperature"},

        {"drive.frequency_Hz", Kind::number, "4.89e9", "MW drive frequency ν (field sweeps, render-pattern)"},
        {"drive.b1_T", Kind::number, "20e-6", "peak drive field B1"},
        {"drive.extent_m", Kind::number, "1.4e-3", "resonator field extent l along the beam"},
        {"drive.power_dBm", Kind::number, "", "generator power label, metadata only"},
        {"drive.b1_profile", Kind::text, "flat", "B1(ν) model for impedance-scan: flat | lorentzian | table"},
        {"drive.b1_center_Hz", Kind::number, "4.7e9", "Lorentzian B1(ν) center"},
        {"drive.b1_fwhm_Hz", Kind::number, "100e6", "Lorentzian B1(ν) FWHM"},
        {"drive.b1_table_csv", Kind::text, "", "CSV with columns frequency_Hz, b1_T for the table profile"},

        {"bias.b0_T", Kind::number, "", "static field B0; default is the resonance field of drive.frequency_Hz"},

        {"beam.energy_eV", Kind::number, "200e3", "electron kinetic energy"},
        {"beam.spot_rms_rad", Kind::number, "3.0e-7", "rms angular width of the probe on the detector"},

        {"camera.length_m", Kind::number, "600", "LAD camera length"},
        {"camera.pixel_pitch_m", Kind::number, "51.2e-6", "detector pixel pitch"},
        {"camera.width_px", Kind::integer, "512", "detector width"},
        {"camera.height_px", Kind::integer, "512", "detector height"},
        {"camera.exposure_s", Kind::number, "5", "exposure per frame"},
        {"camera.beam_current_A", Kind::number, "500e-12", "beam current"},
        {"camera.max_counts", Kind::number, "1e12", "per-pixel saturation level"},
        {"camera.background_counts", Kind::number, "0", "mean dark level per pixel"},

        {"probe.x_m", Kind::number, "0", "probe position x (along B1)"},
        {"probe.y_m", Kind::number, "160e-6", "probe position y"},
        {"probe.exclusion_radius_m", Kind::number, "", "minimum probe distance; default spin.radius_m"},

        {"sweep.mode", Kind::text, "field", "field | frequency"},
        {"sweep.center_T", Kind::number, "", "field sweep center; default resonance of drive.frequency_Hz"},
        {"sweep.span_T", Kind::number, "1.2e-3", "field sweep full span"},
        {"sweep.center_Hz", Kind::number, "", "frequency sweep center; default Γ·bias.b0_T"},
        {"sweep.span_Hz", Kind::number, "33.6e6", "frequency sweep full span"},
        {"sweep.b0_list_T", Kind::list, "[]", "frequency mode: one sweep per listed B0, writes resonances.csv"},
        {"sweep.points", Kind::integer, "97", "points per sweep"},
        {"sweep.frames_per_point", Kind::integer, "4", "frames averaged per point"},
        {"sweep.n_phases", Kind::integer, "4096", "drive phases per rendered frame"},
        {"sweep.background_tilt_poly_rad", Kind::vector3, "[-8.7e-5, 0, 3.8e-8]",
         "injected LAD rotation c0 + c1 i + c2 i² over sweep index i"},
        {"sweep.background_scale_poly", Kind::vector3, "[0, 1.0e-6, 0]",
         "injected LAD magnification change, same polynomial form"},

        {"noise.seed", Kind::integer, "1", "root seed of every random stream"},
        {"noise.poisson", Kind::flag, "true", "Poisson shot noise per pixel"},
        {"noise.frame_rotation_rad", Kind::number, "3.49e-5", "rms random LAD rotation per frame"},
        {"noise.frame_drift_px", Kind::number, "0", "rms random pattern translation per frame and axis"},

        {"fit.profile", Kind::text, "gaussian", "line profile: gaussian | lorentzian"},
        {"fit.tilt_channel", Kind::text, "absorption", "tilt spectrum model: absorption | dispersion | combined"},
        {"fit.length_channel", Kind::text, "dispersion", "length spectrum model: absorption | dispersion | combined"},
        {"fit.max_iterations", Kind::integer, "200", "Levenberg-Marquardt iteration cap"},

        {"analysis.threshold_counts", Kind::number, "", "global threshold; default mean + 3 std of the corner patch"},
        {"analysis.align", Kind::flag, "true", "COM drift correction within each point"},

        {"render.reference_detuning_T", Kind::number, "5e-3", "off-resonance reference for --diff"},
        {"render.n_phases", Kind::integer, "4096", "drive phases per rendered image"},

        {"map.half_extent_m", Kind::number, "600e-6", "map covers [-E, E]²"},
        {"map.points", Kind::integer, "201", "grid points per axis"},
        {"map.detunings_T", Kind::list, "[-140e-6, 0, 140e-6]", "B0 − B_res of each map"},
        {"map.b0_T", Kind::number, "0.17", "field used for the thermal polarization"},

        {"impedance.start_Hz", Kind::number, "4.4e9", "scan start"},
        {"impedance.stop_Hz", Kind::number, "5.0e9", "scan stop"},
        {"impedance.points", Kind::integer, "121", "scan points"},
        {"impedance.s11_csv", Kind::text, "", "optional VNA export (frequency_Hz, S11_dB) to compare against"},
    };
    return keys;
}

RunConfig::RunConfig() {
    for (const KeySpec& s : schema()) {
        if (!s.default_value.empty()) values_[s.key] = YAML::Load(s.default_value);
    }
}

RunConfig RunConfig::load(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
    RunConfig cfg;
    YAML::Node root;
    try {
        root = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw IoError("cannot read config " + path.string());
    } catch (const YAML::Exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!root.IsMap()) throw ConfigError(path.string() + ": top level must be a mapping");
    cfg.merge(root, path.string());
    for (const std::string& o : overrides) cfg.set(o);
    cfg.check_required();
    return cfg;
}

void RunConfig::merge(const YAML::Node& root, const std::string& origin) {
    std::vector<std::pair<std::string, YAML::Node>> flat;
    flatten(root, "", flat);
    for (const auto& [key, value] : flat) assign(key, value, origin);
}

void RunConfig::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("--set expects key=value, got '" + assignment + "'");
    }
    const std::string key = assignment.substr(0, eq);
    YAML::Node value;
    try {
        value = YAML::Load(assignment.substr(eq + 1));
    } catch (const YAML::Exception& e) {
        throw ConfigError("--set " + key + ": " + e.what());
    }
    assign(key, value, "--set");
}

void RunConfig::assign(const std::string& key, const YAML::Node& value, const std::string& origin) {
    const KeySpec* spec = find_spec(key);
    if (!spec) throw ConfigError(unknown_key_message(key, origin));
    if (value.IsNull()) {
        values_.erase(key);
        return;
    }
    check_kind(key, spec->kind, value, origin);
    if (key == "schema_version" && value.as<int>() != kSchemaVersion) {
        throw ConfigError(origin + ": unsupported schema_version " + value.as<std::string>() + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
    }
    values_[key] = YAML::Clone(value);
}

void RunConfig::check_required() const {
    for (const KeySpec& s : schema()) {
        if (s.required && !has(s.key)) throw ConfigError("missing required key '" + s.key + "'");
    }
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const YAML::Node& RunConfig::node(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
}

double RunConfig::number(const std::string& key) const { return node(key).as<double>(); }
std::int64_t RunConfig::integer(const std::string& key) const { return node(key).as<std::int64_t>(); }
std::string RunConfig::text(const std::string& key) const { return node(key).as<std::string>(); }
bool RunConfig::flag(const std::string& key) const { return node(key).as<bool>(); }

Eigen::Vector3d RunConfig::vector3(const std::string& key) const {
    const YAML::Node& n = node(key);
    return {n[0].as<double>(), n[1].as<double>(), n[2].as<double>()};
}

std::vector<double> RunConfig::list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& v : node(key)) out.push_back(v.as<double>());
    return out;
}

std::optional<double> RunConfig::optional_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return number(key);
}

std::string RunConfig::dump() const {
    YAML::Emitter out;
    out << YAML::BeginMap;
    for (const auto& [key, value] : values_) out << YAML::Key << key << YAML::Value << YAML::Flow << value;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

SpinSystem spin_system(const RunConfig& cfg) {
    SpinSystem s;
    s.gyromagnetic_ratio = cfg.number("spin.gamma_Hz_per_T");
    s.t1 = cfg.number("spin.t1_s");
    s.t2 = cfg.number("spin.t2_s");
    s.spin_density = cfg.number("spin.density_per_m3");
    s.volume = cfg.optional_number("spin.volume_m3").value_or(sphere_volume(cfg.number("spin.radius_m")));
    s.temperature = cfg.number("spin.temperature_K");
    s.validate();
    return s;
}

DriveField drive_field(const RunConfig& cfg) {
    DriveField d = DriveField::from_frequency(cfg.number("drive.frequency_Hz"), cfg.number("drive.b1_T"),
                                              cfg.number("drive.extent_m"));
    d.validate();
    return d;
}

CameraModel camera_model(const RunConfig& cfg) {
    CameraModel c;
    c.camera_length = cfg.number("camera.length_m");
    c.pixel_pitch = cfg.number("camera.pixel_pitch_m");
    c.width_px = static_cast<int>(cfg.integer("camera.width_px"));
    c.height_px = static_cast<int>(cfg.integer("camera.height_px"));
    c.exposure = cfg.number("camera.exposure_s");
    c.beam_current = cfg.number("camera.beam_current_A");
    c.max_counts = cfg.number("camera.max_counts");
    c.background_counts = cfg.number("camera.background_counts");
    c.validate();
    return c;
}

ProbePosition probe_position(const RunConfig& cfg) {
    ProbePosition p;
    p.x = cfg.number("probe.x_m");
    p.y = cfg.number("probe.y_m");
    p.exclusion_radius = cfg.optional_number("probe.exclusion_radius_m").value_or(cfg.number("spin.radius_m"));
    return p;
}

BeamSpot beam_spot(const RunConfig& cfg) {
    BeamSpot s{cfg.number("beam.spot_rms_rad")};
    if (!(s.rms_width > 0.0)) throw ConfigError("beam.spot_rms_rad must be positive");
    return s;
}

ElectronKinematics kinematics(const RunConfig& cfg) {
    const double energy = cfg.number("beam.energy_eV");
    if (!(energy > 0.0)) throw ConfigError("beam.energy_eV must be positive");
    return electron_kinematics(energy);
}

MeasureOptions measure_options(const RunConfig& cfg) {
    MeasureOptions m;
    m.threshold = cfg.optional_number("analysis.threshold_counts");
    m.align = cfg.flag("analysis.align");
    return m;
}

SweepConfig sweep_config(const RunConfig& cfg, unsigned jobs, std::optional<double> b0_override) {
    SweepConfig s;
    s.spins = spin_system(cfg);
    s.drive = drive_field(cfg);
    s.camera = camera_model(cfg);
    s.probe = probe_position(cfg);
    s.spot = beam_spot(cfg);
    s.beam_energy = kinematics(cfg).kinetic_energy;

    const std::int64_t points = cfg.integer("sweep.points");
    if (points < 5 || points > 100000) throw ConfigError("sweep.points must lie in [5, 100000]");
    const double gamma = s.spins.gyromagnetic_ratio;
    if (require_choice(cfg, "sweep.mode", {"field", "frequency"}) == "field") {
        s.mode = SweepMode::field;
        const double center = cfg.optional_number("sweep.center_T").value_or(s.drive.frequency() / gamma);
        s.points = field_sweep_points(center, cfg.number("sweep.span_T"), static_cast<int>(points),
                                      s.drive.angular_frequency);
    } else {
        s.mode = SweepMode::frequency;
        const double b0 =
            b0_override.value_or(cfg.optional_number("bias.b0_T").value_or(s.drive.frequency() / gamma));
        const double center = b0_override ? gamma * b0 : cfg.optional_number("sweep.center_Hz").value_or(gamma * b0);
        s.points = frequency_sweep_points(center, cfg.number("sweep.span_Hz"), static_cast<int>(points), b0);
    }
    s.frames_per_point = static_cast<int>(cfg.integer("sweep.frames_per_point"));
    s.n_phases = static_cast<int>(cfg.integer("sweep.n_phases"));
    s.background_tilt_poly = cfg.vector3("sweep.background_tilt_poly_rad");
    s.background_scale_poly = cfg.vector3("sweep.background_scale_poly");
    s.frame_rotation_jitter = cfg.number("noise.frame_rotation_rad");
    s.frame_drift = cfg.number("noise.frame_drift_px");
    s.shot_noise = cfg.flag("noise.poisson");
    s.seed = static_cast<std::uint64_t>(cfg.integer("noise.seed"));
    s.analysis = measure_options(cfg);
    s.jobs = jobs;
    s.validate();
    return s;
}

Channel parse_channel(const std::string& name) {
    if (name == "absorption") return Channel::absorption;
    if (name == "dispersion") return Channel::dispersion;
    if (name == "combined") return Channel::combined;
    throw ConfigError("unknown fit channel '" + name + "' (absorption | dispersion | combined)");
}

LineProfile parse_profile(const std::string& name) {
    if (name == "gaussian") return LineProfile::gaussian;
    if (name == "lorentzian") return LineProfile::lorentzian;
    throw ConfigError("unknown line profile '" + name + "' (gaussian | lorentzian)");
}

FitOptions fit_options(const RunConfig& cfg, const std::string& which) {
    FitOptions o;
    o.profile = parse_profile(cfg.text("fit.profile"));
    o.channel = parse_channel(cfg.text("fit." + which + "_channel"));
    o.max_iterations = static_cast<int>(cfg.integer("fit.max_iterations"));
    if (o.max_iterations < 1) throw ConfigError("fit.max_iterations must be >= 1");
    return o;
}

MapScenario map_scenario(const RunConfig& cfg) {
    MapScenario m;
    m.spins = spin_system(cfg);
    m.drive = drive_field(cfg);
    m.kin = kinematics(cfg);
    m.exclusion_radius = probe_position(cfg).exclusion_radius;
    m.temperature_b0 = cfg.number("map.b0_T");
    return m;
}

B1Profile b1_profile(const RunConfig& cfg) {
    B1Profile p;
    p.peak = cfg.number("drive.b1_T");
    p.center_hz = cfg.number("drive.b1_center_Hz");
    p.fwhm_hz = cfg.number("drive.b1_fwhm_Hz");
    const std::string kind = require_choice(cfg, "drive.b1_profile", {"flat", "lorentzian", "table"});
    if (kind == "flat") {
        p.kind = B1Profile::Kind::flat;
    } else if (kind == "lorentzian") {
        p.kind = B1Profile::Kind::lorentzian;
        if (!(p.fwhm_hz > 0.0)) throw ConfigError("drive.b1_fwhm_Hz must be positive");
    } else {
        p.kind = B1Profile::Kind::table;
        const std::string path = cfg.has("drive.b1_table_csv") ? cfg.text("drive.b1_table_csv") : "";
        if (path.empty()) throw ConfigError("drive.b1_profile = table needs drive.b1_table_csv");
        const io::CsvTable t = io::read_csv(path);
        const std::size_t f = t.column("frequency_Hz");
        const std::size_t b = t.column("b1_T");
        for (const auto& row : t.rows) {
            if (!p.table_hz.empty() && !(row[f] > p.table_hz.back())) {
                throw IoError(path + ": frequencies must be strictly ascending");
            }
            p.table_hz.push_back(row[f]);
            p.table_b1.push_back(row[b]);
        }
    }
    return p;
}

std::string describe_keys(const std::vector<std::string>& sections) {
    std::ostringstream out;
    out << "Config keys read (YAML, nested or dotted; --set key=value overrides the file, the file overrides "
           "defaults):\n";
    for (const KeySpec& s : schema()) {
        const std::string section = s.key.substr(0, s.key.find('.'));
        const bool wanted = s.key == "schema_version" ||
                            std::find(sections.begin(), sections.end(), section) != sections.end();
        if (!wanted) continue;
        out << "  " << s.key;
        if (s.required) {
            out << " (required)";
        } else if (!s.default_value.empty()) {
            out << " = " << s.default_value;
        }
        out << "\n      " << s.description << "\n";
    }
    return out.str();
}

}  // namespace spinem::config
