#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <yaml-cpp/yaml.h>

#include "spinem/bloch.hpp"
#include "spinem/deflection.hpp"
#include "spinem/fit.hpp"
#include "spinem/pattern.hpp"
#include "spinem/spectro.hpp"

namespace spinem::config {

inline constexpr int kSchemaVersion = 1;

enum class Kind { number, integer, text, flag, vector3, list };

struct KeySpec {
    std::string key;            // dotted path; the suffix names the unit
    Kind kind = Kind::number;
    std::string default_value;  // YAML text; empty = unset
    std::string description;
    bool required = false;
};

/// Every recognized key.
const std::vector<KeySpec>& schema();

/// Flat key → value store. Values are layered: schema defaults, then the
/// config file, then `--set key=value` overrides.
class RunConfig {
public:
    /// Defaults only; `schema_version` still counts as missing.
    RunConfig();

    /// Loads a YAML file (nested maps or dotted keys). Throws ConfigError on
    /// unknown keys, type mismatches or a missing required key.
    static RunConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

    /// Applies one `key=value` override.
    void set(const std::string& assignment);
    void merge(const YAML::Node& root, const std::string& origin);
    /// Throws ConfigError naming the first missing required key.
    void check_required() const;

    bool has(const std::string& key) const;
    double number(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::string text(const std::string& key) const;
    bool flag(const std::string& key) const;
    Eigen::Vector3d vector3(const std::string& key) const;
    std::vector<double> list(const std::string& key) const;
    std::optional<double> optional_number(const std::string& key) const;

    /// Canonical YAML dump of every resolved key, sorted.
    std::string dump() const;

private:
    void assign(const std::string& key, const YAML::Node& value, const std::string& origin);
    const YAML::Node& node(const std::string& key) const;

    std::map<std::string, YAML::Node> values_;
};

SpinSystem spin_system(const RunConfig& cfg);
DriveField drive_field(const RunConfig& cfg);
CameraModel camera_model(const RunConfig& cfg);
ProbePosition probe_position(const RunConfig& cfg);
BeamSpot beam_spot(const RunConfig& cfg);
ElectronKinematics kinematics(const RunConfig& cfg);
MeasureOptions measure_options(const RunConfig& cfg);

/// Sweep from sweep.*, noise.*, analysis.* and the physics sections. For
/// frequency sweeps `b0_override` replaces bias.b0_T.
SweepConfig sweep_config(const RunConfig& cfg, unsigned jobs, std::optional<double> b0_override = {});

/// `which` is "tilt" or "length".
FitOptions fit_options(const RunConfig& cfg, const std::string& which);

MapScenario map_scenario(const RunConfig& cfg);
B1Profile b1_profile(const RunConfig& cfg);

Channel parse_channel(const std::string& name);
LineProfile parse_profile(const std::string& name);

/// Help text listing keys under the given section prefixes ("spin", "drive", ...).
std::string describe_keys(const std::vector<std::string>& sections);

}  // namespace spinem::config
