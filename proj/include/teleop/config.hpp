#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "teleop/admittance.hpp"
#include "teleop/environment.hpp"
#include "teleop/operator.hpp"
#include "teleop/rendering.hpp"

namespace teleop {

/// Malformed or inconsistent configuration. `line` is 1-based, 0 when the
/// problem is not tied to a source line.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

enum class ScenarioLabel { A, B, C, Custom };

std::string_view scenario_label_name(ScenarioLabel l);
std::optional<ScenarioLabel> parse_scenario_label(std::string_view s);

/// Everything a session needs. Scenario A = measured cosh feedback without
/// saturation, B = virtualized feedback without saturation, C = virtualized
/// feedback with saturation.
struct ScenarioConfig {
    ScenarioLabel label = ScenarioLabel::Custom;
    RenderMode render_mode = RenderMode::Virtualized;

    double rate_hz = 500.0;
    std::size_t window_n = 50;
    double duration_s = 60.0;  // upper bound; scripted/replay sources end earlier

    UnitQuaternion R_Hb_to_Rb;
    UnitQuaternion R_He_to_Re;
    Vec3 robot_start{0.0, 0.0, 0.02};  // R_b

    AdmittanceParams admittance;
    SaturationParams saturation;
    ToolPayload tool{0.2, {0.0, 0.0, 0.05}, {0.0, 0.0, -9.81}};
    ContactThresholds contact;

    VirtualCouplingParams coupling;
    CoshMappingParams cosh;
    DeviceLimits device;

    BlackboardModel board;
    double plant_bandwidth_hz = 20.0;

    ScriptedParams scripted;

    double dt() const { return 1.0 / rate_hz; }
    /// Throws ConfigError when parameters are out of range or the label does
    /// not match the feedback/saturation flags.
    void validate() const;
};

/// Defaults with the label's feedback mode and saturation switch applied.
ScenarioConfig scenario_preset(ScenarioLabel label);

/// Parses a YAML scenario file. `label_override` (e.g. from the command line)
/// replaces the file's `scenario` key; flags the file sets explicitly must
/// still agree with the resulting label.
ScenarioConfig parse_config(const std::string& yaml_text,
                            std::optional<ScenarioLabel> label_override = std::nullopt);
ScenarioConfig load_config(const std::string& path,
                           std::optional<ScenarioLabel> label_override = std::nullopt);

/// Canonical YAML rendering of a configuration (parse_config round-trips it).
std::string dump_config(const ScenarioConfig& cfg);

}  // namespace teleop
