#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "teleop/config.hpp"
#include "teleop/metrics.hpp"
#include "teleop/session.hpp"

namespace teleop {

/// Column order of the session log CSV.
const std::string& log_csv_header();

void write_log_csv(std::ostream& out, const SessionLog& log);
/// Parses a log written by write_log_csv. Doubles round-trip exactly.
/// Errors carry `origin:line`.
SessionLog read_log_csv(std::istream& in, const std::string& origin = "log");
SessionLog read_log_csv_file(const std::string& path);

/// Reads a recorded reference profile: header `t,f`, one sample per row.
ForceProfile read_force_profile_csv(const std::string& path, std::string source = "human");

/// Configuration as nested JSON mirroring the YAML sections.
nlohmann::ordered_json config_to_json(const ScenarioConfig& cfg);

nlohmann::ordered_json scenario_metrics_json(const ScenarioMetrics& m);
nlohmann::ordered_json metrics_report_json(const MetricsReport& r);

/// {outcome, metrics, parameters}
nlohmann::ordered_json summary_json(const SessionOutcome& outcome, const ScenarioMetrics& metrics,
                                    const ScenarioConfig& cfg);

/// Board-plane SVG (mm), one polyline per stroke segment in deposit order.
std::string strokes_svg(const StrokeCanvas& canvas);

void write_text_file(const std::string& path, const std::string& text);

}  // namespace teleop
