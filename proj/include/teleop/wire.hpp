#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>

#include "teleop/config.hpp"
#include "teleop/session.hpp"

namespace teleop::wire {

/// Schema version carried in every message's `v` field.
inline constexpr int kVersion = 1;

// client -> server

struct StylusInput {
    double t = 0.0;
    Vec3 p;  // H_b, m
    UnitQuaternion q;
    friend bool operator==(const StylusInput&, const StylusInput&) = default;
};

/// Either a preset label or a full YAML config (exactly one).
struct ScenarioSet {
    std::optional<ScenarioLabel> label;
    std::string config_yaml;
    friend bool operator==(const ScenarioSet&, const ScenarioSet&) = default;
};

enum class SessionCommand { Start, Stop, Reset };

struct SessionCtl {
    SessionCommand command = SessionCommand::Start;
    friend bool operator==(const SessionCtl&, const SessionCtl&) = default;
};

// server -> client

struct StateSnapshot {
    Snapshot data;
};
bool operator==(const StateSnapshot& a, const StateSnapshot& b);

enum class EventKind { Welcome, ScenarioApplied, Started, Paused, Failed, Completed, Reset };

/// `role` is set on Welcome; `reason` on Failed/Paused; `label` on
/// ScenarioApplied and Started.
struct SessionEvent {
    EventKind kind = EventKind::Started;
    std::string reason;
    std::string role;
    std::string label;
    friend bool operator==(const SessionEvent&, const SessionEvent&) = default;
};

struct MetricsUpdate {
    double t = 0.0;
    std::size_t contact_samples = 0;
    double running_mean = 0.0;
    double running_md = 0.0;
    double peak_robot = 0.0;
    double peak_human = 0.0;
    double delta_f_max = 0.0;
    friend bool operator==(const MetricsUpdate&, const MetricsUpdate&) = default;
};

enum class ErrorCode {
    BadMessage,
    UnsupportedVersion,
    ControllerTaken,
    NotController,
    SessionRunning,
    InvalidConfig,
};

struct Error {
    ErrorCode code = ErrorCode::BadMessage;
    std::string message;
    friend bool operator==(const Error&, const Error&) = default;
};

using Message = std::variant<StylusInput, ScenarioSet, SessionCtl, StateSnapshot, SessionEvent,
                             MetricsUpdate, Error>;

std::string_view message_type(const Message& m);
std::string_view error_code_name(ErrorCode c);
std::string_view event_kind_name(EventKind k);
std::string_view session_command_name(SessionCommand c);

/// Raised by decode; `code` is BadMessage or UnsupportedVersion.
class WireError : public std::runtime_error {
public:
    WireError(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

/// Compact JSON. Throws ContractViolation on non-finite numbers.
std::string encode(const Message& m);
Message decode(std::string_view text);

}  // namespace teleop::wire
