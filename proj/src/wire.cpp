#include "teleop/wire.hpp"

#include <cmath>

#include <json.hpp>

namespace teleop::wire {

using nlohmann::json;

bool operator==(const StateSnapshot& a, const StateSnapshot& b) {
    const Snapshot& x = a.data;
    const Snapshot& y = b.data;
    if (x.step != y.step || x.t != y.t || !(x.plant == y.plant) || x.f_e != y.f_e ||
        x.f_h != y.f_h || x.contact != y.contact || x.saturated != y.saturated ||
        x.chalk_intact != y.chalk_intact || x.strokes.size() != y.strokes.size())
        return false;
    for (std::size_t i = 0; i < x.strokes.size(); ++i)
        if (x.strokes[i].segment != y.strokes[i].segment || !(x.strokes[i].point == y.strokes[i].point))
            return false;
    return true;
}

std::string_view error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::BadMessage: return "bad_message";
        case ErrorCode::UnsupportedVersion: return "unsupported_version";
        case ErrorCode::ControllerTaken: return "controller_taken";
        case ErrorCode::NotController: return "not_controller";
        case ErrorCode::SessionRunning: return "session_running";
        case ErrorCode::InvalidConfig: return "invalid_config";
    }
    return "?";
}

std::string_view event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::Welcome: return "welcome";
        case EventKind::ScenarioApplied: return "scenario_applied";
        case EventKind::Started: return "started";
        case EventKind::Paused: return "paused";
        case EventKind::Failed: return "failed";
        case EventKind::Completed: return "completed";
        case EventKind::Reset: return "reset";
    }
    return "?";
}

std::string_view session_command_name(SessionCommand c) {
    switch (c) {
        case SessionCommand::Start: return "start";
        case SessionCommand::Stop: return "stop";
        case SessionCommand::Reset: return "reset";
    }
    return "?";
}

std::string_view message_type(const Message& m) {
    struct Visitor {
        std::string_view operator()(const StylusInput&) const { return "stylus_input"; }
        std::string_view operator()(const ScenarioSet&) const { return "scenario_set"; }
        std::string_view operator()(const SessionCtl&) const { return "session_ctl"; }
        std::string_view operator()(const StateSnapshot&) const { return "state_snapshot"; }
        std::string_view operator()(const SessionEvent&) const { return "session_event"; }
        std::string_view operator()(const MetricsUpdate&) const { return "metrics_update"; }
        std::string_view operator()(const Error&) const { return "error"; }
    };
    return std::visit(Visitor{}, m);
}

namespace {

double finite(double v) {
    if (!std::isfinite(v)) throw ContractViolation("wire: non-finite number");
    return v;
}

json vec(const Vec3& v) { return json::array({finite(v.x), finite(v.y), finite(v.z)}); }
json quat(const UnitQuaternion& q) {
    return json::array({finite(q.w()), finite(q.x()), finite(q.y()), finite(q.z())});
}

template <typename E, std::size_t N>
E enum_from(const std::string& s, const E (&values)[N], std::string_view (*name)(E),
            const char* what) {
    for (E e : values)
        if (name(e) == s) return e;
    throw WireError(ErrorCode::BadMessage, std::string("unknown ") + what + " '" + s + "'");
}

Vec3 get_vec(const json& j, const char* key) {
    const json& a = j.at(key);
    if (!a.is_array() || a.size() != 3)
        throw WireError(ErrorCode::BadMessage, std::string(key) + ": expected 3 numbers");
    return {a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()};
}

UnitQuaternion get_quat(const json& j, const char* key) {
    const json& a = j.at(key);
    if (!a.is_array() || a.size() != 4)
        throw WireError(ErrorCode::BadMessage, std::string(key) + ": expected 4 numbers");
    try {
        return UnitQuaternion(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>(),
                              a.at(3).get<double>());
    } catch (const ContractViolation& e) {
        throw WireError(ErrorCode::BadMessage, std::string(key) + ": " + e.what());
    }
}

template <typename T>
T get_num(const json& j, const char* key) {
    const json& v = j.at(key);
    if (!v.is_number()) throw WireError(ErrorCode::BadMessage, std::string(key) + ": expected a number");
    return v.get<T>();
}

std::string_view contact_name_fn(ContactState c) { return contact_state_name(c); }

struct Encoder {
    json& j;
    void operator()(const StylusInput& m) const {
        j["t"] = finite(m.t);
        j["p"] = vec(m.p);
        j["q"] = quat(m.q);
    }
    void operator()(const ScenarioSet& m) const {
        if (m.label.has_value() == !m.config_yaml.empty())
            throw ContractViolation("scenario_set: exactly one of label or config");
        if (m.label)
            j["label"] = scenario_label_name(*m.label);
        else
            j["config"] = m.config_yaml;
    }
    void operator()(const SessionCtl& m) const { j["command"] = session_command_name(m.command); }
    void operator()(const StateSnapshot& m) const {
        const Snapshot& s = m.data;
        j["step"] = s.step;
        j["t"] = finite(s.t);
        j["plant"] = {{"p", vec(s.plant.position)}, {"q", quat(s.plant.orientation)}};
        j["f_e"] = vec(s.f_e);
        j["f_h"] = vec(s.f_h);
        j["contact"] = contact_state_name(s.contact);
        j["saturated"] = json::array({s.saturated[0], s.saturated[1], s.saturated[2]});
        j["chalk_intact"] = s.chalk_intact;
        json strokes = json::array();
        for (const auto& d : s.strokes)
            strokes.push_back(json::array({d.segment, finite(d.point.u), finite(d.point.v)}));
        j["strokes"] = std::move(strokes);
    }
    void operator()(const SessionEvent& m) const {
        j["event"] = event_kind_name(m.kind);
        if (!m.reason.empty()) j["reason"] = m.reason;
        if (!m.role.empty()) j["role"] = m.role;
        if (!m.label.empty()) j["label"] = m.label;
    }
    void operator()(const MetricsUpdate& m) const {
        j["t"] = finite(m.t);
        j["contact_samples"] = m.contact_samples;
        j["running_mean"] = finite(m.running_mean);
        j["running_md"] = finite(m.running_md);
        j["peak_robot"] = finite(m.peak_robot);
        j["peak_human"] = finite(m.peak_human);
        j["delta_f_max"] = finite(m.delta_f_max);
    }
    void operator()(const Error& m) const {
        j["code"] = error_code_name(m.code);
        j["message"] = m.message;
    }
};

Message decode_body(const std::string& type, const json& j) {
    if (type == "stylus_input") {
        StylusInput m;
        m.t = get_num<double>(j, "t");
        m.p = get_vec(j, "p");
        m.q = get_quat(j, "q");
        return m;
    }
    if (type == "scenario_set") {
        ScenarioSet m;
        const bool has_label = j.contains("label"), has_config = j.contains("config");
        if (has_label == has_config)
            throw WireError(ErrorCode::BadMessage, "scenario_set: exactly one of label or config");
        if (has_label) {
            m.label = parse_scenario_label(j.at("label").get<std::string>());
            if (!m.label) throw WireError(ErrorCode::BadMessage, "scenario_set: unknown label");
        } else {
            m.config_yaml = j.at("config").get<std::string>();
            if (m.config_yaml.empty())
                throw WireError(ErrorCode::BadMessage, "scenario_set: empty config");
        }
        return m;
    }
    if (type == "session_ctl") {
        static constexpr SessionCommand all[] = {SessionCommand::Start, SessionCommand::Stop,
                                                  SessionCommand::Reset};
        return SessionCtl{enum_from(j.at("command").get<std::string>(), all, session_command_name,
                                    "command")};
    }
    if (type == "state_snapshot") {
        static constexpr ContactState states[] = {ContactState::NoContact, ContactState::Collision,
                                                  ContactState::Penetration,
                                                  ContactState::Saturation};
        Snapshot s;
        s.step = get_num<std::uint64_t>(j, "step");
        s.t = get_num<double>(j, "t");
        const json& plant = j.at("plant");
        s.plant = {get_vec(plant, "p"), get_quat(plant, "q"), Frame::RobotBase};
        s.f_e = get_vec(j, "f_e");
        s.f_h = get_vec(j, "f_h");
        s.contact = enum_from(j.at("contact").get<std::string>(), states, contact_name_fn, "contact");
        const json& sat = j.at("saturated");
        if (!sat.is_array() || sat.size() != 3)
            throw WireError(ErrorCode::BadMessage, "saturated: expected 3 flags");
        for (std::size_t i = 0; i < 3; ++i) s.saturated[i] = sat.at(i).get<bool>();
        s.chalk_intact = j.at("chalk_intact").get<bool>();
        for (const json& d : j.at("strokes")) {
            if (!d.is_array() || d.size() != 3)
                throw WireError(ErrorCode::BadMessage, "strokes: expected [segment, u, v]");
            s.strokes.push_back({d.at(0).get<std::size_t>(), {d.at(1).get<double>(), d.at(2).get<double>()}});
        }
        return StateSnapshot{std::move(s)};
    }
    if (type == "session_event") {
        static constexpr EventKind all[] = {EventKind::Welcome, EventKind::ScenarioApplied,
                                            EventKind::Started, EventKind::Paused,
                                            EventKind::Failed,  EventKind::Completed,
                                            EventKind::Reset};
        SessionEvent m;
        m.kind = enum_from(j.at("event").get<std::string>(), all, event_kind_name, "event");
        m.reason = j.value("reason", "");
        m.role = j.value("role", "");
        m.label = j.value("label", "");
        return m;
    }
    if (type == "metrics_update") {
        MetricsUpdate m;
        m.t = get_num<double>(j, "t");
        m.contact_samples = get_num<std::size_t>(j, "contact_samples");
        m.running_mean = get_num<double>(j, "running_mean");
        m.running_md = get_num<double>(j, "running_md");
        m.peak_robot = get_num<double>(j, "peak_robot");
        m.peak_human = get_num<double>(j, "peak_human");
        m.delta_f_max = get_num<double>(j, "delta_f_max");
        return m;
    }
    if (type == "error") {
        static constexpr ErrorCode all[] = {ErrorCode::BadMessage,    ErrorCode::UnsupportedVersion,
                                            ErrorCode::ControllerTaken, ErrorCode::NotController,
                                            ErrorCode::SessionRunning, ErrorCode::InvalidConfig};
        Error m;
        m.code = enum_from(j.at("code").get<std::string>(), all, error_code_name, "error code");
        m.message = j.value("message", "");
        return m;
    }
    throw WireError(ErrorCode::BadMessage, "unknown message type '" + type + "'");
}

}  // namespace

std::string encode(const Message& m) {
    json j;
    j["v"] = kVersion;
    j["type"] = message_type(m);
    std::visit(Encoder{j}, m);
    return j.dump();
}

Message decode(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw WireError(ErrorCode::BadMessage, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw WireError(ErrorCode::BadMessage, "message must be a JSON object");
    if (!j.contains("v") || !j["v"].is_number_integer())
        throw WireError(ErrorCode::BadMessage, "missing schema version field 'v'");
    if (j["v"].get<int>() != kVersion)
        throw WireError(ErrorCode::UnsupportedVersion,
                        "unsupported schema version " + std::to_string(j["v"].get<int>()));
    if (!j.contains("type") || !j["type"].is_string())
        throw WireError(ErrorCode::BadMessage, "missing message type");
    try {
        return decode_body(j["type"].get<std::string>(), j);
    } catch (const json::exception& e) {
        throw WireError(ErrorCode::BadMessage, std::string("malformed message: ") + e.what());
    }
}

}  // namespace teleop::wire
