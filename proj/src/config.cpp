#include "teleop/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "teleop/text_io.hpp"

namespace teleop {

std::string_view scenario_label_name(ScenarioLabel l) {
    switch (l) {
        case ScenarioLabel::A: return "A";
        case ScenarioLabel::B: return "B";
        case ScenarioLabel::C: return "C";
        case ScenarioLabel::Custom: return "custom";
    }
    return "?";
}

std::optional<ScenarioLabel> parse_scenario_label(std::string_view s) {
    if (s == "A") return ScenarioLabel::A;
    if (s == "B") return ScenarioLabel::B;
    if (s == "C") return ScenarioLabel::C;
    if (s == "custom") return ScenarioLabel::Custom;
    return std::nullopt;
}

namespace {

struct LabelFlags {
    RenderMode mode;
    bool saturation;
};

std::optional<LabelFlags> label_flags(ScenarioLabel l) {
    switch (l) {
        case ScenarioLabel::A: return LabelFlags{RenderMode::MeasuredCosh, false};
        case ScenarioLabel::B: return LabelFlags{RenderMode::Virtualized, false};
        case ScenarioLabel::C: return LabelFlags{RenderMode::Virtualized, true};
        case ScenarioLabel::Custom: return std::nullopt;
    }
    return std::nullopt;
}

std::size_t line_of(const YAML::Node& n) {
    const YAML::Mark m = n.Mark();
    return m.line >= 0 ? static_cast<std::size_t>(m.line) + 1 : 0;
}

double as_double(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) throw ConfigError(key + ": expected a number", line_of(n));
    try {
        return parse_double(n.Scalar());
    } catch (const std::invalid_argument&) {
        throw ConfigError(key + ": expected a number, got '" + n.Scalar() + "'", line_of(n));
    }
}

bool as_bool(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) {
        const std::string& s = n.Scalar();
        if (s == "true" || s == "on" || s == "yes") return true;
        if (s == "false" || s == "off" || s == "no") return false;
    }
    throw ConfigError(key + ": expected true/false", line_of(n));
}

std::string as_string(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) throw ConfigError(key + ": expected a string", line_of(n));
    return n.Scalar();
}

std::vector<double> as_list(const YAML::Node& n, const std::string& key, std::size_t size) {
    if (!n.IsSequence() || n.size() != size)
        throw ConfigError(key + ": expected a list of " + std::to_string(size) + " numbers",
                          line_of(n));
    std::vector<double> v;
    for (const auto& e : n) v.push_back(as_double(e, key));
    return v;
}

Vec3 as_vec3(const YAML::Node& n, const std::string& key) {
    const auto v = as_list(n, key, 3);
    return {v[0], v[1], v[2]};
}

/// Diagonal gains accept a scalar (isotropic) or a 3-list.
Diag3 as_diag(const YAML::Node& n, const std::string& key) {
    if (n.IsScalar()) return Diag3::uniform(as_double(n, key));
    return {as_vec3(n, key)};
}

UnitQuaternion as_quat(const YAML::Node& n, const std::string& key) {
    const auto v = as_list(n, key, 4);
    try {
        return {v[0], v[1], v[2], v[3]};
    } catch (const ContractViolation& e) {
        throw ConfigError(key + ": " + e.what(), line_of(n));
    }
}

using Setter = std::function<void(ScenarioConfig&, const YAML::Node&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& key_table() {
    static const std::map<std::string, std::map<std::string, Setter>> table = {
        {"control",
         {{"rate_hz", [](auto& c, auto& n, auto& k) { c.rate_hz = as_double(n, k); }}}},
        {"session",
         {{"duration_s", [](auto& c, auto& n, auto& k) { c.duration_s = as_double(n, k); }}}},
        {"filter",
         {{"window_n",
           [](auto& c, auto& n, auto& k) {
               const double w = as_double(n, k);
               if (!(w >= 1.0) || w != std::floor(w))
                   throw ConfigError(k + ": expected a positive integer", line_of(n));
               c.window_n = static_cast<std::size_t>(w);
           }}}},
        {"mapping",
         {{"R_Hb_to_Rb", [](auto& c, auto& n, auto& k) { c.R_Hb_to_Rb = as_quat(n, k); }},
          {"R_He_to_Re", [](auto& c, auto& n, auto& k) { c.R_He_to_Re = as_quat(n, k); }}}},
        {"robot", {{"start", [](auto& c, auto& n, auto& k) { c.robot_start = as_vec3(n, k); }}}},
        {"admittance",
         {{"M_d", [](auto& c, auto& n, auto& k) { c.admittance.mass = as_diag(n, k); }},
          {"K_D", [](auto& c, auto& n, auto& k) { c.admittance.damping = as_diag(n, k); }},
          {"K_P", [](auto& c, auto& n, auto& k) { c.admittance.stiffness = as_diag(n, k); }},
          {"f_d", [](auto& c, auto& n, auto& k) { c.admittance.desired_force = as_vec3(n, k); }}}},
        {"saturation",
         {{"enabled", [](auto& c, auto& n, auto& k) { c.saturation.enabled = as_bool(n, k); }},
          {"f_th", [](auto& c, auto& n, auto& k) { c.saturation.f_th = as_diag(n, k).d; }},
          {"K_e_est", [](auto& c, auto& n, auto& k) { c.saturation.K_e_est = as_diag(n, k); }}}},
        {"tool",
         {{"mass", [](auto& c, auto& n, auto& k) { c.tool.mass = as_double(n, k); }},
          {"com", [](auto& c, auto& n, auto& k) { c.tool.center_of_mass = as_vec3(n, k); }},
          {"gravity", [](auto& c, auto& n, auto& k) { c.tool.gravity = as_vec3(n, k); }}}},
        {"contact",
         {{"epsilon_n",
           [](auto& c, auto& n, auto& k) {
               c.contact.epsilon = as_double(n, k);
               c.saturation.contact_epsilon = c.contact.epsilon;
           }},
          {"collision_window_s",
           [](auto& c, auto& n, auto& k) { c.contact.collision_window = as_double(n, k); }}}},
        {"render",
         {{"mode",
           [](auto& c, auto& n, auto& k) {
               try {
                   c.render_mode = parse_render_mode(as_string(n, k));
               } catch (const ContractViolation& e) {
                   throw ConfigError(k + ": " + e.what(), line_of(n));
               }
           }},
          {"K_h", [](auto& c, auto& n, auto& k) { c.coupling.K_h = as_diag(n, k); }},
          {"D_h", [](auto& c, auto& n, auto& k) { c.coupling.D_h = as_diag(n, k); }},
          {"f_bar_e", [](auto& c, auto& n, auto& k) { c.cosh.f_bar_e = as_diag(n, k).d; }},
          {"deadzone_n",
           [](auto& c, auto& n, auto& k) { c.cosh.contact_epsilon = as_double(n, k); }}}},
        {"device", {{"f_max", [](auto& c, auto& n, auto& k) { c.device.f_max = as_diag(n, k).d; }}}},
        {"env",
         {{"K_e", [](auto& c, auto& n, auto& k) { c.board.K_e = as_double(n, k); }},
          {"mu_k", [](auto& c, auto& n, auto& k) { c.board.mu_k = as_double(n, k); }},
          {"breakage_force",
           [](auto& c, auto& n, auto& k) { c.board.breakage_force = as_double(n, k); }},
          {"plane_point", [](auto& c, auto& n, auto& k) { c.board.plane_point = as_vec3(n, k); }},
          {"plane_normal",
           [](auto& c, auto& n, auto& k) {
               const Vec3 v = as_vec3(n, k);
               if (!(v.norm() > 0.0)) throw ConfigError(k + ": zero normal", line_of(n));
               c.board.normal = v.normalized();
           }}}},
        {"plant",
         {{"bandwidth_hz",
           [](auto& c, auto& n, auto& k) { c.plant_bandwidth_hz = as_double(n, k); }}}},
        {"operator",
         {{"letters", [](auto& c, auto& n, auto& k) { c.scripted.letters = as_string(n, k); }},
          {"stylus_start",
           [](auto& c, auto& n, auto& k) { c.scripted.stylus_start = as_vec3(n, k); }},
          {"origin",
           [](auto& c, auto& n, auto& k) {
               const auto v = as_list(n, k, 2);
               c.scripted.origin_u = v[0];
               c.scripted.origin_v = v[1];
           }},
          {"hover_height",
           [](auto& c, auto& n, auto& k) { c.scripted.hover_height = as_double(n, k); }},
          {"approach_depth",
           [](auto& c, auto& n, auto& k) { c.scripted.approach_depth = as_double(n, k); }},
          {"writing_speed",
           [](auto& c, auto& n, auto& k) { c.scripted.writing_speed = as_double(n, k); }},
          {"approach_speed",
           [](auto& c, auto& n, auto& k) { c.scripted.approach_speed = as_double(n, k); }},
          {"travel_speed",
           [](auto& c, auto& n, auto& k) { c.scripted.travel_speed = as_double(n, k); }},
          {"settle_time",
           [](auto& c, auto& n, auto& k) { c.scripted.settle_time = as_double(n, k); }},
          {"contact_dwell",
           [](auto& c, auto& n, auto& k) { c.scripted.contact_dwell = as_double(n, k); }},
          {"tremor_rms",
           [](auto& c, auto& n, auto& k) { c.scripted.tremor_rms = as_double(n, k); }},
          {"tremor_ramp",
           [](auto& c, auto& n, auto& k) { c.scripted.tremor_ramp = as_double(n, k); }},
          {"seed",
           [](auto& c, auto& n, auto& k) {
               const double s = as_double(n, k);
               if (!(s >= 0.0) || s != std::floor(s))
                   throw ConfigError(k + ": expected a non-negative integer", line_of(n));
               c.scripted.seed = static_cast<std::uint64_t>(s);
           }},
          {"hand_compliance",
           [](auto& c, auto& n, auto& k) { c.scripted.hand_compliance = as_double(n, k); }},
          {"hand_time_constant",
           [](auto& c, auto& n, auto& k) { c.scripted.hand_time_constant = as_double(n, k); }}}},
    };
    return table;
}

void check_label(const ScenarioConfig& cfg, std::size_t mode_line, std::size_t sat_line) {
    const auto flags = label_flags(cfg.label);
    if (!flags) return;
    const std::string label(scenario_label_name(cfg.label));
    if (cfg.render_mode != flags->mode)
        throw ConfigError("scenario " + label + " requires render.mode = " +
                              std::string(render_mode_name(flags->mode)),
                          mode_line);
    if (cfg.saturation.enabled != flags->saturation)
        throw ConfigError("scenario " + label + " requires saturation.enabled = " +
                              (flags->saturation ? "true" : "false"),
                          sat_line);
}

}  // namespace

void ScenarioConfig::validate() const {
    if (!(rate_hz > 0.0)) throw ConfigError("control.rate_hz must be > 0");
    if (!(duration_s >= 0.0)) throw ConfigError("session.duration_s must be >= 0");
    if (window_n == 0) throw ConfigError("filter.window_n must be >= 1");
    if (!(plant_bandwidth_hz > 0.0)) throw ConfigError("plant.bandwidth_hz must be > 0");
    if (!(tool.mass >= 0.0)) throw ConfigError("tool.mass must be >= 0");
    if (!(contact.epsilon >= 0.0) || !(contact.collision_window >= 0.0))
        throw ConfigError("contact thresholds must be >= 0");
    if (!(scripted.hand_time_constant > 0.0))
        throw ConfigError("operator.hand_time_constant must be > 0");
    try {
        admittance.validate();
        saturation.validate();
        board.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(e.what());
    }
    for (std::size_t j = 0; j < 3; ++j) {
        if (!(coupling.K_h[j] >= 0.0) || !(coupling.D_h[j] >= 0.0))
            throw ConfigError("render.K_h and render.D_h entries must be >= 0");
        if (!(cosh.f_bar_e[j] > 0.0)) throw ConfigError("render.f_bar_e entries must be > 0");
        if (!(device.f_max[j] > 0.0)) throw ConfigError("device.f_max entries must be > 0");
    }
    if (dt() > max_stable_dt(admittance))
        throw ConfigError("control.rate_hz too low for the admittance stability guard");
    check_label(*this, 0, 0);
}

ScenarioConfig scenario_preset(ScenarioLabel label) {
    ScenarioConfig cfg;
    cfg.label = label;
    if (const auto flags = label_flags(label)) {
        cfg.render_mode = flags->mode;
        cfg.saturation.enabled = flags->saturation;
    }
    return cfg;
}

ScenarioConfig parse_config(const std::string& yaml_text, std::optional<ScenarioLabel> label_override) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(e.msg, e.mark.line >= 0 ? static_cast<std::size_t>(e.mark.line) + 1 : 0);
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ConfigError("top level must be a mapping", line_of(root));

    std::optional<ScenarioLabel> label = label_override;
    if (!label && root["scenario"]) {
        const YAML::Node n = root["scenario"];
        label = parse_scenario_label(as_string(n, "scenario"));
        if (!label) throw ConfigError("scenario: expected A, B, C or custom", line_of(n));
    }
    ScenarioConfig cfg = scenario_preset(label.value_or(ScenarioLabel::Custom));

    std::size_t mode_line = 0;
    std::size_t sat_line = 0;
    const auto& table = key_table();
    for (const auto& kv : root) {
        const std::string section = kv.first.as<std::string>();
        if (section == "scenario") continue;
        const auto sec = table.find(section);
        if (sec == table.end()) throw ConfigError("unknown section '" + section + "'", line_of(kv.first));
        if (!kv.second.IsMap())
            throw ConfigError(section + ": expected a mapping of keys", line_of(kv.second));
        for (const auto& entry : kv.second) {
            const std::string key = entry.first.as<std::string>();
            const std::string full = section + "." + key;
            const auto it = sec->second.find(key);
            if (it == sec->second.end()) throw ConfigError("unknown key '" + full + "'", line_of(entry.first));
            it->second(cfg, entry.second, full);
            if (full == "render.mode") mode_line = line_of(entry.second);
            if (full == "saturation.enabled") sat_line = line_of(entry.second);
        }
    }
    check_label(cfg, mode_line, sat_line);
    cfg.validate();
    return cfg;
}

ScenarioConfig load_config(const std::string& path, std::optional<ScenarioLabel> label_override) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str(), label_override);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

namespace {

std::string list(const Vec3& v) {
    return "[" + format_double(v.x) + ", " + format_double(v.y) + ", " + format_double(v.z) + "]";
}

std::string list(const UnitQuaternion& q) {
    return "[" + format_double(q.w()) + ", " + format_double(q.x()) + ", " +
           format_double(q.y()) + ", " + format_double(q.z()) + "]";
}

}  // namespace

std::string dump_config(const ScenarioConfig& c) {
    std::ostringstream o;
    const auto d = [](double v) { return format_double(v); };
    o << "scenario: " << scenario_label_name(c.label) << "\n";
    o << "control:\n  rate_hz: " << d(c.rate_hz) << "\n";
    o << "session:\n  duration_s: " << d(c.duration_s) << "\n";
    o << "filter:\n  window_n: " << c.window_n << "\n";
    o << "mapping:\n  R_Hb_to_Rb: " << list(c.R_Hb_to_Rb) << "\n  R_He_to_Re: " << list(c.R_He_to_Re)
      << "\n";
    o << "robot:\n  start: " << list(c.robot_start) << "\n";
    o << "admittance:\n  M_d: " << list(c.admittance.mass.d) << "\n  K_D: "
      << list(c.admittance.damping.d) << "\n  K_P: " << list(c.admittance.stiffness.d)
      << "\n  f_d: " << list(c.admittance.desired_force) << "\n";
    o << "saturation:\n  enabled: " << (c.saturation.enabled ? "true" : "false")
      << "\n  f_th: " << list(c.saturation.f_th) << "\n  K_e_est: " << list(c.saturation.K_e_est.d)
      << "\n";
    o << "tool:\n  mass: " << d(c.tool.mass) << "\n  com: " << list(c.tool.center_of_mass)
      << "\n  gravity: " << list(c.tool.gravity) << "\n";
    o << "contact:\n  epsilon_n: " << d(c.contact.epsilon)
      << "\n  collision_window_s: " << d(c.contact.collision_window) << "\n";
    o << "render:\n  mode: " << render_mode_name(c.render_mode) << "\n  K_h: " << list(c.coupling.K_h.d)
      << "\n  D_h: " << list(c.coupling.D_h.d) << "\n  f_bar_e: " << list(c.cosh.f_bar_e)
      << "\n  deadzone_n: " << d(c.cosh.contact_epsilon) << "\n";
    o << "device:\n  f_max: " << list(c.device.f_max) << "\n";
    o << "env:\n  K_e: " << d(c.board.K_e) << "\n  mu_k: " << d(c.board.mu_k)
      << "\n  breakage_force: " << d(c.board.breakage_force)
      << "\n  plane_point: " << list(c.board.plane_point)
      << "\n  plane_normal: " << list(c.board.normal) << "\n";
    o << "plant:\n  bandwidth_hz: " << d(c.plant_bandwidth_hz) << "\n";
    const auto& s = c.scripted;
    o << "operator:\n  letters: \"" << s.letters << "\"\n  stylus_start: " << list(s.stylus_start)
      << "\n  origin: [" << d(s.origin_u) << ", " << d(s.origin_v) << "]"
      << "\n  hover_height: " << d(s.hover_height) << "\n  approach_depth: " << d(s.approach_depth)
      << "\n  writing_speed: " << d(s.writing_speed) << "\n  approach_speed: " << d(s.approach_speed)
      << "\n  travel_speed: " << d(s.travel_speed) << "\n  settle_time: " << d(s.settle_time)
      << "\n  contact_dwell: " << d(s.contact_dwell) << "\n  tremor_rms: " << d(s.tremor_rms)
      << "\n  tremor_ramp: " << d(s.tremor_ramp) << "\n  seed: " << s.seed
      << "\n  hand_compliance: " << d(s.hand_compliance)
      << "\n  hand_time_constant: " << d(s.hand_time_constant) << "\n";
    return o.str();
}

}  // namespace teleop
