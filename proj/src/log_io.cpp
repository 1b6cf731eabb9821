#include "teleop/log_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "teleop/text_io.hpp"

namespace teleop {

namespace {

ContactState parse_contact_state(std::string_view s) {
    for (ContactState c : {ContactState::NoContact, ContactState::Collision,
                           ContactState::Penetration, ContactState::Saturation})
        if (contact_state_name(c) == s) return c;
    throw std::invalid_argument("unknown contact state '" + std::string(s) + "'");
}

bool parse_flag(std::string_view s) {
    if (s == "1") return true;
    if (s == "0") return false;
    throw std::invalid_argument("flag must be 0 or 1, got '" + std::string(s) + "'");
}

void put_vec(std::string& row, const Vec3& v) {
    for (std::size_t i = 0; i < 3; ++i) {
        row += ',';
        append_double(row, v[i]);
    }
}

void put_quat(std::string& row, const UnitQuaternion& q) {
    for (double c : {q.w(), q.x(), q.y(), q.z()}) {
        row += ',';
        append_double(row, c);
    }
}

nlohmann::ordered_json yaml_to_json(const YAML::Node& node) {
    if (node.IsMap()) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& kv : node) j[kv.first.as<std::string>()] = yaml_to_json(kv.second);
        return j;
    }
    if (node.IsSequence()) {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& item : node) j.push_back(yaml_to_json(item));
        return j;
    }
    const std::string s = node.as<std::string>();
    if (node.Tag() == "!") return s;  // quoted scalar
    if (s == "true") return true;
    if (s == "false") return false;
    try {
        return parse_double(s);
    } catch (const std::invalid_argument&) {
        return s;
    }
}

}  // namespace

const std::string& log_csv_header() {
    static const std::string header =
        "t,stylus_px,stylus_py,stylus_pz,stylus_qw,stylus_qx,stylus_qy,stylus_qz,"
        "p_h_x,p_h_y,p_h_z,p_d_x,p_d_y,p_d_z,p_c_x,p_c_y,p_c_z,"
        "plant_px,plant_py,plant_pz,plant_qw,plant_qx,plant_qy,plant_qz,"
        "f_e_x,f_e_y,f_e_z,f_h_x,f_h_y,f_h_z,contact,sat_x,sat_y,sat_z,chalk_intact";
    return header;
}

void write_log_csv(std::ostream& out, const SessionLog& log) {
    out << log_csv_header() << '\n';
    std::string row;
    for (const LogRecord& r : log.records) {
        row.clear();
        append_double(row, r.t);
        put_vec(row, r.stylus.position);
        put_quat(row, r.stylus.orientation);
        put_vec(row, r.p_h);
        put_vec(row, r.p_d);
        put_vec(row, r.p_c);
        put_vec(row, r.plant.position);
        put_quat(row, r.plant.orientation);
        put_vec(row, r.f_e);
        put_vec(row, r.f_h);
        row += ',';
        row += contact_state_name(r.contact);
        for (bool s : r.saturated) row += s ? ",1" : ",0";
        row += r.chalk_intact ? ",1" : ",0";
        out << row << '\n';
    }
}

SessionLog read_log_csv(std::istream& in, const std::string& origin) {
    SessionLog log;
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& msg) {
        throw std::runtime_error(origin + ":" + std::to_string(line_no) + ": " + msg);
    };
    if (!std::getline(in, line)) {
        line_no = 1;
        fail("missing header");
    }
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != log_csv_header()) fail("unexpected header");
    const std::size_t expected = static_cast<std::size_t>(
        std::count(log_csv_header().begin(), log_csv_header().end(), ',') + 1);
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != expected)
            fail("expected " + std::to_string(expected) + " fields, got " + std::to_string(f.size()));
        try {
            std::size_t i = 0;
            const auto num = [&] { return parse_double(f[i++]); };
            const auto vec = [&] {
                const double x = num(), y = num(), z = num();
                return Vec3{x, y, z};
            };
            const auto quat = [&] {
                const double w = num(), x = num(), y = num(), z = num();
                return UnitQuaternion(w, x, y, z);
            };
            LogRecord r;
            r.t = num();
            r.stylus.position = vec();
            r.stylus.orientation = quat();
            r.stylus.frame = Frame::HapticBase;
            r.p_h = vec();
            r.p_d = vec();
            r.p_c = vec();
            r.plant.position = vec();
            r.plant.orientation = quat();
            r.plant.frame = Frame::RobotBase;
            r.f_e = vec();
            r.f_h = vec();
            r.contact = parse_contact_state(f[i++]);
            for (auto& s : r.saturated) s = parse_flag(f[i++]);
            r.chalk_intact = parse_flag(f[i++]);
            if (!log.records.empty() && !(r.t > log.records.back().t))
                fail("time not strictly increasing");
            log.records.push_back(r);
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        } catch (const ContractViolation& e) {
            fail(e.what());
        }
    }
    if (log.records.size() >= 2) log.dt = log.records[1].t - log.records[0].t;
    return log;
}

SessionLog read_log_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open log");
    return read_log_csv(in, path);
}

ForceProfile read_force_profile_csv(const std::string& path, std::string source) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open force profile");
    ForceProfile p;
    p.source = std::move(source);
    std::string line;
    std::size_t line_no = 0;
    const auto fail = [&](const std::string& msg) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1) {
            if (line != "t,f") fail("expected header 't,f'");
            continue;
        }
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 2) fail("expected 2 fields");
        try {
            p.samples.push_back({parse_double(f[0]), parse_double(f[1])});
        } catch (const std::invalid_argument& e) {
            fail(e.what());
        }
    }
    if (p.samples.empty()) fail("no samples");
    try {
        p.validate();
    } catch (const ContractViolation& e) {
        fail(e.what());
    }
    return p;
}

nlohmann::ordered_json config_to_json(const ScenarioConfig& cfg) {
    return yaml_to_json(YAML::Load(dump_config(cfg)));
}

nlohmann::ordered_json scenario_metrics_json(const ScenarioMetrics& m) {
    nlohmann::ordered_json j;
    j["label"] = m.label;
    j["success"] = m.success;
    j["failure_reason"] = m.failure_reason;
    j["contact_samples"] = m.contact_samples;
    j["mean_force_n"] = m.mean_force;
    j["peak_force_n"] = m.peak_force;
    j["md_n"] = m.md;
    j["delta_f_max_n"] = m.delta_f_max;
    j["stroke_segments"] = m.continuity.segments;
    j["unintended_gaps"] = m.continuity.unintended_gaps;
    return j;
}

nlohmann::ordered_json metrics_report_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["human"] = {{"mean_n", r.human_mean}, {"peak_n", r.human_peak}};
    j["scenarios"] = nlohmann::ordered_json::array();
    for (const auto& s : r.scenarios) j["scenarios"].push_back(scenario_metrics_json(s));
    return j;
}

nlohmann::ordered_json summary_json(const SessionOutcome& outcome, const ScenarioMetrics& metrics,
                                    const ScenarioConfig& cfg) {
    nlohmann::ordered_json j;
    auto& o = j["outcome"];
    o["success"] = outcome.success;
    o["failure_reason"] = failure_reason_name(outcome.reason);
    o["diagnostic"] = outcome.diagnostic;
    o["steps"] = outcome.log.records.size();
    o["duration_s"] = outcome.log.records.empty()
                          ? 0.0
                          : outcome.log.records.back().t + cfg.dt();
    if (outcome.break_time)
        o["chalk_break_t"] = *outcome.break_time;
    else
        o["chalk_break_t"] = nullptr;
    o["intended_segments"] = outcome.intended_segments;
    j["metrics"] = scenario_metrics_json(metrics);
    j["parameters"] = config_to_json(cfg);
    return j;
}

std::string strokes_svg(const StrokeCanvas& canvas) {
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const auto& seg : canvas.segments())
        for (const auto& p : seg) {
            umin = std::min(umin, p.u * 1e3);
            umax = std::max(umax, p.u * 1e3);
            vmin = std::min(vmin, p.v * 1e3);
            vmax = std::max(vmax, p.v * 1e3);
        }
    if (canvas.point_count() == 0) umin = vmin = 0.0, umax = vmax = 100.0;
    const double margin = 5.0;
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"";
    append_double(s, umin - margin);
    s += ' ';
    append_double(s, -vmax - margin);
    s += ' ';
    append_double(s, umax - umin + 2 * margin);
    s += ' ';
    append_double(s, vmax - vmin + 2 * margin);
    s += "\">\n";
    s += "<rect x=\"";
    append_double(s, umin - margin);
    s += "\" y=\"";
    append_double(s, -vmax - margin);
    s += "\" width=\"100%\" height=\"100%\" fill=\"#1f3b2d\"/>\n";
    std::size_t index = 0;
    for (const auto& seg : canvas.segments()) {
        s += "<polyline data-segment=\"" + std::to_string(index++) +
             "\" fill=\"none\" stroke=\"#f4f4ec\" stroke-width=\"1.2\" stroke-linecap=\"round\" points=\"";
        for (std::size_t k = 0; k < seg.size(); ++k) {
            if (k) s += ' ';
            append_double(s, seg[k].u * 1e3);
            s += ',';
            append_double(s, -seg[k].v * 1e3);
        }
        s += "\"/>\n";
    }
    s += "</svg>\n";
    return s;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot write");
    out << text;
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace teleop
