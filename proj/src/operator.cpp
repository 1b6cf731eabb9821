#include "teleop/operator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "teleop/text_io.hpp"

namespace teleop {

namespace {

Glyph glyph_a() {
    return {"A", 0.045, {{{0.0, 0.0}, {0.015, 0.04}, {0.03, 0.0}}, {{0.0075, 0.02}, {0.0225, 0.02}}}};
}

StrokePath ellipse_arc(double cu, double cv, double a, double b, double from_deg, double to_deg,
                       double step_deg) {
    StrokePath out;
    const int n = static_cast<int>(std::lround((to_deg - from_deg) / step_deg));
    for (int k = 0; k <= n; ++k) {
        const double ang = (from_deg + (to_deg - from_deg) * k / n) * std::numbers::pi / 180.0;
        out.push_back({cu + a * std::cos(ang), cv + b * std::sin(ang)});
    }
    return out;
}

Glyph glyph_c() { return {"C", 0.04, {ellipse_arc(0.015, 0.02, 0.015, 0.02, 45.0, 315.0, 15.0)}}; }

Glyph glyph_g() {
    StrokePath s = ellipse_arc(0.015, 0.02, 0.015, 0.02, 45.0, 360.0, 15.0);
    s.push_back({0.015, 0.02});
    return {"G", 0.04, {s}};
}

// Portable uniform double in [0, 1) from the standardized mt19937_64 stream.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::vector<Glyph> builtin_glyphs(const std::string& letters) {
    std::vector<Glyph> out;
    for (char c : letters) {
        switch (c) {
            case 'A': out.push_back(glyph_a()); break;
            case 'C': out.push_back(glyph_c()); break;
            case 'G': out.push_back(glyph_g()); break;
            case '-': break;
            default:
                throw std::runtime_error(std::string("no built-in glyph for '") + c +
                                         "' (built-ins: A, C, G)");
        }
    }
    return out;
}

std::vector<Glyph> load_glyphs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open glyph file " + path);
    std::vector<Glyph> out;
    try {
        const nlohmann::json j = nlohmann::json::parse(in);
        for (const auto& g : j.at("letters")) {
            Glyph glyph;
            glyph.name = g.value("name", "");
            glyph.advance = g.value("advance", 0.05);
            for (const auto& s : g.at("strokes")) {
                StrokePath stroke;
                for (const auto& p : s) stroke.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
                if (stroke.size() < 2)
                    throw std::runtime_error("glyph '" + glyph.name + "' has a stroke with < 2 points");
                glyph.strokes.push_back(std::move(stroke));
            }
            out.push_back(std::move(glyph));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
    return out;
}

std::size_t stroke_count(const std::vector<Glyph>& glyphs) {
    std::size_t n = 0;
    for (const auto& g : glyphs) n += g.strokes.size();
    return n;
}

TremorGenerator::TremorGenerator(std::uint64_t seed, double rms, double f_lo, double f_hi,
                                 int components)
    : rms_(rms), amplitude_(rms * std::sqrt(2.0 / components)) {
    std::mt19937_64 rng(seed);
    for (auto& axis : axes_) {
        axis.resize(static_cast<std::size_t>(components));
        for (auto& c : axis) {
            c.freq = f_lo + (f_hi - f_lo) * unit(rng);
            c.phase = 2.0 * std::numbers::pi * unit(rng);
        }
    }
}

Vec3 TremorGenerator::at(double t) const {
    Vec3 out;
    if (rms_ == 0.0) return out;
    for (std::size_t a = 0; a < 3; ++a) {
        double s = 0.0;
        for (const auto& c : axes_[a]) s += std::sin(2.0 * std::numbers::pi * c.freq * t + c.phase);
        out[a] = amplitude_ * s;
    }
    return out;
}

std::vector<Waypoint> plan_letter_path(const std::vector<Glyph>& glyphs, const ScriptedParams& p,
                                       const BlackboardModel& board, const Vec3& robot_start) {
    if (!(p.writing_speed > 0.0) || !(p.approach_speed > 0.0) || !(p.travel_speed > 0.0))
        throw ContractViolation("scripted operator: speeds must be > 0");
    std::vector<Waypoint> path;
    double t = 0.0;
    Vec3 at = robot_start;
    path.push_back({t, at, false});
    auto move_to = [&](const Vec3& target, double speed, bool pen_down) {
        const double d = (target - at).norm();
        if (d > 0.0) t += d / speed;
        at = target;
        path.push_back({t, at, pen_down});
    };
    auto hold = [&](double seconds) {
        if (seconds <= 0.0) return;
        t += seconds;
        path.push_back({t, at, false});
    };

    hold(p.settle_time);
    double u0 = p.origin_u;
    for (const auto& g : glyphs) {
        for (const auto& stroke : g.strokes) {
            const StrokePoint& first = stroke.front();
            move_to(from_board(u0 + first.u, p.origin_v + first.v, p.hover_height, board),
                    p.travel_speed, false);
            move_to(from_board(u0 + first.u, p.origin_v + first.v, -p.approach_depth, board),
                    p.approach_speed, false);
            hold(p.contact_dwell);
            for (std::size_t k = 1; k < stroke.size(); ++k)
                move_to(from_board(u0 + stroke[k].u, p.origin_v + stroke[k].v, -p.approach_depth,
                                   board),
                        p.writing_speed, true);
            const StrokePoint& last = stroke.back();
            move_to(from_board(u0 + last.u, p.origin_v + last.v, p.hover_height, board),
                    p.approach_speed, false);
        }
        u0 += g.advance;
    }
    move_to(robot_start, p.travel_speed, false);
    hold(p.settle_time);
    return path;
}

ScriptedOperator::ScriptedOperator(std::vector<Glyph> glyphs, ScriptedParams params,
                                   const BlackboardModel& board, const MappingCalibration& mapping)
    : glyphs_(std::move(glyphs)),
      params_(std::move(params)),
      mapping_(mapping),
      tremor_(params_.seed, params_.tremor_rms),
      intended_segments_(stroke_count(glyphs_)) {
    if (!mapping_.initialized) throw ContractViolation("ScriptedOperator: mapping not captured");
    path_ = plan_letter_path(glyphs_, params_, board, mapping_.robot_start);
}

Vec3 ScriptedOperator::intended(double t) const {
    if (path_.empty()) return mapping_.robot_start;
    if (t <= path_.front().t) return path_.front().position;
    if (t >= path_.back().t) return path_.back().position;
    // first waypoint with time >= t
    auto it = std::lower_bound(path_.begin(), path_.end(), t,
                               [](const Waypoint& w, double tt) { return w.t < tt; });
    const Waypoint& b = *it;
    const Waypoint& a = *(it - 1);
    const double span = b.t - a.t;
    const double s = span > 0.0 ? (t - a.t) / span : 1.0;
    return a.position + s * (b.position - a.position);
}

bool ScriptedOperator::intends_contact(double t) const {
    if (path_.empty() || t <= path_.front().t || t > path_.back().t) return false;
    auto it = std::lower_bound(path_.begin(), path_.end(), t,
                               [](const Waypoint& w, double tt) { return w.t < tt; });
    return it->pen_down;
}

std::optional<StylusSample> ScriptedOperator::sample(double t) {
    if (t > duration() + 1e-12) return std::nullopt;
    const double ramp =
        params_.tremor_ramp > 0.0 ? std::min(1.0, t / params_.tremor_ramp) : 1.0;
    StylusSample s;
    s.t = t;
    s.pose.frame = Frame::HapticBase;
    s.pose.orientation = UnitQuaternion::identity();
    s.pose.position = unmap_position(intended(t), mapping_) + ramp * tremor_.at(t) + hand_offset_;
    return s;
}

void ScriptedOperator::feedback(const Vec3& device_force, double dt) {
    if (params_.hand_compliance <= 0.0) return;
    const double alpha = 1.0 - std::exp(-dt / params_.hand_time_constant);
    hand_offset_ += alpha * (params_.hand_compliance * device_force - hand_offset_);
}

std::string ScriptedOperator::describe() const {
    std::ostringstream os;
    os << "scripted:" << params_.letters << " seed=" << params_.seed;
    return os.str();
}

std::vector<StylusSample> scripted_operator(const std::vector<Glyph>& glyphs,
                                            const ScriptedParams& params,
                                            const BlackboardModel& board,
                                            const MappingCalibration& mapping, double dt) {
    ScriptedOperator op(glyphs, params, board, mapping);
    std::vector<StylusSample> out;
    for (std::size_t k = 0;; ++k) {
        auto s = op.sample(static_cast<double>(k) * dt);
        if (!s) break;
        out.push_back(*s);
    }
    return out;
}

ReplayOperator::ReplayOperator(std::vector<StylusSample> samples, std::string origin)
    : samples_(std::move(samples)), origin_(std::move(origin)) {
    for (std::size_t i = 1; i < samples_.size(); ++i)
        if (!(samples_[i].t > samples_[i - 1].t))
            throw ContractViolation("replay trace timestamps must be strictly increasing");
}

std::optional<StylusSample> ReplayOperator::sample(double t) {
    if (samples_.empty() || t > samples_.back().t + 1e-12) return std::nullopt;
    while (cursor_ + 1 < samples_.size() && samples_[cursor_ + 1].t <= t + 1e-12) ++cursor_;
    StylusSample s = samples_[cursor_];
    s.t = t;
    return s;
}

std::vector<StylusSample> read_replay_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open replay file " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ":1: empty replay file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,px,py,pz,qw,qx,qy,qz")
        throw std::runtime_error(path + ":1: expected header t,px,py,pz,qw,qx,qy,qz");
    std::vector<StylusSample> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 8)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 8 fields");
        try {
            StylusSample s;
            s.t = parse_double(f[0]);
            s.pose.frame = Frame::HapticBase;
            s.pose.position = {parse_double(f[1]), parse_double(f[2]), parse_double(f[3])};
            s.pose.orientation = UnitQuaternion(parse_double(f[4]), parse_double(f[5]),
                                                parse_double(f[6]), parse_double(f[7]));
            if (!out.empty() && !(s.t > out.back().t))
                throw std::invalid_argument("timestamps must be strictly increasing");
            out.push_back(s);
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_replay_csv(const std::string& path, const std::vector<StylusSample>& samples) {
    std::string text = "t,px,py,pz,qw,qx,qy,qz\n";
    for (const auto& s : samples) {
        const double vals[8] = {s.t,
                                s.pose.position.x,
                                s.pose.position.y,
                                s.pose.position.z,
                                s.pose.orientation.w(),
                                s.pose.orientation.x(),
                                s.pose.orientation.y(),
                                s.pose.orientation.z()};
        for (int i = 0; i < 8; ++i) {
            if (i) text += ',';
            append_double(text, vals[i]);
        }
        text += '\n';
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

LiveOperator::LiveOperator(std::size_t capacity) : capacity_(capacity) {}

void LiveOperator::push(const StylusSample& s) {
    std::lock_guard lock(mutex_);
    if (!queue_.empty() && !(s.t > queue_.back().t)) return;
    if (queue_.size() >= capacity_) {
        queue_.pop_front();
        ++dropped_;
    }
    queue_.push_back(s);
}

std::optional<StylusSample> LiveOperator::sample(double t) {
    {
        std::lock_guard lock(mutex_);
        while (!queue_.empty()) {
            const StylusSample& s = queue_.front();
            if (!held_ || !last_input_t_ || s.t > *last_input_t_) {
                held_ = s;
                last_input_t_ = s.t;
            }
            queue_.pop_front();
        }
    }
    StylusSample out = held_.value_or(StylusSample{});
    out.t = t;
    out.pose.frame = Frame::HapticBase;
    return out;
}

std::size_t LiveOperator::dropped() const {
    std::lock_guard lock(mutex_);
    return dropped_;
}

}  // namespace teleop
