#include "teleop/session.hpp"

#include <cmath>
#include <stdexcept>

namespace teleop {

std::string_view failure_reason_name(FailureReason r) {
    switch (r) {
        case FailureReason::None: return "none";
        case FailureReason::ChalkBroken: return "chalk_broken";
        case FailureReason::SafetyStop: return "safety_stop";
    }
    return "?";
}

namespace {

bool finite_pose(const Pose& p) {
    return p.position.finite() && std::isfinite(p.orientation.w()) &&
           std::isfinite(p.orientation.x()) && std::isfinite(p.orientation.y()) &&
           std::isfinite(p.orientation.z());
}

bool finite_record(const LogRecord& r) {
    return finite_pose(r.stylus) && r.p_h.finite() && r.p_d.finite() && r.p_c.finite() &&
           finite_pose(r.plant) && r.f_e.finite() && r.f_h.finite();
}

}  // namespace

TeleopSession::TeleopSession(ScenarioConfig config, std::unique_ptr<OperatorSource> op)
    : config_(std::move(config)),
      op_(std::move(op)),
      filter_(config_.window_n),
      classifier_(config_.contact) {
    config_.validate();
    if (!op_) throw ContractViolation("TeleopSession: no operator source");
    log_.dt = config_.dt();
    plant_.bandwidth_hz = config_.plant_bandwidth_hz;
}

StepStatus TeleopSession::step_once() {
    if (finished()) return status_;
    try {
        run_step();
    } catch (const ContractViolation& e) {
        fail(FailureReason::SafetyStop, e.what());
    }
    return status_;
}

void TeleopSession::run_step() {
    const double dt = config_.dt();
    const double t = static_cast<double>(step_) * dt;

    const std::optional<StylusSample> sample = op_->sample(t);
    if (!sample) {
        status_ = StepStatus::Completed;
        return;
    }
    if (step_ == 0) {
        calib_ = MappingCalibration::capture(config_.R_Hb_to_Rb, config_.R_He_to_Re,
                                             config_.robot_start, sample->pose.position);
        const Pose start = map_stylus_pose(sample->pose, calib_);
        plant_.pose = start;
        p_c_last_ = start.position;
    }

    // master station
    const Pose reference = map_stylus_pose(sample->pose, calib_);
    const Vec3 p_h = filter_.filter_position(reference.position);
    const UnitQuaternion q_h = filter_.filter_orientation(reference.orientation);

    // slave: saturation and admittance, driven by last step's sensed force
    Vec3 p_d = p_h;
    if (config_.saturation.enabled) {
        SaturationResult sat = saturate_reference(p_h, f_e_rb_, p_c_last_,
                                                  config_.admittance.stiffness,
                                                  config_.saturation, saturation_);
        p_d = sat.p_d;
        saturation_ = sat.state;
    }
    admittance_ = step_admittance(admittance_, config_.admittance, f_e_re_, dt);
    const Pose desired{p_d, q_h, Frame::RobotBase};
    const Vec3 p_c = compliant_command(p_d, desired, admittance_.p_tilde);

    // remote environment
    const Vec3 tip_before = plant_.pose.position;
    plant_ = step_plant(plant_, p_c, q_h, dt);
    const Vec3 tip_velocity = (plant_.pose.position - tip_before) / dt;
    const ContactResult contact = contact_force(plant_.pose.position, config_.board, tip_velocity);
    const UnitQuaternion& q_plant = plant_.pose.orientation;
    // wrist sensor reads the board reaction plus the tool weight, in R_e
    const Vec3 f_meas =
        q_plant.conjugate().rotate(contact.force + config_.tool.mass * config_.tool.gravity);
    f_e_re_ = -compensate_gravity(f_meas, plant_.pose, config_.tool);
    f_e_rb_ = q_plant.rotate(f_e_re_);
    p_c_last_ = p_c;

    chalk_ = update_chalk(chalk_, contact.normal, config_.board, t);
    const auto uv = to_board(plant_.pose.position, config_.board);
    canvas_.deposit({uv[0], uv[1]}, contact.penetration > 0.0, chalk_.intact);
    const ContactState state = classifier_.classify(f_e_rb_, saturation_.any_active(), dt);

    // force feedback
    Vec3 f_h;
    if (config_.render_mode == RenderMode::Virtualized) {
        const HapticError err =
            frame_error_to_haptic(p_h, p_c, admittance_.p_tilde_dot, calib_, desired);
        f_h = render_virtualized(err.position, err.rate, config_.coupling);
    } else {
        const Vec3 f_hb = effector_to_haptic(f_e_re_, calib_, plant_.pose);
        const Vec3 fbar_hb = effector_to_haptic(config_.cosh.f_bar_e, calib_, plant_.pose);
        f_h = render_measured_cosh(f_hb, fbar_hb, config_.cosh.contact_epsilon);
    }
    const Vec3 f_device = clamp_to_device(f_h, config_.device);
    // f_h is in the exerted-force sense; the device pushes the hand back
    op_->feedback(-f_device, dt);

    LogRecord rec;
    rec.t = t;
    rec.stylus = sample->pose;
    rec.p_h = p_h;
    rec.p_d = p_d;
    rec.p_c = p_c;
    rec.plant = plant_.pose;
    rec.f_e = f_e_rb_;
    rec.f_h = f_device;
    rec.contact = state;
    for (std::size_t j = 0; j < 3; ++j) rec.saturated[j] = saturation_.axis[j].active;
    rec.chalk_intact = chalk_.intact;
    const bool finite = finite_record(rec) && admittance_.p_tilde.finite() &&
                        admittance_.p_tilde_dot.finite();
    log_.records.push_back(rec);
    ++step_;

    if (!finite) {
        fail(FailureReason::SafetyStop, "non-finite state at t=" + std::to_string(t));
        return;
    }
    if (!chalk_.intact) fail(FailureReason::ChalkBroken, "chalk broke at t=" + std::to_string(t));
}

void TeleopSession::fail(FailureReason reason, std::string diagnostic) {
    status_ = StepStatus::Failed;
    reason_ = reason;
    diagnostic_ = std::move(diagnostic);
}

void TeleopSession::stop() {
    if (!finished()) status_ = StepStatus::Completed;
}

namespace {

Snapshot latest_state(const SessionLog& log, std::uint64_t step) {
    Snapshot s;
    s.step = step;
    if (!log.records.empty()) {
        const LogRecord& r = log.records.back();
        s.t = r.t;
        s.plant = r.plant;
        s.f_e = r.f_e;
        s.f_h = r.f_h;
        s.contact = r.contact;
        s.saturated = r.saturated;
        s.chalk_intact = r.chalk_intact;
    }
    return s;
}

}  // namespace

Snapshot TeleopSession::history_snapshot() const {
    Snapshot s = latest_state(log_, step_);
    const auto& segs = canvas_.segments();
    for (std::size_t seg = 0; seg < segs.size(); ++seg)
        for (const auto& p : segs[seg]) s.strokes.push_back({seg, p});
    return s;
}

Snapshot TeleopSession::snapshot() {
    Snapshot s = latest_state(log_, step_);
    const auto& segs = canvas_.segments();
    for (std::size_t seg = snap_segments_ == 0 ? 0 : snap_segments_ - 1; seg < segs.size(); ++seg) {
        const std::size_t from = (seg + 1 == snap_segments_) ? snap_points_ : 0;
        for (std::size_t k = from; k < segs[seg].size(); ++k) s.strokes.push_back({seg, segs[seg][k]});
    }
    snap_segments_ = segs.size();
    snap_points_ = segs.empty() ? 0 : segs.back().size();
    return s;
}

SessionOutcome TeleopSession::take_outcome() {
    SessionOutcome out;
    out.success = status_ != StepStatus::Failed && chalk_.intact;
    out.reason = status_ == StepStatus::Failed ? reason_ : FailureReason::None;
    out.diagnostic = diagnostic_;
    out.canvas = std::move(canvas_);
    out.log = std::move(log_);
    out.break_time = chalk_.break_time;
    if (const auto* scripted = dynamic_cast<const ScriptedOperator*>(op_.get()))
        out.intended_segments = scripted->intended_segments();
    canvas_ = {};
    log_ = {};
    return out;
}

MappingCalibration nominal_calibration(const ScenarioConfig& cfg) {
    return MappingCalibration::capture(cfg.R_Hb_to_Rb, cfg.R_He_to_Re, cfg.robot_start,
                                       cfg.scripted.stylus_start);
}

std::unique_ptr<OperatorSource> make_operator(const std::string& spec, const ScenarioConfig& cfg) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    if (kind == "scripted") {
        ScriptedParams params = cfg.scripted;
        if (!arg.empty()) params.letters = arg;
        const bool is_file = params.letters.find('.') != std::string::npos ||
                             params.letters.find('/') != std::string::npos;
        auto glyphs = is_file ? load_glyphs(params.letters) : builtin_glyphs(params.letters);
        return std::make_unique<ScriptedOperator>(std::move(glyphs), params, cfg.board,
                                                  nominal_calibration(cfg));
    }
    if (kind == "replay") {
        if (arg.empty()) throw std::runtime_error("replay operator needs a CSV path");
        return std::make_unique<ReplayOperator>(read_replay_csv(arg), arg);
    }
    throw std::runtime_error("unknown operator source '" + spec +
                             "' (expected scripted:<letters> or replay:<file>)");
}

SessionOutcome run_session(const ScenarioConfig& cfg, std::unique_ptr<OperatorSource> op,
                           double duration_s) {
    TeleopSession session(cfg, std::move(op));
    const auto max_steps = static_cast<std::uint64_t>(std::floor(duration_s * cfg.rate_hz + 1e-9));
    while (session.steps() < max_steps && session.step_once() == StepStatus::Running) {
    }
    return session.take_outcome();
}

}  // namespace teleop
