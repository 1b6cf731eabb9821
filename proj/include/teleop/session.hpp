#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "teleop/admittance.hpp"
#include "teleop/config.hpp"
#include "teleop/environment.hpp"
#include "teleop/master_station.hpp"
#include "teleop/operator.hpp"
#include "teleop/rendering.hpp"

namespace teleop {

/// One control step. Forces: f_e is exerted by the robot (R_b); f_h is the
/// device output after clamping (H_b).
struct LogRecord {
    double t = 0.0;
    Pose stylus{{}, {}, Frame::HapticBase};
    Vec3 p_h;
    Vec3 p_d;
    Vec3 p_c;
    Pose plant;
    Vec3 f_e;
    Vec3 f_h;
    ContactState contact = ContactState::NoContact;
    std::array<bool, 3> saturated{};
    bool chalk_intact = true;
};

struct SessionLog {
    double dt = 0.0;
    std::vector<LogRecord> records;
};

enum class FailureReason { None, ChalkBroken, SafetyStop };

std::string_view failure_reason_name(FailureReason r);

struct SessionOutcome {
    bool success = true;
    FailureReason reason = FailureReason::None;
    std::string diagnostic;
    StrokeCanvas canvas;
    SessionLog log;
    std::size_t intended_segments = 0;
    std::optional<double> break_time;
};

/// Telemetry copy of the latest step. `strokes` holds only the points
/// deposited since the previous snapshot, tagged with their segment index.
struct Snapshot {
    std::uint64_t step = 0;
    double t = 0.0;
    Pose plant;
    Vec3 f_e;
    Vec3 f_h;
    ContactState contact = ContactState::NoContact;
    std::array<bool, 3> saturated{};
    bool chalk_intact = true;
    struct StrokeDelta {
        std::size_t segment;
        StrokePoint point;
    };
    std::vector<StrokeDelta> strokes;
};

/// Bounded multi-producer queue that never blocks producers: a push onto a
/// full queue discards the oldest element.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    void push(T value) {
        {
            std::lock_guard lock(mutex_);
            if (items_.size() >= capacity_) {
                items_.pop_front();
                ++dropped_;
            }
            items_.push_back(std::move(value));
        }
        cv_.notify_one();
    }

    std::optional<T> try_pop() {
        std::lock_guard lock(mutex_);
        if (items_.empty()) return std::nullopt;
        T v = std::move(items_.front());
        items_.pop_front();
        return v;
    }

    template <typename Rep, typename Period>
    std::optional<T> pop_for(std::chrono::duration<Rep, Period> timeout) {
        std::unique_lock lock(mutex_);
        if (!cv_.wait_for(lock, timeout, [&] { return !items_.empty(); })) return std::nullopt;
        T v = std::move(items_.front());
        items_.pop_front();
        return v;
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }
    std::size_t dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<T> items_;
    std::size_t capacity_;
    std::size_t dropped_ = 0;
};

enum class StepStatus { Running, Completed, Failed };

/// The bilateral loop. Each step runs, in order: operator sample -> pose
/// mapping -> tremor filter -> reference saturation -> admittance (driven by
/// the previous step's sensed force) -> compliant command -> plant ->
/// contact/chalk/strokes -> force rendering -> device clamp -> log. The
/// device force computed at step k reaches the operator before step k+1.
class TeleopSession {
public:
    TeleopSession(ScenarioConfig config, std::unique_ptr<OperatorSource> op);

    StepStatus step_once();
    bool finished() const { return status_ != StepStatus::Running; }
    StepStatus status() const { return status_; }
    FailureReason failure_reason() const { return reason_; }
    const std::string& diagnostic() const { return diagnostic_; }
    std::uint64_t steps() const { return step_; }
    double time() const { return static_cast<double>(step_) * config_.dt(); }

    const ScenarioConfig& config() const { return config_; }
    const SessionLog& log() const { return log_; }
    const StrokeCanvas& canvas() const { return canvas_; }
    const AdmittanceState& admittance_state() const { return admittance_; }
    const MappingCalibration& calibration() const { return calib_; }
    const ChalkState& chalk() const { return chalk_; }
    OperatorSource& operator_source() { return *op_; }

    /// Latest step plus the strokes deposited since the previous call.
    Snapshot snapshot();
    /// Latest step plus every stroke point deposited so far; leaves the
    /// snapshot() cursor alone.
    Snapshot history_snapshot() const;

    /// Ends the session as completed (e.g. stop requested by a client).
    void stop();
    /// Moves the results out; the session must be finished or stopped.
    SessionOutcome take_outcome();

private:
    void fail(FailureReason reason, std::string diagnostic);
    void run_step();

    ScenarioConfig config_;
    std::unique_ptr<OperatorSource> op_;
    MappingCalibration calib_;
    PoseFilter filter_;
    AdmittanceState admittance_;
    SaturationState saturation_;
    ContactClassifier classifier_;
    RobotPlant plant_;
    ChalkState chalk_;
    StrokeCanvas canvas_;
    SessionLog log_;

    Vec3 f_e_re_;   // exerted force, R_e, from the previous step
    Vec3 f_e_rb_;   // same, R_b
    Vec3 p_c_last_;
    std::uint64_t step_ = 0;
    StepStatus status_ = StepStatus::Running;
    FailureReason reason_ = FailureReason::None;
    std::string diagnostic_;

    std::size_t snap_segments_ = 0;
    std::size_t snap_points_ = 0;
};

/// Operator source for a spec string: `scripted:<letters|glyph file>` or
/// `replay:<csv>`. Scripted sources are calibrated from the config.
std::unique_ptr<OperatorSource> make_operator(const std::string& spec, const ScenarioConfig& cfg);

/// Mapping calibration a scripted operator uses before the session captures
/// its own (start positions from the config).
MappingCalibration nominal_calibration(const ScenarioConfig& cfg);

/// Runs until `duration_s`, operator exhaustion or failure.
SessionOutcome run_session(const ScenarioConfig& cfg, std::unique_ptr<OperatorSource> op,
                           double duration_s);

}  // namespace teleop
