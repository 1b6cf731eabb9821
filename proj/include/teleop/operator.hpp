#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "teleop/environment.hpp"
#include "teleop/master_station.hpp"
#include "teleop/se3.hpp"

namespace teleop {

/// One stylus reading in H_b.
struct StylusSample {
    double t = 0.0;
    Pose pose{{}, UnitQuaternion::identity(), Frame::HapticBase};
};

/// Produces the stylus pose for each control step.
class OperatorSource {
public:
    virtual ~OperatorSource() = default;

    /// Sample for control time `t`; std::nullopt once the source is exhausted.
    virtual std::optional<StylusSample> sample(double t) = 0;
    /// Force the haptic device applies to the hand (H_b), from the previous
    /// control step. Sources without a hand model ignore it.
    virtual void feedback(const Vec3& device_force, double dt) {
        (void)device_force;
        (void)dt;
    }
    virtual std::string describe() const = 0;
};

using StrokePath = std::vector<StrokePoint>;

/// A glyph: pen-down polylines in glyph coordinates (m), plus the horizontal
/// advance to the next glyph.
struct Glyph {
    std::string name;
    double advance = 0.05;
    std::vector<StrokePath> strokes;
};

/// Built-in A, C and G glyphs, 4 cm tall.
std::vector<Glyph> builtin_glyphs(const std::string& letters);
/// Reads `{"letters": [{"name", "advance", "strokes": [[[u, v], ...], ...]}]}`.
std::vector<Glyph> load_glyphs(const std::string& path);
std::size_t stroke_count(const std::vector<Glyph>& glyphs);

/// Physiological tremor: a sum of sinusoids with seeded frequencies in
/// [f_lo, f_hi] and random phases, scaled to the requested RMS per axis.
class TremorGenerator {
public:
    TremorGenerator(std::uint64_t seed, double rms, double f_lo = 8.0, double f_hi = 12.0,
                    int components = 16);
    Vec3 at(double t) const;
    double rms() const { return rms_; }

private:
    struct Component {
        double freq;
        double phase;
    };
    double rms_;
    double amplitude_;
    std::array<std::vector<Component>, 3> axes_;
};

struct ScriptedParams {
    std::string letters = "ACG";   // built-in glyph names, or a glyph file path
    Vec3 stylus_start;             // H_b
    double origin_u = -0.07;       // board coordinates of the first glyph's origin
    double origin_v = -0.02;
    double hover_height = 0.02;    // m above the board while pen-up
    double approach_depth = 0.02;  // m of commanded reference below the surface
    double writing_speed = 0.04;   // m/s
    double approach_speed = 0.04;  // m/s along the normal
    double travel_speed = 0.08;    // m/s pen-up
    double settle_time = 0.3;      // s hold at both ends
    double contact_dwell = 0.0;    // s hold at depth before tracing each stroke
    double tremor_rms = 0.0015;    // m per axis
    double tremor_ramp = 0.5;      // s fade-in so the first sample is the start pose
    std::uint64_t seed = 7;
    /// Hand admittance: stylus offset = compliance * device force, through a
    /// first-order lag. Zero compliance disables the coupling.
    double hand_compliance = 0.0;     // m/N
    double hand_time_constant = 0.05;  // s
};

/// Time-stamped waypoint of the operator's intended tip path in R_b.
struct Waypoint {
    double t;
    Vec3 position;
    bool pen_down;  // the segment ending at this waypoint is a writing stroke
};

/// Intended tip path: hovers from `robot_start`, then for each stroke travels
/// pen-up, descends to the approach depth, traces the polyline and lifts.
std::vector<Waypoint> plan_letter_path(const std::vector<Glyph>& glyphs, const ScriptedParams& p,
                                       const BlackboardModel& board, const Vec3& robot_start);

/// Scripted operator: letter path mapped back into stylus space, plus tremor
/// and the optional hand admittance.
class ScriptedOperator final : public OperatorSource {
public:
    ScriptedOperator(std::vector<Glyph> glyphs, ScriptedParams params, const BlackboardModel& board,
                     const MappingCalibration& mapping);

    std::optional<StylusSample> sample(double t) override;
    void feedback(const Vec3& device_force, double dt) override;
    std::string describe() const override;

    double duration() const { return path_.empty() ? 0.0 : path_.back().t; }
    const std::vector<Waypoint>& path() const { return path_; }
    /// Intended (tremor- and feedback-free) tip position in R_b.
    Vec3 intended(double t) const;
    /// Whether the operator intends the pen to be writing at time t.
    bool intends_contact(double t) const;
    std::size_t intended_segments() const { return intended_segments_; }

private:
    std::vector<Glyph> glyphs_;
    ScriptedParams params_;
    MappingCalibration mapping_;
    std::vector<Waypoint> path_;
    TremorGenerator tremor_;
    Vec3 hand_offset_;
    std::size_t intended_segments_ = 0;
};

/// Generates the scripted operator's sample stream at a fixed period (used by
/// tests and by the CLI to export reusable replay traces).
std::vector<StylusSample> scripted_operator(const std::vector<Glyph>& glyphs,
                                            const ScriptedParams& params,
                                            const BlackboardModel& board,
                                            const MappingCalibration& mapping, double dt);

/// Replays a recorded stylus trace; zero-order hold between samples.
class ReplayOperator final : public OperatorSource {
public:
    explicit ReplayOperator(std::vector<StylusSample> samples, std::string origin = "memory");

    std::optional<StylusSample> sample(double t) override;
    std::string describe() const override { return "replay:" + origin_; }

private:
    std::vector<StylusSample> samples_;
    std::size_t cursor_ = 0;
    std::string origin_;
};

/// Reads a `t,px,py,pz,qw,qx,qy,qz` CSV trace (H_b, SI units). Throws
/// std::runtime_error with the offending line number.
std::vector<StylusSample> read_replay_csv(const std::string& path);
void write_replay_csv(const std::string& path, const std::vector<StylusSample>& samples);

/// Input fed asynchronously (the service's controlling client). Holds the
/// last sample between arrivals; never exhausts.
class LiveOperator final : public OperatorSource {
public:
    explicit LiveOperator(std::size_t capacity = 256);

    /// Thread-safe; drops the oldest queued input when full.
    void push(const StylusSample& s);
    std::optional<StylusSample> sample(double t) override;
    std::string describe() const override { return "live"; }

    /// Client timestamp of the most recently consumed input.
    std::optional<double> last_input_time() const { return last_input_t_; }
    std::size_t dropped() const;

private:
    mutable std::mutex mutex_;
    std::deque<StylusSample> queue_;
    std::size_t capacity_;
    std::size_t dropped_ = 0;
    std::optional<StylusSample> held_;
    std::optional<double> last_input_t_;
};

}  // namespace teleop
