#pragma once

#include <array>
#include <optional>
#include <vector>

#include "teleop/se3.hpp"

namespace teleop {

/// Planar spring blackboard with kinetic friction and a chalk that breaks
/// above `breakage_force`. Defaults are invented desk-scale values.
struct BlackboardModel {
    Vec3 plane_point;             // m, R_b
    Vec3 normal{0.0, 0.0, 1.0};   // unit, pointing out of the board (free side)
    double K_e = 3000.0;          // N/m along the normal
    double mu_k = 0.4;
    double breakage_force = 30.0;  // N

    void validate() const;
};

/// Orthonormal in-plane axes (u, v) for 2D board coordinates.
struct BoardAxes {
    Vec3 u;
    Vec3 v;
};

BoardAxes board_axes(const BlackboardModel& board);
/// Projects a R_b point onto board coordinates (m).
std::array<double, 2> to_board(const Vec3& p, const BlackboardModel& board);
/// Lifts board coordinates plus a height along the normal back into R_b.
Vec3 from_board(double u, double v, double height, const BlackboardModel& board);

/// First-order tracking abstraction of a position-controlled arm.
struct RobotPlant {
    Pose pose;
    double bandwidth_hz = 20.0;
};

/// p <- p + (1 - exp(-2 pi B dt)) (p_c - p); orientation slerped by the same
/// factor. An infinite bandwidth snaps to the command.
RobotPlant step_plant(const RobotPlant& plant, const Vec3& p_c, const UnitQuaternion& q_c,
                      double dt);

struct ContactResult {
    Vec3 force;         // reaction of the board on the tool tip, R_b
    double normal = 0.0;  // magnitude of the normal component, N
    double penetration = 0.0;  // m
};

/// One-sided spring along the normal plus Coulomb friction opposing the
/// tangential tip velocity (zero below 1e-6 m/s).
ContactResult contact_force(const Vec3& tip, const BlackboardModel& board, const Vec3& tip_velocity);

struct ChalkState {
    bool intact = true;
    std::optional<double> break_time;
};

ChalkState update_chalk(const ChalkState& chalk, double normal_force,
                        const BlackboardModel& board, double t);

struct StrokePoint {
    double u = 0.0;
    double v = 0.0;
    friend bool operator==(const StrokePoint&, const StrokePoint&) = default;
};

/// Deposited chalk, segmented at every pen-up.
class StrokeCanvas {
public:
    /// Appends `p` while in contact with intact chalk; anything else closes
    /// the current segment.
    void deposit(const StrokePoint& p, bool in_contact, bool chalk_intact);

    const std::vector<std::vector<StrokePoint>>& segments() const { return segments_; }
    std::size_t point_count() const;
    bool pen_down() const { return pen_down_; }

private:
    std::vector<std::vector<StrokePoint>> segments_;
    bool pen_down_ = false;
};

}  // namespace teleop
