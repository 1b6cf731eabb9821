#include "teleop/environment.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace teleop {

void BlackboardModel::validate() const {
    if (std::abs(normal.norm() - 1.0) > 1e-9)
        throw ContractViolation("blackboard: plane normal must be a unit vector");
    if (!(K_e >= 0.0)) throw ContractViolation("blackboard: K_e must be >= 0");
    if (!(breakage_force > 0.0)) throw ContractViolation("blackboard: breakage_force must be > 0");
    if (!(mu_k >= 0.0)) throw ContractViolation("blackboard: mu_k must be >= 0");
}

BoardAxes board_axes(const BlackboardModel& board) {
    const Vec3& n = board.normal;
    const Vec3 ref = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 u = (ref - ref.dot(n) * n).normalized();
    return {u, n.cross(u)};
}

std::array<double, 2> to_board(const Vec3& p, const BlackboardModel& board) {
    const BoardAxes ax = board_axes(board);
    const Vec3 d = p - board.plane_point;
    return {d.dot(ax.u), d.dot(ax.v)};
}

Vec3 from_board(double u, double v, double height, const BlackboardModel& board) {
    const BoardAxes ax = board_axes(board);
    return board.plane_point + u * ax.u + v * ax.v + height * board.normal;
}

RobotPlant step_plant(const RobotPlant& plant, const Vec3& p_c, const UnitQuaternion& q_c,
                      double dt) {
    if (!(dt > 0.0)) throw ContractViolation("step_plant: dt must be > 0");
    const double alpha = std::isinf(plant.bandwidth_hz)
                             ? 1.0
                             : 1.0 - std::exp(-2.0 * std::numbers::pi * plant.bandwidth_hz * dt);
    RobotPlant next = plant;
    next.pose.position = plant.pose.position + alpha * (p_c - plant.pose.position);
    next.pose.orientation = alpha == 1.0 ? q_c : plant.pose.orientation.slerp(q_c, alpha);
    return next;
}

ContactResult contact_force(const Vec3& tip, const BlackboardModel& board, const Vec3& tip_velocity) {
    ContactResult out;
    const double d = (board.plane_point - tip).dot(board.normal);
    if (!(d > 0.0)) return out;
    out.penetration = d;
    out.normal = board.K_e * d;
    out.force = out.normal * board.normal;
    const Vec3 vt = tip_velocity - tip_velocity.dot(board.normal) * board.normal;
    const double speed = vt.norm();
    if (speed >= 1e-6) out.force -= (board.mu_k * out.normal / speed) * vt;
    return out;
}

ChalkState update_chalk(const ChalkState& chalk, double normal_force, const BlackboardModel& board,
                        double t) {
    if (chalk.intact && std::abs(normal_force) > board.breakage_force) return {false, t};
    return chalk;
}

void StrokeCanvas::deposit(const StrokePoint& p, bool in_contact, bool chalk_intact) {
    if (in_contact && chalk_intact) {
        if (!pen_down_) segments_.emplace_back();
        segments_.back().push_back(p);
        pen_down_ = true;
    } else {
        pen_down_ = false;
    }
}

std::size_t StrokeCanvas::point_count() const {
    std::size_t n = 0;
    for (const auto& s : segments_) n += s.size();
    return n;
}

}  // namespace teleop
