#pragma once

#include <array>

#include "teleop/se3.hpp"

namespace teleop {

// Force convention for this module: f_e is the force the robot exerts on the
// environment (equal and opposite to the sensed reaction), expressed in the
// frame named at each function.

/// M_d p~'' + K_D p~' + K_P p~ = -(f_d - f_e). Defaults are arbitrary
/// well-damped values (zeta ~ 0.9 at ~3.6 Hz), not tuned to any robot.
struct AdmittanceParams {
    Diag3 mass = Diag3::uniform(2.0);        // kg
    Diag3 damping = Diag3::uniform(80.0);    // N s/m
    Diag3 stiffness = Diag3::uniform(1000.0);  // N/m
    Vec3 desired_force;                      // N, R_e

    void validate() const;
};

struct AdmittanceState {
    Vec3 p_tilde;      // m, R_e
    Vec3 p_tilde_dot;  // m/s, R_e

    double energy(const AdmittanceParams& p) const {
        return 0.5 * p_tilde_dot.dot(p.mass * p_tilde_dot) +
               0.5 * p_tilde.dot(p.stiffness * p_tilde);
    }
};

struct SaturationParams {
    Vec3 f_th{100.0, 100.0, 12.0};        // N per base axis, > 0
    Diag3 K_e_est{{0.0, 0.0, 3000.0}};    // N/m, controller's belief
    bool enabled = false;
    /// Below this force an axis counts as force-free and the compliant
    /// command is taken as the current estimate of the environment rest
    /// position on that axis.
    double contact_epsilon = 0.5;

    void validate() const;
};

struct AxisSaturation {
    bool active = false;
    double p_bar_d = 0.0;    // latched saturated reference, valid while active
    double rest = 0.0;       // latched environment rest position
    double direction = 0.0;  // +1/-1, direction of the exerted force at latch
};

struct SaturationState {
    std::array<AxisSaturation, 3> axis{};
    Vec3 rest_candidate;
    bool candidate_valid = false;

    bool any_active() const { return axis[0].active || axis[1].active || axis[2].active; }
};

enum class ContactState { NoContact, Collision, Penetration, Saturation };

std::string_view contact_state_name(ContactState s);

struct ToolPayload {
    double mass = 0.0;     // kg
    Vec3 center_of_mass;   // m, R_e (enters torques only; forces are COM-independent)
    Vec3 gravity{0.0, 0.0, -9.81};  // m/s^2, R_b
};

/// f_meas - R^T (m g): removes the tool weight from a reaction measured in R_e.
Vec3 compensate_gravity(const Vec3& f_meas, const Pose& pose, const ToolPayload& tool);

/// Series stiffness K_P K_e / (K_P + K_e) per axis. Throws ContractViolation
/// when K_P + K_e vanishes on an axis.
Diag3 compute_keq(const Diag3& K_P, const Diag3& K_e);

/// Largest dt accepted by step_admittance: 1 / (2 f_n) over all axes.
double max_stable_dt(const AdmittanceParams& params);

/// One semi-implicit Euler step (velocity, then position). Throws
/// ContractViolation on a non-finite force, non-positive dt or a dt above the
/// stability guard.
AdmittanceState step_admittance(const AdmittanceState& state, const AdmittanceParams& params,
                                const Vec3& f_e, double dt);

/// p_c = p_d + R (-p~): the compliant position command in R_b.
Vec3 compliant_command(const Vec3& p_d, const Pose& pose, const Vec3& p_tilde);

struct SaturationResult {
    Vec3 p_d;
    SaturationState state;
};

/// Per-axis reference saturation in R_b.
///
/// An axis latches when |f_e,j| first exceeds f_th,j: the rest position is the
/// last compliant command seen while the axis was force-free, and the
/// saturated reference is rest + dir * f_th / K_eq (dir = sign of the exerted
/// force). While latched the output never goes deeper than that value. The
/// axis releases once |f_e,j| < f_th,j and the raw reference is on the free
/// side of the saturated value.
///
/// K_eq combines the admittance stiffness K_P with the controller's K_e_est.
/// Throws ContractViolation if an axis must latch while its K_eq is zero.
SaturationResult saturate_reference(const Vec3& p_h, const Vec3& f_e, const Vec3& p_c_last,
                                    const Diag3& K_P, const SaturationParams& sat,
                                    const SaturationState& state);

struct ContactThresholds {
    double epsilon = 0.5;            // N
    double collision_window = 0.05;  // s
};

/// Contact-state telemetry. Stateful: Collision lasts for the configured
/// window after each rising force edge.
class ContactClassifier {
public:
    explicit ContactClassifier(ContactThresholds th = {}) : th_(th) {}

    ContactState classify(const Vec3& f_e, bool saturation_active, double dt);
    void reset() { in_contact_ = false; since_onset_ = 0.0; }

private:
    ContactThresholds th_;
    bool in_contact_ = false;
    double since_onset_ = 0.0;
};

}  // namespace teleop
