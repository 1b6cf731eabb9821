#include "teleop/admittance.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

namespace teleop {

void AdmittanceParams::validate() const {
    for (std::size_t j = 0; j < 3; ++j) {
        if (!(mass[j] > 0.0) || !(damping[j] > 0.0) || !(stiffness[j] > 0.0))
            throw ContractViolation("admittance: M_d, K_D and K_P entries must be > 0");
    }
    if (!desired_force.finite()) throw ContractViolation("admittance: f_d must be finite");
}

void SaturationParams::validate() const {
    for (std::size_t j = 0; j < 3; ++j) {
        if (!(f_th[j] > 0.0)) throw ContractViolation("saturation: f_th entries must be > 0");
        if (!(K_e_est[j] >= 0.0))
            throw ContractViolation("saturation: K_e_est entries must be >= 0");
    }
    if (!(contact_epsilon >= 0.0))
        throw ContractViolation("saturation: contact epsilon must be >= 0");
}

std::string_view contact_state_name(ContactState s) {
    switch (s) {
        case ContactState::NoContact: return "NoContact";
        case ContactState::Collision: return "Collision";
        case ContactState::Penetration: return "Penetration";
        case ContactState::Saturation: return "Saturation";
    }
    return "?";
}

Vec3 compensate_gravity(const Vec3& f_meas, const Pose& pose, const ToolPayload& tool) {
    const Vec3 weight_base = tool.mass * tool.gravity;
    return f_meas - pose.orientation.conjugate().rotate(weight_base);
}

Diag3 compute_keq(const Diag3& K_P, const Diag3& K_e) {
    Diag3 keq;
    for (std::size_t j = 0; j < 3; ++j) {
        const double s = K_P[j] + K_e[j];
        if (s == 0.0) throw ContractViolation("compute_keq: K_P + K_e is singular on an axis");
        keq[j] = K_P[j] * K_e[j] / s;
    }
    return keq;
}

double max_stable_dt(const AdmittanceParams& params) {
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < 3; ++j) {
        const double fn = std::sqrt(params.stiffness[j] / params.mass[j]) / (2.0 * std::numbers::pi);
        dt = std::min(dt, 1.0 / (2.0 * fn));
    }
    return dt;
}

AdmittanceState step_admittance(const AdmittanceState& state, const AdmittanceParams& params,
                                const Vec3& f_e, double dt) {
    if (!f_e.finite()) throw ContractViolation("step_admittance: non-finite force input");
    if (!(dt > 0.0)) throw ContractViolation("step_admittance: dt must be > 0");
    if (dt > max_stable_dt(params))
        throw ContractViolation("step_admittance: dt exceeds the 1/(2 f_n) stability guard");

    AdmittanceState next;
    for (std::size_t j = 0; j < 3; ++j) {
        const double drive = f_e[j] - params.desired_force[j];
        const double acc = (drive - params.damping[j] * state.p_tilde_dot[j] -
                            params.stiffness[j] * state.p_tilde[j]) /
                           params.mass[j];
        next.p_tilde_dot[j] = state.p_tilde_dot[j] + dt * acc;
        next.p_tilde[j] = state.p_tilde[j] + dt * next.p_tilde_dot[j];
    }
    return next;
}

Vec3 compliant_command(const Vec3& p_d, const Pose& pose, const Vec3& p_tilde) {
    return p_d - pose.orientation.rotate(p_tilde);
}

SaturationResult saturate_reference(const Vec3& p_h, const Vec3& f_e, const Vec3& p_c_last,
                                    const Diag3& K_P, const SaturationParams& sat,
                                    const SaturationState& state) {
    SaturationResult out{p_h, state};
    if (!sat.enabled) {
        for (auto& a : out.state.axis) a.active = false;
        return out;
    }
    SaturationState& st = out.state;
    if (!st.candidate_valid) {
        st.rest_candidate = p_c_last;
        st.candidate_valid = true;
    }
    for (std::size_t j = 0; j < 3; ++j) {
        AxisSaturation& ax = st.axis[j];
        const double f = f_e[j];
        const double mag = std::abs(f);
        if (!ax.active && mag < sat.contact_epsilon) st.rest_candidate[j] = p_c_last[j];

        if (!ax.active && mag > sat.f_th[j]) {
            const double s = K_P[j] + sat.K_e_est[j];
            const double keq = s == 0.0 ? 0.0 : K_P[j] * sat.K_e_est[j] / s;
            if (keq == 0.0)
                throw ContractViolation("saturate_reference: K_eq is zero on axis " +
                                        std::to_string(j) +
                                        " while the force exceeds f_th (no environment stiffness)");
            ax.active = true;
            ax.direction = f > 0.0 ? 1.0 : -1.0;
            ax.rest = st.rest_candidate[j];
            ax.p_bar_d = ax.rest + ax.direction * sat.f_th[j] / keq;
        }
        if (!ax.active) continue;

        // depth of the raw reference past the saturated value, along dir
        const double excess = (p_h[j] - ax.p_bar_d) * ax.direction;
        if (excess <= 0.0) {
            if (mag < sat.f_th[j]) ax.active = false;
            out.p_d[j] = p_h[j];
        } else {
            out.p_d[j] = ax.p_bar_d;
        }
    }
    return out;
}

ContactState ContactClassifier::classify(const Vec3& f_e, bool saturation_active, double dt) {
    const bool touching = f_e.norm() >= th_.epsilon;
    if (!touching) {
        in_contact_ = false;
        since_onset_ = 0.0;
    } else if (!in_contact_) {
        in_contact_ = true;
        since_onset_ = 0.0;
    } else {
        since_onset_ += dt;
    }
    if (saturation_active) return ContactState::Saturation;
    if (!touching) return ContactState::NoContact;
    return since_onset_ < th_.collision_window ? ContactState::Collision
                                               : ContactState::Penetration;
}

}  // namespace teleop
