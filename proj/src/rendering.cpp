#include "teleop/rendering.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace teleop {

std::string_view render_mode_name(RenderMode m) {
    return m == RenderMode::MeasuredCosh ? "measured_cosh" : "virtualized";
}

RenderMode parse_render_mode(std::string_view name) {
    if (name == "measured_cosh") return RenderMode::MeasuredCosh;
    if (name == "virtualized") return RenderMode::Virtualized;
    throw ContractViolation("unknown render mode '" + std::string(name) + "'");
}

Vec3 render_virtualized(const Vec3& p_tilde_unsat, const Vec3& p_tilde_dot,
                        const VirtualCouplingParams& params) {
    return params.K_h * p_tilde_unsat + params.D_h * p_tilde_dot;
}

HapticError frame_error_to_haptic(const Vec3& p_h, const Vec3& p_c, const Vec3& p_tilde_dot,
                                  const MappingCalibration& calib, const Pose& effector) {
    const UnitQuaternion rb_to_hb = calib.R_Hb_to_Rb.conjugate();
    return {rb_to_hb.rotate(p_h - p_c), effector_to_haptic(p_tilde_dot, calib, effector)};
}

double cosh_gain() { return std::log(4.0 + std::sqrt(15.0)); }

Vec3 render_measured_cosh(const Vec3& f_e_hb, const Vec3& f_bar_hb, double contact_epsilon) {
    const double g = cosh_gain();
    Vec3 out;
    for (std::size_t j = 0; j < 3; ++j) {
        const double f = f_e_hb[j];
        const double fbar = std::abs(f_bar_hb[j]);
        if (!(fbar > 0.0))
            throw ContractViolation("render_measured_cosh: f_bar must be non-zero on every H_b axis");
        if (std::abs(f) < contact_epsilon) continue;
        out[j] = std::copysign(std::cosh(g * f / fbar), f);
    }
    return out;
}

Vec3 effector_to_haptic(const Vec3& v_re, const MappingCalibration& calib, const Pose& effector) {
    return calib.R_Hb_to_Rb.conjugate().rotate(effector.orientation.rotate(v_re));
}

Vec3 clamp_to_device(const Vec3& f, const DeviceLimits& limits) {
    Vec3 out;
    for (std::size_t j = 0; j < 3; ++j) out[j] = std::clamp(f[j], -limits.f_max[j], limits.f_max[j]);
    return out;
}

}  // namespace teleop
