#pragma once

#include <string_view>
#include <utility>

#include "teleop/master_station.hpp"
#include "teleop/se3.hpp"

namespace teleop {

enum class RenderMode { MeasuredCosh, Virtualized };

std::string_view render_mode_name(RenderMode m);
/// Throws ContractViolation on an unknown name.
RenderMode parse_render_mode(std::string_view name);

/// Second spring-damper between the unsaturated motion error and the
/// displayed force. Defaults map a 1 cm error to 3 N.
struct VirtualCouplingParams {
    Diag3 K_h = Diag3::uniform(300.0);  // N/m
    Diag3 D_h = Diag3::uniform(5.0);    // N s/m
};

struct CoshMappingParams {
    Vec3 f_bar_e{12.0, 12.0, 12.0};  // N, per end-effector axis
    double contact_epsilon = 0.25;   // N, deadzone
};

struct DeviceLimits {
    Vec3 f_max{7.9, 7.9, 7.9};  // N
};

/// f_h = K_h p~_h + D_h p~'_h, all in H_b.
Vec3 render_virtualized(const Vec3& p_tilde_unsat, const Vec3& p_tilde_dot,
                        const VirtualCouplingParams& params);

struct HapticError {
    Vec3 position;  // H_b
    Vec3 rate;      // H_b
};

/// Rotates the unsaturated error p_h - p_c (R_b) and the admittance error
/// rate (R_e) into the haptic base frame.
HapticError frame_error_to_haptic(const Vec3& p_h, const Vec3& p_c, const Vec3& p_tilde_dot,
                                  const MappingCalibration& calib, const Pose& effector);

/// ln(4 + sqrt 15): the gain that makes cosh reach 4 at the nominal maximum.
double cosh_gain();

/// Measurement-based mapping in H_b: sign(f) cosh(ln(4+sqrt15) f / f_bar) per
/// axis, zero inside the contact deadzone. `f_bar` must already be rotated
/// into H_b; its magnitudes are used.
Vec3 render_measured_cosh(const Vec3& f_e_hb, const Vec3& f_bar_hb, double contact_epsilon);

/// Rotates an R_e vector into H_b through R_b.
Vec3 effector_to_haptic(const Vec3& v_re, const MappingCalibration& calib, const Pose& effector);

/// Per-axis clamp to +-f_max.
Vec3 clamp_to_device(const Vec3& f, const DeviceLimits& limits);

}  // namespace teleop
