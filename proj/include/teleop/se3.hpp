#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace teleop {

/// Raised when a caller breaks an operation's precondition (frame mismatch,
/// non-orthonormal matrix, invalid parameter block, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

#ifndef TELEOP_FRAME_CHECKS
#ifdef NDEBUG
#define TELEOP_FRAME_CHECKS 0
#else
#define TELEOP_FRAME_CHECKS 1
#endif
#endif

inline constexpr bool kFrameChecks = TELEOP_FRAME_CHECKS != 0;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
    friend constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
    friend constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
    friend constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
    friend constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
    friend constexpr Vec3 operator/(const Vec3& a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;

    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    constexpr Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const { return *this / norm(); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

/// Elementwise product; diagonal gain matrices are stored as their diagonal.
constexpr Vec3 cwise(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }

/// Diagonal 3x3 matrix. All gain/stiffness matrices in the controller are
/// diagonal by construction, so only the diagonal is stored.
struct Diag3 {
    Vec3 d;

    static constexpr Diag3 uniform(double v) { return {{v, v, v}}; }
    constexpr Vec3 operator*(const Vec3& v) const { return cwise(d, v); }
    constexpr double operator[](std::size_t i) const { return d[i]; }
    constexpr double& operator[](std::size_t i) { return d[i]; }
    friend constexpr bool operator==(const Diag3&, const Diag3&) = default;
};

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 transpose(const Mat3& m);
Mat3 multiply(const Mat3& a, const Mat3& b);
Vec3 multiply(const Mat3& m, const Vec3& v);
double determinant(const Mat3& m);

/// Unit quaternion (w, x, y, z). Every constructor and operation returns the
/// canonical representative with w >= 0 (first non-zero component positive
/// when w == 0), so equal rotations compare bitwise equal after the same
/// arithmetic.
class UnitQuaternion {
public:
    constexpr UnitQuaternion() = default;
    /// Normalizes the given components (unit input is kept bit-exact); throws
    /// ContractViolation on a zero or non-finite quaternion.
    UnitQuaternion(double w, double x, double y, double z);

    static constexpr UnitQuaternion identity() { return {}; }
    static UnitQuaternion from_axis_angle(const Vec3& axis, double angle_rad);

    constexpr double w() const { return w_; }
    constexpr double x() const { return x_; }
    constexpr double y() const { return y_; }
    constexpr double z() const { return z_; }
    constexpr std::array<double, 4> coeffs() const { return {w_, x_, y_, z_}; }

    UnitQuaternion conjugate() const;
    UnitQuaternion operator*(const UnitQuaternion& rhs) const;
    Vec3 rotate(const Vec3& v) const;
    /// Rotation angle in [0, pi].
    double angle() const;
    /// Shortest-path spherical interpolation; s in [0, 1].
    UnitQuaternion slerp(const UnitQuaternion& target, double s) const;

    friend bool operator==(const UnitQuaternion&, const UnitQuaternion&) = default;

private:
    double w_ = 1.0;
    double x_ = 0.0;
    double y_ = 0.0;
    double z_ = 0.0;
};

inline Vec3 rotate(const UnitQuaternion& q, const Vec3& v) { return q.rotate(v); }

/// Angular distance between two rotations, sign-invariant.
double rotation_distance(const UnitQuaternion& a, const UnitQuaternion& b);

/// Throws ContractViolation unless R is orthonormal with det +1 within 1e-6.
UnitQuaternion quat_from_matrix(const Mat3& r);
Mat3 matrix_from_quat(const UnitQuaternion& q);

enum class Frame {
    HapticBase,     // H_b
    HapticStylus,   // H_e
    RobotBase,      // R_b
    RobotEffector,  // R_e
};

std::string_view frame_name(Frame f);

/// Rigid transform mapping coordinates in `from` into coordinates in `to`.
struct Transform {
    UnitQuaternion rotation;
    Vec3 translation;
    Frame from = Frame::RobotBase;
    Frame to = Frame::RobotBase;

    static Transform identity(Frame f) { return {UnitQuaternion::identity(), {}, f, f}; }
    Vec3 apply(const Vec3& p) const { return rotation.rotate(p) + translation; }
    Transform inverse() const;
};

/// a ∘ b: maps b.from -> a.to. Requires a.from == b.to (checked when frame
/// checks are compiled in).
Transform compose(const Transform& a, const Transform& b);

/// Position plus orientation of a body frame, expressed in `frame`.
struct Pose {
    Vec3 position;
    UnitQuaternion orientation;
    Frame frame = Frame::RobotBase;

    friend bool operator==(const Pose&, const Pose&) = default;
};

}  // namespace teleop
