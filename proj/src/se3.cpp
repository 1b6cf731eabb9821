#include "teleop/se3.hpp"

#include <algorithm>

namespace teleop {

Mat3 transpose(const Mat3& m) {
    Mat3 t{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) t[i][j] = m[j][i];
    return t;
}

Mat3 multiply(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Vec3 multiply(const Mat3& m, const Vec3& v) {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

double determinant(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

UnitQuaternion::UnitQuaternion(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!std::isfinite(n) || n < 1e-12)
        throw ContractViolation("UnitQuaternion: zero or non-finite quaternion");
    // already-unit input keeps its exact coefficients, so re-wrapping a
    // quaternion's coeffs() is the identity
    if (std::abs(n - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) {
        w /= n;
        x /= n;
        y /= n;
        z /= n;
    }
    // canonical hemisphere
    bool flip = w < 0.0;
    if (w == 0.0) {
        const double first = x != 0.0 ? x : (y != 0.0 ? y : z);
        flip = first < 0.0;
    }
    if (flip) {
        w = -w;
        x = -x;
        y = -y;
        z = -z;
    }
    w_ = w;
    x_ = x;
    y_ = y;
    z_ = z;
}

UnitQuaternion UnitQuaternion::from_axis_angle(const Vec3& axis, double angle_rad) {
    const double n = axis.norm();
    if (!(n > 0.0)) throw ContractViolation("from_axis_angle: zero axis");
    const Vec3 u = axis / n;
    const double s = std::sin(0.5 * angle_rad);
    return {std::cos(0.5 * angle_rad), u.x * s, u.y * s, u.z * s};
}

UnitQuaternion UnitQuaternion::conjugate() const { return {w_, -x_, -y_, -z_}; }

UnitQuaternion UnitQuaternion::operator*(const UnitQuaternion& r) const {
    return {w_ * r.w_ - x_ * r.x_ - y_ * r.y_ - z_ * r.z_,
            w_ * r.x_ + x_ * r.w_ + y_ * r.z_ - z_ * r.y_,
            w_ * r.y_ - x_ * r.z_ + y_ * r.w_ + z_ * r.x_,
            w_ * r.z_ + x_ * r.y_ - y_ * r.x_ + z_ * r.w_};
}

Vec3 UnitQuaternion::rotate(const Vec3& v) const {
    // v' = v + 2w (u x v) + 2 u x (u x v)
    const Vec3 u{x_, y_, z_};
    const Vec3 t = 2.0 * u.cross(v);
    return v + w_ * t + u.cross(t);
}

double UnitQuaternion::angle() const {
    const double vn = std::sqrt(x_ * x_ + y_ * y_ + z_ * z_);
    return 2.0 * std::atan2(vn, w_);
}

UnitQuaternion UnitQuaternion::slerp(const UnitQuaternion& target, double s) const {
    double d = w_ * target.w_ + x_ * target.x_ + y_ * target.y_ + z_ * target.z_;
    double sign = 1.0;
    if (d < 0.0) {
        d = -d;
        sign = -1.0;
    }
    double a = 1.0 - s;
    double b = s * sign;
    if (d < 1.0 - 1e-12) {
        const double theta = std::acos(std::min(d, 1.0));
        const double st = std::sin(theta);
        a = std::sin((1.0 - s) * theta) / st;
        b = sign * std::sin(s * theta) / st;
    }
    return {a * w_ + b * target.w_, a * x_ + b * target.x_, a * y_ + b * target.y_,
            a * z_ + b * target.z_};
}

double rotation_distance(const UnitQuaternion& a, const UnitQuaternion& b) {
    return (a.conjugate() * b).angle();
}

UnitQuaternion quat_from_matrix(const Mat3& r) {
    const Mat3 rtr = multiply(transpose(r), r);
    double err = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            err = std::max(err, std::abs(rtr[i][j] - (i == j ? 1.0 : 0.0)));
    if (!(err <= 1e-6) || !(std::abs(determinant(r) - 1.0) <= 1e-6))
        throw ContractViolation("quat_from_matrix: matrix is not a proper rotation");

    // Shepperd: branch on the largest of (trace, diagonal) for stability.
    const double tr = r[0][0] + r[1][1] + r[2][2];
    if (tr >= r[0][0] && tr >= r[1][1] && tr >= r[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + tr);
        return {0.25 * s, (r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s,
                (r[1][0] - r[0][1]) / s};
    }
    if (r[0][0] >= r[1][1] && r[0][0] >= r[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]);
        return {(r[2][1] - r[1][2]) / s, 0.25 * s, (r[0][1] + r[1][0]) / s,
                (r[0][2] + r[2][0]) / s};
    }
    if (r[1][1] >= r[2][2]) {
        const double s = 2.0 * std::sqrt(1.0 + r[1][1] - r[0][0] - r[2][2]);
        return {(r[0][2] - r[2][0]) / s, (r[0][1] + r[1][0]) / s, 0.25 * s,
                (r[1][2] + r[2][1]) / s};
    }
    const double s = 2.0 * std::sqrt(1.0 + r[2][2] - r[0][0] - r[1][1]);
    return {(r[1][0] - r[0][1]) / s, (r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s,
            0.25 * s};
}

Mat3 matrix_from_quat(const UnitQuaternion& q) {
    const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
    return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
             {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
             {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

std::string_view frame_name(Frame f) {
    switch (f) {
        case Frame::HapticBase: return "H_b";
        case Frame::HapticStylus: return "H_e";
        case Frame::RobotBase: return "R_b";
        case Frame::RobotEffector: return "R_e";
    }
    return "?";
}

Transform Transform::inverse() const {
    const UnitQuaternion inv = rotation.conjugate();
    return {inv, -inv.rotate(translation), to, from};
}

Transform compose(const Transform& a, const Transform& b) {
    if constexpr (kFrameChecks) {
        if (a.from != b.to)
            throw ContractViolation("compose: frame mismatch (" + std::string(frame_name(a.from)) +
                                    " vs " + std::string(frame_name(b.to)) + ")");
    }
    return {a.rotation * b.rotation, a.translation + a.rotation.rotate(b.translation), b.from,
            a.to};
}

}  // namespace teleop
