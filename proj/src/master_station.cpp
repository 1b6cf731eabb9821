#include "teleop/master_station.hpp"

#include <algorithm>
#include <numbers>

namespace teleop {

Pose map_stylus_pose(const Pose& stylus, const MappingCalibration& calib) {
    if (!calib.initialized) throw ContractViolation("map_stylus_pose: calibration not captured");
    if constexpr (kFrameChecks) {
        if (stylus.frame != Frame::HapticBase)
            throw ContractViolation("map_stylus_pose: stylus pose must be expressed in H_b");
    }
    Pose out;
    out.frame = Frame::RobotBase;
    out.orientation = calib.R_Hb_to_Rb * stylus.orientation * calib.R_He_to_Re;
    out.position =
        calib.robot_start + calib.R_Hb_to_Rb.rotate(stylus.position - calib.stylus_start);
    return out;
}

Vec3 unmap_position(const Vec3& robot_position, const MappingCalibration& calib) {
    if (!calib.initialized) throw ContractViolation("unmap_position: calibration not captured");
    return calib.stylus_start + calib.R_Hb_to_Rb.conjugate().rotate(robot_position - calib.robot_start);
}

MovingAverage3::MovingAverage3(std::size_t window) : buffer_(window) {
    if (window == 0) throw ContractViolation("MovingAverage3: window must be >= 1");
}

Vec3 MovingAverage3::push(const Vec3& p) {
    if (count_ == buffer_.size()) {
        sum_ -= buffer_[head_];
    } else {
        ++count_;
    }
    buffer_[head_] = p;
    sum_ += p;
    head_ = (head_ + 1) % buffer_.size();
    if (++steps_ % kResumPeriod == 0) sum_ = resummed();
    return sum_ / static_cast<double>(count_);
}

Vec3 MovingAverage3::resummed() const {
    Vec3 s;
    // oldest first, so the result depends only on window contents
    const std::size_t n = buffer_.size();
    const std::size_t start = (head_ + n - count_) % n;
    for (std::size_t k = 0; k < count_; ++k) s += buffer_[(start + k) % n];
    return s;
}

void MovingAverage3::reset() {
    head_ = 0;
    count_ = 0;
    steps_ = 0;
    sum_ = {};
}

QuaternionWindowAverage::QuaternionWindowAverage(std::size_t window) : buffer_(window) {
    if (window == 0) throw ContractViolation("QuaternionWindowAverage: window must be >= 1");
}

void QuaternionWindowAverage::add_outer(const UnitQuaternion& q, double sign) {
    const auto c = q.coeffs();
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) acc_[i][j] += sign * c[i] * c[j];
}

UnitQuaternion QuaternionWindowAverage::push(const UnitQuaternion& q) {
    if (count_ == buffer_.size()) {
        add_outer(buffer_[head_], -1.0);
    } else {
        ++count_;
    }
    buffer_[head_] = q;
    add_outer(q, 1.0);
    head_ = (head_ + 1) % buffer_.size();
    if (++steps_ % MovingAverage3::kResumPeriod == 0) {
        acc_ = {};
        const std::size_t n = buffer_.size();
        const std::size_t start = (head_ + n - count_) % n;
        for (std::size_t k = 0; k < count_; ++k) add_outer(buffer_[(start + k) % n], 1.0);
    }
    if (count_ == 1) {
        last_ = q;
        return q;
    }
    last_ = principal_eigenvector();
    return last_;
}

namespace {

Mat4 mul4(const Mat4& a, const Mat4& b) {
    Mat4 c{};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t j = 0; j < 4; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

std::array<double, 4> mul4(const Mat4& a, const std::array<double, 4>& v) {
    std::array<double, 4> r{};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) r[i] += a[i][j] * v[j];
    return r;
}

double norm4(const std::array<double, 4>& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]);
}

}  // namespace

UnitQuaternion QuaternionWindowAverage::principal_eigenvector() const {
    // Iterate with P = (M / tr M)^8 (three normalized squarings) so each of
    // the bounded iterations contracts the sub-dominant part by (l2/l1)^8.
    Mat4 p = acc_;
    const double tr = p[0][0] + p[1][1] + p[2][2] + p[3][3];
    for (auto& row : p)
        for (double& e : row) e /= tr;
    for (int s = 0; s < 3; ++s) {
        p = mul4(p, p);
        const double t = p[0][0] + p[1][1] + p[2][2] + p[3][3];
        for (auto& row : p)
            for (double& e : row) e /= t;
    }

    std::array<double, 4> v = last_.coeffs();
    auto pv = mul4(p, v);
    if (norm4(pv) < 1e-6) {
        // warm start (nearly) orthogonal to the dominant direction
        std::size_t best = 0;
        for (std::size_t i = 1; i < 4; ++i)
            if (p[i][i] > p[best][best]) best = i;
        v = {0, 0, 0, 0};
        v[best] = 1.0;
        pv = mul4(p, v);
    }
    for (int it = 0; it < kMaxIterations; ++it) {
        const double n = norm4(pv);
        std::array<double, 4> next{pv[0] / n, pv[1] / n, pv[2] / n, pv[3] / n};
        double delta = 0.0;
        double dot = 0.0;
        for (std::size_t i = 0; i < 4; ++i) dot += next[i] * v[i];
        for (std::size_t i = 0; i < 4; ++i)
            delta = std::max(delta, std::abs(next[i] - (dot < 0 ? -v[i] : v[i])));
        v = next;
        if (delta < 1e-15) break;
        pv = mul4(p, v);
    }
    return {v[0], v[1], v[2], v[3]};
}

void QuaternionWindowAverage::reset() {
    head_ = 0;
    count_ = 0;
    steps_ = 0;
    acc_ = {};
    last_ = UnitQuaternion::identity();
}

double moving_average_gain(double freq_hz, std::size_t window, double dt) {
    const double n = static_cast<double>(window);
    const double a = std::numbers::pi * freq_hz * dt;
    if (std::abs(std::sin(a)) < 1e-300) return 1.0;
    return std::abs(std::sin(n * a) / (n * std::sin(a)));
}

}  // namespace teleop
