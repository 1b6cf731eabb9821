#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "teleop/se3.hpp"

namespace teleop {

/// Fixed rotations and start positions of the 1:1 stylus -> end-effector
/// mapping. Start positions are captured once, before streaming begins.
struct MappingCalibration {
    UnitQuaternion R_Hb_to_Rb;
    UnitQuaternion R_He_to_Re;
    Vec3 robot_start;   // p_Re(0) in R_b
    Vec3 stylus_start;  // p_He(0) in H_b
    bool initialized = false;

    static MappingCalibration capture(const UnitQuaternion& hb_to_rb,
                                      const UnitQuaternion& he_to_re, const Vec3& robot_start,
                                      const Vec3& stylus_start) {
        return {hb_to_rb, he_to_re, robot_start, stylus_start, true};
    }
};

/// Stylus pose in H_b -> end-effector reference in R_b.
/// Throws ContractViolation when the calibration has not been captured or the
/// pose is not tagged H_b.
Pose map_stylus_pose(const Pose& stylus, const MappingCalibration& calib);

/// Inverse of the position half of map_stylus_pose (R_b target -> H_b stylus).
Vec3 unmap_position(const Vec3& robot_position, const MappingCalibration& calib);

/// O(1) windowed moving average over 3-vectors, backed by a cumulative sum.
class MovingAverage3 {
public:
    explicit MovingAverage3(std::size_t window);

    Vec3 push(const Vec3& p);
    void reset();

    std::size_t capacity() const { return buffer_.size(); }
    std::size_t count() const { return count_; }
    const Vec3& cumulative_sum() const { return sum_; }
    /// Exact sum of the buffered samples, recomputed from the ring.
    Vec3 resummed() const;

    /// Steps between exact re-summations of the running sum.
    static constexpr std::uint64_t kResumPeriod = std::uint64_t{1} << 16;

private:
    std::vector<Vec3> buffer_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    std::uint64_t steps_ = 0;
    Vec3 sum_;
};

using Mat4 = std::array<std::array<double, 4>, 4>;

/// Windowed quaternion mean: principal eigenvector of sum(q q^T) over the
/// last n samples, equal weights. The accumulator is updated in O(1) per
/// sample; the eigenvector is found by power iteration warm-started from the
/// previous output.
class QuaternionWindowAverage {
public:
    explicit QuaternionWindowAverage(std::size_t window);

    UnitQuaternion push(const UnitQuaternion& q);
    void reset();

    std::size_t capacity() const { return buffer_.size(); }
    std::size_t count() const { return count_; }
    const Mat4& accumulator() const { return acc_; }

    static constexpr int kMaxIterations = 10;

private:
    void add_outer(const UnitQuaternion& q, double sign);
    UnitQuaternion principal_eigenvector() const;

    std::vector<UnitQuaternion> buffer_;
    std::size_t head_ = 0;
    std::size_t count_ = 0;
    std::uint64_t steps_ = 0;
    Mat4 acc_{};
    UnitQuaternion last_;
};

/// Tremor filter of the master station: position and orientation windows of
/// the same length n.
class PoseFilter {
public:
    explicit PoseFilter(std::size_t window) : position_(window), orientation_(window) {}

    Vec3 filter_position(const Vec3& p) { return position_.push(p); }
    UnitQuaternion filter_orientation(const UnitQuaternion& q) { return orientation_.push(q); }
    void reset_filters() {
        position_.reset();
        orientation_.reset();
    }

    std::size_t window() const { return position_.capacity(); }
    const MovingAverage3& position() const { return position_; }
    const QuaternionWindowAverage& orientation() const { return orientation_; }

private:
    MovingAverage3 position_;
    QuaternionWindowAverage orientation_;
};

/// Steady-state amplitude ratio of an n-sample moving average driven by a
/// sinusoid at `freq_hz` sampled at period `dt`.
double moving_average_gain(double freq_hz, std::size_t window, double dt);

}  // namespace teleop
