#pragma once

#include "liftlab/imu_core.hpp"

#include <Eigen/Core>

#include <string>
#include <string_view>

namespace liftlab::fusion {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Attitude quaternion, body frame -> world frame (world z up).
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    static Quaternion identity() { return {}; }
    static Quaternion from_axis_angle(const Vec3& axis, double angle_rad);
    static Quaternion from_vec(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

    Vec4 vec() const { return {w, x, y, z}; }
    double norm() const;
    Quaternion normalized() const;
    Quaternion conjugate() const { return {w, -x, -y, -z}; }
    Eigen::Matrix3d rotation_matrix() const;

    friend Quaternion operator*(const Quaternion& a, const Quaternion& b);
};

inline constexpr double kUnitTolerance = 1e-9;

/// q v q^-1. Throws NormError if q is not unit within kUnitTolerance.
Vec3 quat_rotate(const Quaternion& q, const Vec3& v);

/// First-order integration of body rate `omega` over dt, renormalized.
Quaternion integrate_gyro(const Quaternion& q, const Vec3& omega, double dt);

/// World +z expressed in the body frame (what a still accelerometer measures,
/// normalized).
Vec3 gravity_direction(const Quaternion& q);

/// Smallest-yaw attitude whose gravity_direction matches `accel`.
Quaternion tilt_from_accel(const Vec3& accel);

/// Angle in radians between the filter's gravity direction and `accel`.
double gravity_angle_error(const Quaternion& q, const Vec3& accel);

// ---------------------------------------------------------------------------
// Mahony

struct MahonyParams {
    double kp = 1.0;
    double ki = 0.3;
    bool allow_freefall = false;
};

struct MahonyState {
    Quaternion q;
    Vec3 integral_error = Vec3::Zero();
    MahonyParams params;
    /// Rate used in the last step (gyro + feedback), rad/s.
    Vec3 corrected_rate = Vec3::Zero();
};

MahonyState mahony_step(const MahonyState& s, const Vec3& gyro, const Vec3& accel, double dt);

// ---------------------------------------------------------------------------
// EKF

struct EkfParams {
    double gyro_noise_var = 0.3 * 0.3;
    double accel_noise_var = 0.5 * 0.5;
    double initial_covariance = 1.0;
    bool allow_freefall = false;
};

struct EkfState {
    Quaternion q;
    Mat4 P = Mat4::Identity();
    EkfParams params;
};

EkfState make_ekf_state(const Quaternion& q, const EkfParams& params = {});

/// Predict with the gyro, then correct with the normalized accel.
EkfState ekf_step(const EkfState& s, const Vec3& gyro, const Vec3& accel, double dt);

// ---------------------------------------------------------------------------

struct FilterKind {
    enum class Type { None, Mahony, Ekf };
    Type type = Type::None;
    MahonyParams mahony;
    EkfParams ekf;

    static FilterKind none() { return {}; }
    static FilterKind make_mahony(MahonyParams p = {}) { return {Type::Mahony, p, {}}; }
    static FilterKind make_ekf(EkfParams p = {}) { return {Type::Ekf, {}, p}; }
    /// Throws ConfigError if gains/noises are out of range.
    void validate() const;
};

std::string_view filter_name(FilterKind::Type type);
FilterKind::Type parse_filter_type(std::string_view name);

/// Runs the filter per sensor and replaces each sensor's 6 channels by the
/// gravity-compensated world-frame acceleration and the angular rate
/// (Mahony: feedback-corrected, EKF: raw gyro). None returns the input.
imu::Recording apply_filter(const imu::Recording& rec, const FilterKind& kind);

} // namespace liftlab::fusion
