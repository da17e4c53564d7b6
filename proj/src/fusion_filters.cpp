#include "liftlab/fusion_filters.hpp"

#include "liftlab/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace liftlab::fusion {
namespace {

constexpr double kMinAccelNorm = 1e-9;

// q (x) (0, omega) == omega_matrix(omega) * q
Mat4 omega_matrix(const Vec3& w) {
    Mat4 m;
    m << 0.0, -w.x(), -w.y(), -w.z(),
         w.x(), 0.0, w.z(), -w.y(),
         w.y(), -w.z(), 0.0, w.x(),
         w.z(), w.y(), -w.x(), 0.0;
    return m;
}

// d(q (x) (0, omega)) / d omega
Eigen::Matrix<double, 4, 3> rate_jacobian(const Quaternion& q) {
    Eigen::Matrix<double, 4, 3> m;
    m << -q.x, -q.y, -q.z,
          q.w, -q.z,  q.y,
          q.z,  q.w, -q.x,
         -q.y,  q.x,  q.w;
    return m;
}

// Gravity direction without assuming unit norm, and its Jacobian.
Vec3 measurement(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    return {2.0 * (x * z - w * y), 2.0 * (w * x + y * z), w * w - x * x - y * y + z * z};
}

Eigen::Matrix<double, 3, 4> measurement_jacobian(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix<double, 3, 4> h;
    h << -2.0 * y, 2.0 * z, -2.0 * w, 2.0 * x,
          2.0 * x, 2.0 * w,  2.0 * z, 2.0 * y,
          2.0 * w, -2.0 * x, -2.0 * y, 2.0 * z;
    return h;
}

} // namespace

Quaternion Quaternion::from_axis_angle(const Vec3& axis, double angle_rad) {
    const Vec3 u = axis.normalized();
    const double s = std::sin(angle_rad / 2.0);
    return {std::cos(angle_rad / 2.0), u.x() * s, u.y() * s, u.z() * s};
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
    const double n = norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NormError("cannot normalize a zero or non-finite quaternion");
    return {w / n, x / n, y / n, z / n};
}

Eigen::Matrix3d Quaternion::rotation_matrix() const {
    Eigen::Matrix3d r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Quaternion operator*(const Quaternion& a, const Quaternion& b) {
    return {
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    };
}

Vec3 quat_rotate(const Quaternion& q, const Vec3& v) {
    if (std::abs(q.norm() - 1.0) > kUnitTolerance) {
        throw NormError("quaternion norm " + std::to_string(q.norm()) + " is not unit");
    }
    const Vec3 u(q.x, q.y, q.z);
    const Vec3 t = 2.0 * u.cross(v);
    return v + q.w * t + u.cross(t);
}

Quaternion integrate_gyro(const Quaternion& q, const Vec3& omega, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    const Vec4 next = q.vec() + 0.5 * dt * omega_matrix(omega) * q.vec();
    return Quaternion::from_vec(next).normalized();
}

Vec3 gravity_direction(const Quaternion& q) { return measurement(q.vec()); }

Quaternion tilt_from_accel(const Vec3& accel) {
    if (accel.norm() < kMinAccelNorm) return Quaternion::identity();
    const double roll = std::atan2(accel.y(), accel.z());
    const double pitch = std::atan2(-accel.x(), std::hypot(accel.y(), accel.z()));
    const double cr = std::cos(roll / 2), sr = std::sin(roll / 2);
    const double cp = std::cos(pitch / 2), sp = std::sin(pitch / 2);
    return Quaternion{cp * cr, cp * sr, sp * cr, -sp * sr}.normalized();
}

double gravity_angle_error(const Quaternion& q, const Vec3& accel) {
    const double c = gravity_direction(q).normalized().dot(accel.normalized());
    return std::acos(std::clamp(c, -1.0, 1.0));
}

// ---------------------------------------------------------------------------

MahonyState mahony_step(const MahonyState& s, const Vec3& gyro, const Vec3& accel, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    MahonyState next = s;
    if (accel.norm() < kMinAccelNorm) {
        if (!s.params.allow_freefall) throw FreefallError("zero acceleration vector");
        next.corrected_rate = gyro;
        next.q = integrate_gyro(s.q, gyro, dt);
        return next;
    }
    const Vec3 error = accel.normalized().cross(gravity_direction(s.q));
    next.integral_error = s.integral_error + s.params.ki * error * dt;
    next.corrected_rate = gyro + s.params.kp * error + next.integral_error;
    next.q = integrate_gyro(s.q, next.corrected_rate, dt);
    return next;
}

// ---------------------------------------------------------------------------

EkfState make_ekf_state(const Quaternion& q, const EkfParams& params) {
    EkfState s;
    s.q = q.normalized();
    s.P = Mat4::Identity() * params.initial_covariance;
    s.params = params;
    return s;
}

EkfState ekf_step(const EkfState& s, const Vec3& gyro, const Vec3& accel, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    EkfState next = s;

    // Predict.
    const Mat4 F = Mat4::Identity() + 0.5 * dt * omega_matrix(gyro);
    const Eigen::Matrix<double, 4, 3> W = 0.5 * dt * rate_jacobian(s.q);
    const Mat4 Q = s.params.gyro_noise_var * W * W.transpose();
    const Quaternion q_pred = integrate_gyro(s.q, gyro, dt);
    const Mat4 P_pred = F * s.P * F.transpose() + Q;

    if (accel.norm() < kMinAccelNorm) {
        if (!s.params.allow_freefall) throw FreefallError("zero acceleration vector");
        next.q = q_pred;
        next.P = 0.5 * (P_pred + P_pred.transpose());
        return next;
    }

    // Update with the gravity direction.
    const Vec4 qv = q_pred.vec();
    const Vec3 innovation = accel.normalized() - measurement(qv);
    const Eigen::Matrix<double, 3, 4> H = measurement_jacobian(qv);
    const Eigen::Matrix3d S = H * P_pred * H.transpose() + s.params.accel_noise_var * Eigen::Matrix3d::Identity();
    const Eigen::LLT<Eigen::Matrix3d> llt(S);
    if (llt.info() != Eigen::Success || !S.allFinite()) {
        throw SingularUpdateError("innovation covariance is not positive definite");
    }
    const Eigen::Matrix<double, 4, 3> K = llt.solve(H * P_pred).transpose();
    next.q = Quaternion::from_vec(qv + K * innovation).normalized();
    const Mat4 P = (Mat4::Identity() - K * H) * P_pred;
    next.P = 0.5 * (P + P.transpose());
    return next;
}

// ---------------------------------------------------------------------------

void FilterKind::validate() const {
    switch (type) {
    case Type::None:
        return;
    case Type::Mahony:
        if (!(mahony.kp >= 0.0) || !(mahony.ki >= 0.0)) throw ConfigError("Mahony gains must be non-negative");
        return;
    case Type::Ekf:
        if (!(ekf.gyro_noise_var > 0.0) || !(ekf.accel_noise_var > 0.0) || !(ekf.initial_covariance >= 0.0)) {
            throw ConfigError("EKF noise variances must be positive");
        }
        return;
    }
}

std::string_view filter_name(FilterKind::Type type) {
    switch (type) {
    case FilterKind::Type::None:
        return "none";
    case FilterKind::Type::Mahony:
        return "mahony";
    case FilterKind::Type::Ekf:
        return "ekf";
    }
    return "none";
}

FilterKind::Type parse_filter_type(std::string_view name) {
    if (name == "none") return FilterKind::Type::None;
    if (name == "mahony") return FilterKind::Type::Mahony;
    if (name == "ekf") return FilterKind::Type::Ekf;
    throw ConfigError("unknown filter '" + std::string(name) + "' (none|mahony|ekf)");
}

imu::Recording apply_filter(const imu::Recording& rec, const FilterKind& kind) {
    kind.validate();
    if (kind.type == FilterKind::Type::None) return rec;

    imu::Recording out = rec;
    const double dt = 1.0 / rec.sample_rate_hz;
    const Vec3 gravity(0.0, 0.0, imu::kGravity);
    const auto n = static_cast<Eigen::Index>(rec.frame_count());

    for (auto sensor : rec.sensors) {
        const auto c = static_cast<Eigen::Index>(rec.sensor_offset(sensor));
        const Quaternion q0 = tilt_from_accel(rec.accel(0, sensor));
        MahonyState mahony{q0, Vec3::Zero(), kind.mahony, Vec3::Zero()};
        EkfState ekf = make_ekf_state(q0, kind.ekf);

        for (Eigen::Index f = 0; f < n; ++f) {
            const Vec3 a = rec.frames.row(f).segment<3>(c).transpose();
            const Vec3 g = rec.frames.row(f).segment<3>(c + 3).transpose();
            Quaternion q;
            Vec3 rate;
            try {
                if (kind.type == FilterKind::Type::Mahony) {
                    mahony = mahony_step(mahony, g, a, dt);
                    q = mahony.q;
                    rate = mahony.corrected_rate;
                } else {
                    ekf = ekf_step(ekf, g, a, dt);
                    q = ekf.q;
                    rate = g;
                }
            } catch (Error& e) {
                e.add_context(std::string(imu::sensor_name(sensor)) + " frame " + std::to_string(f));
                throw;
            }
            out.frames.row(f).segment<3>(c) = (quat_rotate(q, a) - gravity).transpose();
            out.frames.row(f).segment<3>(c + 3) = rate.transpose();
        }
    }
    return out;
}

} // namespace liftlab::fusion
