#include "oracles.hpp"

#include "liftlab/error.hpp"
#include "liftlab/fusion_filters.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace liftlab;
using namespace liftlab::fusion;

namespace {

const Vec3 kUp(0, 0, imu::kGravity);

double yaw_deg(const Quaternion& q) {
    const auto r = q.rotation_matrix();
    return std::atan2(r(1, 0), r(0, 0)) * 180.0 / M_PI;
}

double deg(double rad) { return rad * 180.0 / M_PI; }

// Body-frame reading of gravity for attitude q (body -> world).
Vec3 gravity_in_body(const Quaternion& q) { return q.rotation_matrix().transpose() * kUp; }

double quat_distance(const Quaternion& a, const Quaternion& b) {
    return std::min((a.vec() - b.vec()).norm(), (a.vec() + b.vec()).norm());
}

} // namespace

TEST(Quaternion, RotateExamples) {
    EXPECT_EQ(quat_rotate(Quaternion::identity(), Vec3(0, 0, 1)), Vec3(0, 0, 1));
    const auto q = Quaternion::from_axis_angle(Vec3::UnitZ(), M_PI / 2);
    EXPECT_LE((quat_rotate(q, Vec3(1, 0, 0)) - Vec3(0, 1, 0)).norm(), 1e-12);
    const Quaternion neg{-q.w, -q.x, -q.y, -q.z};
    EXPECT_LE((quat_rotate(neg, Vec3(0.3, -2, 5)) - quat_rotate(q, Vec3(0.3, -2, 5))).norm(), 1e-12);
    EXPECT_THROW(quat_rotate(Quaternion{2, 0, 0, 0}, Vec3::UnitX()), NormError);
}

TEST(Quaternion, RotateMatchesRotationMatrix) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (int i = 0; i < 200; ++i) {
        const auto q = Quaternion{n(rng), n(rng), n(rng), n(rng)}.normalized();
        const Vec3 v(n(rng), n(rng), n(rng));
        // Independent matrix from the standard closed form.
        Eigen::Matrix3d r;
        r << 1 - 2 * (q.y * q.y + q.z * q.z), 2 * (q.x * q.y - q.w * q.z), 2 * (q.x * q.z + q.w * q.y),
            2 * (q.x * q.y + q.w * q.z), 1 - 2 * (q.x * q.x + q.z * q.z), 2 * (q.y * q.z - q.w * q.x),
            2 * (q.x * q.z - q.w * q.y), 2 * (q.y * q.z + q.w * q.x), 1 - 2 * (q.x * q.x + q.y * q.y);
        EXPECT_LE((quat_rotate(q, v) - r * v).norm(), 1e-12);
        EXPECT_NEAR(q.norm(), 1.0, 1e-12);
    }
}

TEST(IntegrateGyro, ZeroRateIsFixedPoint) {
    const auto q = Quaternion::from_axis_angle(Vec3(1, 2, 3).normalized(), 0.7);
    EXPECT_LE(quat_distance(integrate_gyro(q, Vec3::Zero(), 0.04), q), 1e-15);
}

TEST(IntegrateGyro, QuarterTurnYaw) {
    auto q = Quaternion::identity();
    for (int i = 0; i < 25; ++i) q = integrate_gyro(q, Vec3(0, 0, M_PI / 2), 0.04);
    EXPECT_NEAR(yaw_deg(q), 90.0, 1.0);
    EXPECT_NEAR(q.norm(), 1.0, 1e-9);
}

TEST(IntegrateGyro, ForwardThenBackward) {
    const Vec3 w(0.4, -0.2, 0.9);
    const auto start = Quaternion::from_axis_angle(Vec3(0, 1, 1).normalized(), 0.3);
    auto q = start;
    for (int i = 0; i < 100; ++i) q = integrate_gyro(q, w, 1e-3);
    for (int i = 0; i < 100; ++i) q = integrate_gyro(q, -w, 1e-3);
    EXPECT_LE(quat_distance(q, start), 1e-6);
}

TEST(Mahony, Equilibrium) {
    MahonyState s;
    const auto next = mahony_step(s, Vec3::Zero(), kUp, 0.04);
    EXPECT_LE(quat_distance(next.q, s.q), 1e-12);
    EXPECT_LE(next.integral_error.norm(), 1e-12);
}

TEST(Mahony, TiltErrorDecreases) {
    MahonyState s;
    s.q = Quaternion::from_axis_angle(Vec3::UnitX(), 10.0 * M_PI / 180.0);
    const double before = gravity_angle_error(s.q, kUp);
    const auto next = mahony_step(s, Vec3::Zero(), kUp, 0.04);
    EXPECT_LT(gravity_angle_error(next.q, kUp), before);
}

TEST(Mahony, ZeroGainsAreGyroIntegration) {
    MahonyState s;
    s.params.kp = 0.0;
    s.params.ki = 0.0;
    s.q = Quaternion::from_axis_angle(Vec3(1, 1, 0).normalized(), 0.4);
    const Vec3 w(0.1, 0.5, -0.3);
    const auto next = mahony_step(s, w, Vec3(1, 2, 9), 0.04);
    const auto ref = integrate_gyro(s.q, w, 0.04);
    EXPECT_EQ(next.q.vec(), ref.vec());
}

TEST(Mahony, MonotoneConvergenceFromAnyTilt) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        MahonyState s;
        s.params.ki = 0.0;
        s.params.kp = 0.5 + std::abs(u(rng));
        const Vec3 axis = Vec3(u(rng), u(rng), 0).normalized();
        s.q = Quaternion::from_axis_angle(axis, 2.5 * std::abs(u(rng)) + 0.05);
        double err = gravity_angle_error(s.q, kUp);
        for (int k = 0; k < 400 && err > 1e-6; ++k) {
            s = mahony_step(s, Vec3::Zero(), kUp, 0.04);
            const double next = gravity_angle_error(s.q, kUp);
            ASSERT_LT(next, err) << "trial " << trial << " step " << k;
            err = next;
            ASSERT_NEAR(s.q.norm(), 1.0, 1e-9);
        }
    }
}

TEST(Mahony, Freefall) {
    MahonyState s;
    EXPECT_THROW(mahony_step(s, Vec3::Zero(), Vec3::Zero(), 0.04), FreefallError);
    s.params.allow_freefall = true;
    const Vec3 w(0, 0, 1);
    EXPECT_EQ(mahony_step(s, w, Vec3::Zero(), 0.04).q.vec(), integrate_gyro(s.q, w, 0.04).vec());
}

TEST(Ekf, EquilibriumAndBoundedTrace) {
    auto s = make_ekf_state(Quaternion::identity());
    for (int i = 0; i < 1000; ++i) {
        s = ekf_step(s, Vec3::Zero(), kUp, 0.04);
        ASSERT_LE(quat_distance(s.q, Quaternion::identity()), 1e-9);
        ASSERT_LE(s.P.trace(), 4.0 + 1e-9);
    }
}

TEST(Ekf, HugeAccelNoiseIsPurePrediction) {
    EkfParams p;
    p.accel_noise_var = 1e9;
    const auto q0 = Quaternion::from_axis_angle(Vec3::UnitY(), 0.5);
    const auto s = make_ekf_state(q0, p);
    const Vec3 w(0.2, -0.1, 0.4);
    const auto next = ekf_step(s, w, Vec3(3, 0, 9), 0.04);
    EXPECT_LE(quat_distance(next.q, integrate_gyro(q0, w, 0.04)), 1e-8);
}

TEST(Ekf, CovarianceStaysSymmetricPsd) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto s = make_ekf_state(Quaternion::identity());
    for (int i = 0; i < 10000; ++i) {
        const Vec3 gyro(2 * u(rng), 2 * u(rng), 2 * u(rng));
        Vec3 accel(5 * u(rng), 5 * u(rng), 5 * u(rng));
        accel += kUp;
        s = ekf_step(s, gyro, accel, 0.04);
        const double asym = (s.P - s.P.transpose()).cwiseAbs().maxCoeff();
        ASSERT_LE(asym, 1e-9) << i;
        const Eigen::SelfAdjointEigenSolver<Mat4> eig(s.P);
        ASSERT_GE(eig.eigenvalues().minCoeff(), -1e-12) << i;
        ASSERT_NEAR(s.q.norm(), 1.0, 1e-9);
    }
}

TEST(Ekf, TiltErrorDecreases) {
    const auto s = make_ekf_state(Quaternion::from_axis_angle(Vec3::UnitX(), 0.3));
    const auto next = ekf_step(s, Vec3::Zero(), kUp, 0.04);
    EXPECT_LT(gravity_angle_error(next.q, kUp), gravity_angle_error(s.q, kUp));
}

namespace {

template <typename Step>
double steady_state_error_deg(Step step) {
    // Sensor rolling at a constant 0.5 rad/s about body x; 25 Hz, 20 s.
    const Vec3 w(0.5, 0.0, 0.0);
    const double dt = 0.04;
    double worst = 0.0;
    auto truth = Quaternion::identity();
    for (int k = 1; k <= 500; ++k) {
        truth = Quaternion::from_axis_angle(Vec3::UnitX(), 0.5 * k * dt);
        const double err = step(w, gravity_in_body(truth), dt);
        if (k > 250) worst = std::max(worst, err);
    }
    return worst;
}

} // namespace

TEST(Filters, ConstantRateTracking) {
    MahonyState m;
    const double mahony = steady_state_error_deg([&](const Vec3& w, const Vec3& a, double dt) {
        m = mahony_step(m, w, a, dt);
        return deg(gravity_angle_error(m.q, a));
    });
    auto e = make_ekf_state(Quaternion::identity());
    const double ekf = steady_state_error_deg([&](const Vec3& w, const Vec3& a, double dt) {
        e = ekf_step(e, w, a, dt);
        return deg(gravity_angle_error(e.q, a));
    });
    EXPECT_LE(mahony, 2.0);
    EXPECT_LE(ekf, 2.0);
}

TEST(TiltFromAccel, MatchesGravity) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (int i = 0; i < 100; ++i) {
        const Vec3 a(n(rng), n(rng), n(rng));
        const auto q = tilt_from_accel(a);
        EXPECT_LE((gravity_direction(q) - a.normalized()).norm(), 1e-9);
        EXPECT_NEAR(q.rotation_matrix()(1, 0), 0.0, 1e-12);  // zero heading
    }
}

TEST(ApplyFilter, NoneIsIdentity) {
    auto rec = oracle::still_recording(40);
    rec.frames(3, 7) = 1.25;
    EXPECT_EQ(apply_filter(rec, FilterKind::none()).frames, rec.frames);
}

TEST(ApplyFilter, StationaryLinearAccelVanishes) {
    auto rec = oracle::still_recording(100);
    // Tilt one sensor; still at rest.
    for (Eigen::Index f = 0; f < 100; ++f) rec.frames.row(f).segment<3>(6) = Vec3(0, 3.0, std::sqrt(9.81 * 9.81 - 9.0));
    for (const auto& kind : {FilterKind::make_mahony(), FilterKind::make_ekf()}) {
        const auto out = apply_filter(rec, kind);
        ASSERT_EQ(out.frames.rows(), rec.frames.rows());
        ASSERT_EQ(out.frames.cols(), rec.frames.cols());
        for (Eigen::Index f = 50; f < 100; ++f)
            for (int s = 0; s < 6; ++s) EXPECT_LE(out.frames.row(f).segment<3>(s * 6).norm(), 1e-3);
    }
}

TEST(ApplyFilter, DeterministicAndShapePreserving) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.5);
    auto rec = oracle::still_recording(200);
    for (Eigen::Index i = 0; i < rec.frames.size(); ++i) rec.frames.data()[i] += n(rng);
    for (const auto& kind : {FilterKind::make_mahony(), FilterKind::make_ekf()}) {
        const auto a = apply_filter(rec, kind);
        const auto b = apply_filter(rec, kind);
        EXPECT_EQ(a.frames, b.frames);
        EXPECT_EQ(a.frame_count(), rec.frame_count());
        EXPECT_EQ(a.sensors, rec.sensors);
    }
}

TEST(ApplyFilter, FreefallCarriesFrameIndex) {
    auto rec = oracle::still_recording(20);
    rec.frames.row(12).segment<3>(0).setZero();
    try {
        apply_filter(rec, FilterKind::make_mahony());
        FAIL() << "expected FreefallError";
    } catch (const FreefallError& e) {
        EXPECT_NE(e.message().find("12"), std::string::npos) << e.message();
    }
}

TEST(FilterKind, Validation) {
    MahonyParams bad;
    bad.kp = -1;
    EXPECT_THROW(FilterKind::make_mahony(bad).validate(), ConfigError);
    EkfParams zero;
    zero.gyro_noise_var = 0;
    EXPECT_THROW(FilterKind::make_ekf(zero).validate(), ConfigError);
    EXPECT_EQ(parse_filter_type("ekf"), FilterKind::Type::Ekf);
    EXPECT_EQ(filter_name(FilterKind::Type::Mahony), "mahony");
}
