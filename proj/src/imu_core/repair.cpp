#include "liftlab/error.hpp"
#include "liftlab/imu_core.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace liftlab::imu {

LabeledRecording apply_time_offset(const LabeledRecording& lr, std::int64_t offset_frames) {
    const auto len = static_cast<std::int64_t>(lr.recording.frame_count());
    LabeledRecording out = lr;
    for (auto& lift : out.lifts) {
        lift.bol_frame += offset_frames;
        lift.eol_frame += offset_frames;
        if (lift.bol_frame < 0 || lift.eol_frame >= len) {
            throw OutOfRangeError("offset " + std::to_string(offset_frames) + " moves lift to (" +
                                  std::to_string(lift.bol_frame) + "," + std::to_string(lift.eol_frame) +
                                  ") outside " + std::to_string(len) + " frames");
        }
    }
    out.applied_offset_frames += offset_frames;
    return out;
}

std::vector<double> lift_indicator(const LabeledRecording& lr) {
    std::vector<double> ind(lr.recording.frame_count(), 0.0);
    const auto len = static_cast<std::int64_t>(ind.size());
    for (const auto& lift : lr.lifts) {
        for (auto f = std::max<std::int64_t>(lift.bol_frame, 0); f < std::min(lift.eol_frame, len); ++f) {
            ind[static_cast<std::size_t>(f)] = 1.0;
        }
    }
    return ind;
}

std::int64_t estimate_time_offset(std::span<const double> scores, const LabeledRecording& lr,
                                  std::int64_t max_lag_frames) {
    const auto len = static_cast<std::int64_t>(lr.recording.frame_count());
    if (static_cast<std::int64_t>(scores.size()) != len) {
        throw ShapeError("score series has " + std::to_string(scores.size()) + " frames, recording has " +
                         std::to_string(len));
    }
    if (max_lag_frames < 1) throw ConfigError("max_lag_frames must be >= 1");

    const auto indicator = lift_indicator(lr);
    if (std::none_of(indicator.begin(), indicator.end(), [](double v) { return v > 0.0; })) {
        throw DegenerateSignalError("label indicator is all zero");
    }
    const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
    if (!(*hi > *lo)) throw DegenerateSignalError("score series is constant");

    // Correlate mean-centred scores with the shifted indicator; prefix sums
    // make each lag O(#lifts).
    const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(len);
    std::vector<double> prefix(static_cast<std::size_t>(len) + 1, 0.0);
    for (std::int64_t t = 0; t < len; ++t) {
        prefix[static_cast<std::size_t>(t + 1)] = prefix[static_cast<std::size_t>(t)] + (scores[t] - mean);
    }
    const auto correlation = [&](std::int64_t lag) {
        double c = 0.0;
        for (const auto& lift : lr.lifts) {
            const auto b = std::clamp<std::int64_t>(lift.bol_frame + lag, 0, len);
            const auto e = std::clamp<std::int64_t>(lift.eol_frame + lag, 0, len);
            if (e > b) c += prefix[static_cast<std::size_t>(e)] - prefix[static_cast<std::size_t>(b)];
        }
        return c;
    };

    const double scale = (*hi - *lo) * static_cast<double>(len);
    std::int64_t best_lag = 0;
    double best = correlation(0);
    for (std::int64_t mag = 1; mag <= max_lag_frames; ++mag) {
        for (const auto lag : {-mag, mag}) {
            const double c = correlation(lag);
            if (c > best + 1e-12 * scale) {
                best = c;
                best_lag = lag;
            }
        }
    }
    return best_lag;
}

Recording apply_placement_fix(const Recording& rec, const PlacementFix& fix) {
    const auto c = static_cast<Eigen::Index>(rec.sensor_offset(fix.sensor()));
    Recording out = rec;
    // Rows are frames, so v' = R v becomes rows * R^T.
    const Mat3 rt = fix.rotation().transpose();
    out.frames.middleCols(c, 3) = rec.frames.middleCols(c, 3) * rt;
    out.frames.middleCols(c + 3, 3) = rec.frames.middleCols(c + 3, 3) * rt;
    return out;
}

const std::vector<Mat3>& axis_aligned_rotations() {
    static const std::vector<Mat3> rotations = [] {
        std::vector<Mat3> out;
        std::array<int, 3> perm{0, 1, 2};
        do {
            for (int bits = 0; bits < 8; ++bits) {
                Mat3 r = Mat3::Zero();
                for (int i = 0; i < 3; ++i) {
                    r(i, perm[static_cast<std::size_t>(i)]) = ((bits >> (2 - i)) & 1) ? -1.0 : 1.0;
                }
                if (r.determinant() > 0.0) out.push_back(r);
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return out;
    }();
    return rotations;
}

std::optional<PlacementFix> detect_placement_anomaly(const Recording& rec, SensorId suspect,
                                                     SensorId reference, FrameRange still_window,
                                                     const PlacementCheckOptions& options) {
    const auto suspect_col = static_cast<Eigen::Index>(rec.sensor_offset(suspect));
    const auto reference_col = static_cast<Eigen::Index>(rec.sensor_offset(reference));
    if (still_window.end > rec.frame_count() || still_window.begin >= still_window.end) {
        throw OutOfRangeError("still window outside recording");
    }
    const auto n = still_window.end - still_window.begin;
    if (static_cast<double>(n) < rec.sample_rate_hz) {
        throw OutOfRangeError("still window must cover at least 1 s (" + std::to_string(n) + " frames given)");
    }

    const auto rows = rec.frames.middleRows(static_cast<Eigen::Index>(still_window.begin),
                                            static_cast<Eigen::Index>(n));
    const Vec3 s = rows.middleCols(suspect_col, 3).colwise().mean().transpose();
    const Vec3 r = rows.middleCols(reference_col, 3).colwise().mean().transpose();
    const double min_magnitude = 0.5 * kGravity;
    if (s.norm() < min_magnitude || r.norm() < min_magnitude) {
        throw NotStillError("mean acceleration below 0.5 g in still window");
    }

    const Vec3 s_hat = s.normalized();
    const Vec3 r_hat = r.normalized();
    const double angle = std::acos(std::clamp(s_hat.dot(r_hat), -1.0, 1.0)) * 180.0 / M_PI;
    if (angle <= options.threshold_deg) return std::nullopt;

    const auto& candidates = axis_aligned_rotations();
    std::size_t best = 0;
    double best_residual = (candidates[0] * s_hat - r_hat).squaredNorm();
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const double residual = (candidates[i] * s_hat - r_hat).squaredNorm();
        if (residual < best_residual - 1e-12) {
            best_residual = residual;
            best = i;
        }
    }
    return PlacementFix(suspect, candidates[best]);
}

} // namespace liftlab::imu
