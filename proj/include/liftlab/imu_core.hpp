#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace liftlab::imu {

inline constexpr double kGravity = 9.81;          // m/s^2, world z up
inline constexpr double kDefaultRateHz = 25.0;
inline constexpr double kEolOffsetSeconds = 1.52;  // BOL -> adjusted EOL
inline constexpr int kChannelsPerSensor = 6;       // ax ay az gx gy gz
inline constexpr std::int64_t kMsPerDay = 86'400'000;

// Order is part of the file/channel layout. Do not reorder.
enum class SensorId : std::uint8_t {
    LeftWrist = 0,
    RightWrist = 1,
    RightThigh = 2,
    UpperBack = 3,
    RightUpperArm = 4,
    Waist = 5,
};

inline constexpr std::array<SensorId, 6> kAllSensors{
    SensorId::LeftWrist, SensorId::RightWrist,    SensorId::RightThigh,
    SensorId::UpperBack, SensorId::RightUpperArm, SensorId::Waist,
};

std::string_view sensor_name(SensorId id);
std::optional<SensorId> parse_sensor(std::string_view name);
std::vector<SensorId> parse_sensor_list(std::string_view comma_list);
std::string join_sensor_list(std::span<const SensorId> sensors, char sep = ',');

/// Channel names for a sensor list, e.g. "left_wrist.ax".
std::vector<std::string> channel_names(std::span<const SensorId> sensors);

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// frames x channels, row-major so a frame is a contiguous row.
using FrameMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Time of day in milliseconds since local midnight.
struct TimeOfDay {
    std::int64_t ms = 0;

    static TimeOfDay from_epoch_ms(std::int64_t epoch_ms);
    /// Accepts hh:MM:ss.mmm (also hh:MM:ss:mmm and hh:MM:ss).
    static TimeOfDay parse(std::string_view text);
    std::string to_string() const;

    auto operator<=>(const TimeOfDay&) const = default;
};

struct Recording {
    std::string subject_id;
    std::string trial_id;
    std::int64_t start_epoch_ms = 0;
    double sample_rate_hz = kDefaultRateHz;
    std::vector<SensorId> sensors;  // active sensors, channel blocks in this order
    FrameMatrix frames;             // m/s^2 and rad/s

    std::size_t frame_count() const { return static_cast<std::size_t>(frames.rows()); }
    std::size_t channel_count() const { return static_cast<std::size_t>(frames.cols()); }
    bool has_sensor(SensorId id) const;
    /// Column of the first channel of `id`; throws SensorMissingError.
    std::size_t sensor_offset(SensorId id) const;
    Vec3 accel(std::size_t frame, SensorId id) const;
    Vec3 gyro(std::size_t frame, SensorId id) const;
    TimeOfDay start_time_of_day() const { return TimeOfDay::from_epoch_ms(start_epoch_ms); }

    /// Throws SchemaError/ParseError if an invariant does not hold.
    void validate() const;
};

enum class LabelSource { MoCap, Video };

struct RawLabel {
    std::string trial_id;
    TimeOfDay bol;
    std::optional<TimeOfDay> eol;
    LabelSource source = LabelSource::MoCap;
};

/// Frame span of one lift. `eol_frame` is exclusive.
struct LiftInterval {
    std::int64_t bol_frame = 0;
    std::int64_t eol_frame = 0;

    bool operator==(const LiftInterval&) const = default;
};

struct LabeledRecording {
    Recording recording;
    std::vector<LiftInterval> lifts;
    std::int64_t applied_offset_frames = 0;
    /// Whole-file non-lift recording (walking, sitting, ...).
    bool all_nonlift = false;

    void validate() const;
};

/// Rotation applied to one sensor's accel and gyro vectors.
class PlacementFix {
public:
    /// Throws ConfigError unless `rotation` is orthonormal with det +1 (1e-9).
    PlacementFix(SensorId sensor, const Mat3& rotation);

    SensorId sensor() const { return sensor_; }
    const Mat3& rotation() const { return rotation_; }
    PlacementFix inverse() const { return {sensor_, rotation_.transpose()}; }

private:
    SensorId sensor_;
    Mat3 rotation_;
};

// ---------------------------------------------------------------------------
// Recording and label files

enum class AccelUnit { MetersPerSecond2, StandardGravity };
enum class GyroUnit { RadiansPerSecond, DegreesPerSecond };

struct RecordingSchema {
    /// Sensors a file must carry; a file missing any of them is rejected.
    std::vector<SensorId> required_sensors{kAllSensors.begin(), kAllSensors.end()};
};

Recording parse_recording(std::istream& in, const RecordingSchema& schema = {});
Recording read_recording(const std::string& path, const RecordingSchema& schema = {});
/// Writes header + rows with 9 significant digits in SI units.
void write_recording(std::ostream& out, const Recording& rec);
void write_recording(const std::string& path, const Recording& rec);

std::vector<RawLabel> parse_labels(std::istream& in);
std::vector<RawLabel> read_labels(const std::string& path);
void write_labels(std::ostream& out, std::span<const RawLabel> labels);
void write_labels(const std::string& path, std::span<const RawLabel> labels);

// ---------------------------------------------------------------------------
// Synchronization

std::int64_t round_half_up(double x);

/// Frame index of a wall-clock event. With `clamp`, out-of-range results are
/// clamped to [0, len-1] instead of throwing.
std::int64_t epoch_to_frame(TimeOfDay event, const Recording& rec, bool clamp = false);

std::int64_t adjust_eol(std::int64_t bol_frame, double sample_rate_hz);

enum class EolPolicy { UseProvided, DeriveFromBol };

/// Labels without an EOL fall back to the derived EOL under UseProvided.
LabeledRecording align_labels(const Recording& rec, std::span<const RawLabel> labels,
                              EolPolicy policy);

/// Inverse of align_labels for a single interval (used when emitting label files).
RawLabel interval_to_label(const Recording& rec, const LiftInterval& lift,
                           LabelSource source = LabelSource::MoCap);

// ---------------------------------------------------------------------------
// Repair

LabeledRecording apply_time_offset(const LabeledRecording& lr, std::int64_t offset_frames);

/// 0/1 per frame, 1 inside any [bol, eol).
std::vector<double> lift_indicator(const LabeledRecording& lr);

/// Lag k in [-max_lag, max_lag] such that apply_time_offset(lr, k) best lines
/// the labels up with `scores`. If the score events sit s frames after the
/// labels, the result is +s. Ties go to the smallest |k|, then negative k.
std::int64_t estimate_time_offset(std::span<const double> scores, const LabeledRecording& lr,
                                  std::int64_t max_lag_frames);

Recording apply_placement_fix(const Recording& rec, const PlacementFix& fix);

/// The 24 proper rotations that map coordinate axes onto coordinate axes, in
/// a fixed order: axis permutations in lexicographic order, then sign
/// patterns (+++, ++-, +-+, ...) keeping det = +1. Identity comes first.
const std::vector<Mat3>& axis_aligned_rotations();

struct FrameRange {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
};

struct PlacementCheckOptions {
    double threshold_deg = 60.0;
};

/// Compares mean gravity direction of `suspect` against `reference` over a
/// still window. Returns the axis-aligned rotation that best maps the
/// suspect's gravity onto the reference's when they disagree by more than
/// the threshold; earlier rotations in axis_aligned_rotations() win ties.
std::optional<PlacementFix> detect_placement_anomaly(const Recording& rec, SensorId suspect,
                                                     SensorId reference, FrameRange still_window,
                                                     const PlacementCheckOptions& options = {});

} // namespace liftlab::imu
