#pragma once

#include "liftlab/imu_core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace liftlab::synth {

using imu::SensorId;

/// 2023-11-14 10:00:00 UTC; keeps generated trials well clear of midnight.
inline constexpr std::int64_t kDefaultStartEpochMs = 1'699'956'000'000;

struct LiftSpec {
    double bol_s = 0.0;
    double amplitude = 1.0;
    double duration_s = 1.2;
};

struct PulseSpec {
    double start_s = 0.0;
    double duration_s = 1.2;
    double amplitude = 1.0;
};

enum class CorrelationMode { TrainOnly, Always };

/// Sensors that pulse together with every lift. With TrainOnly, field-like
/// corpora also pulse them outside lifts.
struct DistractorRule {
    std::vector<SensorId> sensors{SensorId::RightUpperArm};
    CorrelationMode mode = CorrelationMode::TrainOnly;
    double gyro_gain = 2.0;  // rad/s at amplitude 1, on the gyro y axis
};

struct NoiseSpec {
    double accel_sigma = 0.0;  // m/s^2
    double gyro_sigma = 0.0;   // rad/s
};

struct MotionSpec {
    std::string subject_id = "S00";
    std::string trial_id = "trial_000";
    std::int64_t start_epoch_ms = kDefaultStartEpochMs;
    double duration_s = 60.0;
    double rate_hz = imu::kDefaultRateHz;
    std::vector<LiftSpec> lifts;
    NoiseSpec noise;
    std::vector<SensorId> informative_sensors{SensorId::LeftWrist, SensorId::RightWrist, SensorId::UpperBack};
    double accel_gain = 2.0;  // m/s^2 added along the gravity axis at amplitude 1
    double gyro_gain = 1.0;   // rad/s on the gyro x axis at amplitude 1
    std::optional<DistractorRule> distractor;
    /// Distractor-only pulses (no lift), e.g. reaching for a control panel.
    std::vector<PulseSpec> distractor_pulses;
    std::uint64_t seed = 0;

    /// Throws SpecError on overlapping/out-of-range lifts or negative noise.
    void validate() const;
};

struct SyntheticTrial {
    imu::Recording recording;
    imu::LabeledRecording labels;
    /// Frame spans of the distractor-only pulses.
    std::vector<imu::LiftInterval> distractor_spans;

    std::vector<imu::RawLabel> raw_labels() const;
};

SyntheticTrial generate_recording(const MotionSpec& spec);

enum class CorpusMode { TrainLike, FieldLike };

struct CorpusTemplate {
    double duration_s = 60.0;
    double rate_hz = imu::kDefaultRateHz;
    std::size_t lifts_per_trial = 4;
    double lift_duration_s = 1.2;
    double amplitude_min = 0.8;
    double amplitude_max = 1.2;
    double edge_margin_s = 1.5;  // keep lifts this far from slot edges
    NoiseSpec noise{0.3, 0.1};
    std::vector<SensorId> informative_sensors{SensorId::LeftWrist, SensorId::RightWrist, SensorId::UpperBack};
    double accel_gain = 2.0;
    double gyro_gain = 1.0;
    std::optional<DistractorRule> distractor = DistractorRule{};
    /// Mean spacing of field-like distractor pulses inside lift-free spans.
    double distractor_spacing_s = 8.0;
    double distractor_margin_s = 1.0;  // distance kept from lifts and gaps' edges
    std::int64_t start_epoch_ms = kDefaultStartEpochMs;

    void validate() const;
};

CorpusMode parse_corpus_mode(std::string_view name);
std::string_view corpus_mode_name(CorpusMode mode);

/// n trials with per-trial seeds derived from base_seed. Trial ids are
/// "<mode>_t###"; lifts are placed one per equal time slot.
std::vector<SyntheticTrial> generate_corpus(const CorpusTemplate& tmpl, std::size_t n_trials, std::uint64_t base_seed,
                                            CorpusMode mode);

} // namespace liftlab::synth
