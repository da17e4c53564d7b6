#pragma once

#include "liftlab/imu_core.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace liftlab::windowing {

enum class Label : std::uint8_t { NonLift = 0, Lift = 1 };

inline int to_int(Label l) { return l == Label::Lift ? 1 : 0; }

using WindowMatrix = Eigen::MatrixXd;  // window_len x n_channels

struct Window {
    std::string trial_id;
    std::int64_t start_frame = 0;
    WindowMatrix data;
    Label label = Label::NonLift;
};

struct Provenance {
    std::uint64_t seed = 0;
    std::string params;  // free-form "key=value;..." record of how it was built
};

struct Dataset {
    std::vector<Window> windows;
    std::size_t window_len = 0;
    std::vector<imu::SensorId> sensors;  // channel layout: sensors x (ax..gz)
    Provenance provenance;

    std::size_t n_channels() const { return sensors.size() * imu::kChannelsPerSensor; }
    std::size_t count(Label label) const;
    /// Throws ShapeError if any window disagrees with window_len/channels.
    void validate() const;
};

struct LabelOptions {
    double lift_core_s = 1.2;
    double overlap_fraction = 0.5;
    /// Windows whose overlap fraction lies strictly inside
    /// (overlap_fraction - margin, overlap_fraction + margin) and is nonzero
    /// are dropped instead of labeled. 0 disables.
    double ambiguous_margin = 0.0;
};

/// Overlap in frames between [start, start+len) and the densest lift core.
std::int64_t max_core_overlap(std::int64_t start, std::int64_t window_len, std::span<const imu::LiftInterval> lifts,
                              double rate_hz, double lift_core_s);

Label label_window(std::int64_t start, std::int64_t window_len, std::span<const imu::LiftInterval> lifts,
                   double rate_hz, double lift_core_s = 1.2, double overlap_fraction = 0.5);

std::vector<Window> slice_windows(const imu::LabeledRecording& lr, std::size_t window_len, std::size_t stride,
                                  const LabelOptions& options = {});

/// Number of windows slice_windows produces before any ambiguity filtering.
std::size_t window_count(std::size_t len, std::size_t window_len, std::size_t stride);

/// Wraps pre-sliced windows into a dataset without resampling.
Dataset make_dataset(std::vector<Window> windows, std::size_t window_len, std::vector<imu::SensorId> sensors,
                     Provenance provenance = {});

/// Down-samples the majority class to the minority count and shuffles.
Dataset balance(std::vector<Window> windows, std::size_t window_len, std::vector<imu::SensorId> sensors,
                std::uint64_t seed);

/// Stratified split; each class sends round(fraction * count) windows to val.
std::pair<Dataset, Dataset> split(const Dataset& ds, double validation_fraction, std::uint64_t seed);

/// Keeps only the channels of `subset` (in `subset` order).
Dataset select_sensors(const Dataset& ds, std::span<const imu::SensorId> subset);

/// Slices every labeled recording and concatenates the windows.
std::vector<Window> slice_all(std::span<const imu::LabeledRecording> recordings, std::size_t window_len,
                              std::size_t stride, const LabelOptions& options = {});

void write_dataset(std::ostream& out, const Dataset& ds);
void write_dataset(const std::string& path, const Dataset& ds);
Dataset parse_dataset(std::istream& in);
Dataset read_dataset(const std::string& path);

} // namespace liftlab::windowing
