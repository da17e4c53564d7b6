#pragma once

#include "run_context.hpp"

#include "liftlab/imu_core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace liftlab::cli {

inline constexpr const char* kRecordingSuffix = ".imu.csv";
inline constexpr const char* kLabelFile = "labels.csv";

/// Recording files (*.imu.csv) in a directory, sorted by name.
std::vector<std::filesystem::path> recording_files(const std::filesystem::path& dir);

std::vector<imu::Recording> load_recordings(const std::filesystem::path& dir, RunContext& ctx);

/// Resolves the label file: an explicit path, else <dir>/labels.csv if present.
std::optional<std::filesystem::path> resolve_labels(const std::filesystem::path& dir, const std::string& explicit_path,
                                                    bool required);

/// Aligns labels to every recording by trial id. Labels naming a trial that
/// has no recording are rejected. Recordings without labels get no lifts.
std::vector<imu::LabeledRecording> label_recordings(std::vector<imu::Recording> recordings,
                                                    const std::vector<imu::RawLabel>& labels,
                                                    imu::EolPolicy policy);

/// Recordings + labels of a corpus directory.
std::vector<imu::LabeledRecording> load_corpus(const std::filesystem::path& dir, const std::string& labels_path,
                                               imu::EolPolicy policy, RunContext& ctx);

} // namespace liftlab::cli
