#include "corpus.hpp"

#include "liftlab/error.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace liftlab::cli {

namespace fs = std::filesystem;

std::vector<fs::path> recording_files(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw InputError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (entry.is_regular_file() && name.size() > std::string(kRecordingSuffix).size() &&
            name.ends_with(kRecordingSuffix)) {
            files.push_back(entry.path());
        }
    }
    if (files.empty()) throw InputError("no *" + std::string(kRecordingSuffix) + " files in '" + dir.string() + "'");
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<imu::Recording> load_recordings(const fs::path& dir, RunContext& ctx) {
    std::vector<imu::Recording> out;
    std::set<std::string> trials;
    for (const auto& file : recording_files(dir)) {
        try {
            out.push_back(imu::read_recording(ctx.input(file).string()));
        } catch (Error& e) {
            e.add_context(file.filename().string());
            throw;
        }
        if (!trials.insert(out.back().trial_id).second) {
            throw LabelConflictError("trial '" + out.back().trial_id + "' appears in more than one recording");
        }
    }
    return out;
}

std::optional<fs::path> resolve_labels(const fs::path& dir, const std::string& explicit_path, bool required) {
    if (!explicit_path.empty()) {
        if (!fs::exists(explicit_path)) throw InputError("label file '" + explicit_path + "' does not exist");
        return fs::path(explicit_path);
    }
    const auto fallback = dir / kLabelFile;
    if (fs::exists(fallback)) return fallback;
    if (required) throw InputError("no label file given and '" + fallback.string() + "' does not exist");
    return std::nullopt;
}

std::vector<imu::LabeledRecording> label_recordings(std::vector<imu::Recording> recordings,
                                                    const std::vector<imu::RawLabel>& labels,
                                                    imu::EolPolicy policy) {
    std::map<std::string, std::vector<imu::RawLabel>> by_trial;
    for (const auto& l : labels) by_trial[l.trial_id].push_back(l);
    std::vector<imu::LabeledRecording> out;
    out.reserve(recordings.size());
    for (auto& rec : recordings) {
        const auto it = by_trial.find(rec.trial_id);
        std::vector<imu::RawLabel> mine;
        if (it != by_trial.end()) {
            mine = std::move(it->second);
            by_trial.erase(it);
        }
        try {
            out.push_back(imu::align_labels(rec, mine, policy));
        } catch (Error& e) {
            e.add_context("trial " + rec.trial_id);
            throw;
        }
    }
    if (!by_trial.empty()) {
        throw LabelConflictError("labels reference trial '" + by_trial.begin()->first + "' with no recording");
    }
    return out;
}

std::vector<imu::LabeledRecording> load_corpus(const fs::path& dir, const std::string& labels_path,
                                               imu::EolPolicy policy, RunContext& ctx) {
    const auto label_file = resolve_labels(dir, labels_path, true);
    auto recordings = load_recordings(dir, ctx);
    const auto labels = imu::read_labels(ctx.input(*label_file).string());
    return label_recordings(std::move(recordings), labels, policy);
}

} // namespace liftlab::cli
