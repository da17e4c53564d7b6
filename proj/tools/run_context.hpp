#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace liftlab::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Bookkeeping for one command invocation: which files were read and
/// written, which seeds were used. Produces the run manifest.
class RunContext {
public:
    RunContext(std::string command, std::filesystem::path out_dir);

    const std::filesystem::path& out_dir() const { return out_dir_; }

    /// Registers an input; throws InputError if it does not exist.
    std::filesystem::path input(const std::filesystem::path& path);
    /// Path of an output inside the output directory; refuses to overwrite
    /// any registered input.
    std::filesystem::path output(const std::string& name);

    void seed(const std::string& name, std::uint64_t value);
    void set_config(std::string ini) { config_ = std::move(ini); }
    void set_args(std::vector<std::string> args) { args_ = std::move(args); }
    void note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

    nlohmann::json manifest() const;
    /// Writes <out>/<command>.manifest.json and returns its path.
    std::filesystem::path write_manifest() const;

private:
    std::string command_;
    std::filesystem::path out_dir_;
    std::vector<std::filesystem::path> inputs_;
    std::vector<std::filesystem::path> outputs_;
    nlohmann::json seeds_ = nlohmann::json::object();
    nlohmann::json notes_ = nlohmann::json::object();
    std::string config_;
    std::vector<std::string> args_;
    std::chrono::steady_clock::time_point started_;
};

} // namespace liftlab::cli
