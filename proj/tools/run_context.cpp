#include "run_context.hpp"

#include "liftlab/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

namespace liftlab::cli {

namespace fs = std::filesystem;

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path.string() + "'");
    const std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    std::string hex;
    char byte[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

RunContext::RunContext(std::string command, fs::path out_dir)
    : command_(std::move(command)), out_dir_(std::move(out_dir)), started_(std::chrono::steady_clock::now()) {}

fs::path RunContext::input(const fs::path& path) {
    if (!fs::exists(path)) throw InputError("input '" + path.string() + "' does not exist");
    inputs_.push_back(path);
    return inputs_.back();
}

fs::path RunContext::output(const std::string& name) {
    fs::create_directories(out_dir_);
    const auto path = out_dir_ / name;
    for (const auto& in : inputs_) {
        std::error_code ec;
        if (fs::exists(path) && fs::equivalent(path, in, ec)) {
            throw InputError("refusing to overwrite input '" + in.string() + "'");
        }
    }
    outputs_.push_back(path);
    return path;
}

void RunContext::seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

nlohmann::json RunContext::manifest() const {
    using nlohmann::json;
    const auto hashes = [](const std::vector<fs::path>& paths) {
        json list = json::array();
        for (const auto& p : paths) {
            if (fs::is_directory(p)) continue;
            if (!fs::exists(p)) continue;
            list.push_back({{"path", p.generic_string()}, {"sha256", sha256_file(p)}});
        }
        return list;
    };
    json m;
    m["command"] = command_;
    m["args"] = args_;
    m["config"] = config_;
    m["inputs"] = hashes(inputs_);
    m["outputs"] = hashes(outputs_);
    m["seeds"] = seeds_;
    if (!notes_.empty()) m["notes"] = notes_;
    m["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    return m;
}

fs::path RunContext::write_manifest() const {
    fs::create_directories(out_dir_);
    const auto path = out_dir_ / (command_ + ".manifest.json");
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest '" + path.string() + "'");
    out << manifest().dump(2) << '\n';
    return path;
}

} // namespace liftlab::cli
