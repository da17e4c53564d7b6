#include "liftlab/error.hpp"
#include "liftlab/liftnet.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace liftlab::net {

using nlohmann::json;

namespace {
constexpr const char* kFormat = "liftnet-model";
constexpr int kVersion = 1;
}

void save_model(const std::string& path, const Model& model) {
    const auto& cfg = model.config();
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["config"] = {
        {"window_len", cfg.window_len},
        {"n_channels", cfg.n_channels},
        {"lstm_hidden", cfg.lstm_hidden},
        {"dense_widths", cfg.dense_widths},
        {"seed", cfg.seed},
        {"activation", cfg.activation == DenseActivation::Relu ? "relu" : "tanh"},
        {"channel_names", cfg.channel_names},
    };
    j["trained_learning_rate"] = model.trained_learning_rate;
    json tensors = json::array();
    for (const auto& t : model.tensors()) {
        const auto v = model.parameters().segment(t.offset, t.size());
        tensors.push_back({{"name", t.name},
                           {"rows", t.rows},
                           {"cols", t.cols},
                           {"data", std::vector<double>(v.data(), v.data() + v.size())}});
    }
    j["tensors"] = std::move(tensors);

    std::ofstream out(path);
    if (!out) throw ParseError("cannot write model '" + path + "'");
    out << j.dump() << '\n';
}

Model load_model(const std::string& path, std::span<const std::string> expected_channels) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open model '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("model '" + path + "': " + e.what());
    }

    try {
        if (j.at("format") != kFormat || j.at("version") != kVersion) {
            throw ParseError("model '" + path + "' has an unsupported format");
        }
        const auto& c = j.at("config");
        ModelConfig cfg;
        cfg.window_len = c.at("window_len").get<std::size_t>();
        cfg.n_channels = c.at("n_channels").get<std::size_t>();
        cfg.lstm_hidden = c.at("lstm_hidden").get<std::size_t>();
        cfg.dense_widths = c.at("dense_widths").get<std::vector<std::size_t>>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        cfg.activation = c.at("activation") == "tanh" ? DenseActivation::Tanh : DenseActivation::Relu;
        cfg.channel_names = c.at("channel_names").get<std::vector<std::string>>();

        if (!expected_channels.empty() &&
            !std::equal(expected_channels.begin(), expected_channels.end(), cfg.channel_names.begin(),
                        cfg.channel_names.end())) {
            throw ShapeError("model '" + path + "' channel layout does not match the data");
        }

        Model model(cfg);
        model.trained_learning_rate = j.value("trained_learning_rate", 1e-3);
        const auto& tensors = j.at("tensors");
        if (tensors.size() != model.tensors().size()) throw ShapeError("model '" + path + "' tensor count mismatch");
        for (std::size_t k = 0; k < tensors.size(); ++k) {
            const auto& info = model.tensors()[k];
            const auto& t = tensors[k];
            if (t.at("name") != info.name || t.at("rows") != info.rows || t.at("cols") != info.cols) {
                throw ShapeError("model '" + path + "' tensor " + info.name + " has the wrong shape");
            }
            const auto data = t.at("data").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(data.size()) != info.size()) {
                throw ShapeError("model '" + path + "' tensor " + info.name + " has the wrong size");
            }
            model.parameters().segment(info.offset, info.size()) =
                Eigen::Map<const Eigen::VectorXd>(data.data(), info.size());
        }
        if (!model.parameters().allFinite()) throw InputError("model '" + path + "' has non-finite parameters");
        return model;
    } catch (const json::exception& e) {
        throw ParseError("model '" + path + "': " + e.what());
    }
}

} // namespace liftlab::net
