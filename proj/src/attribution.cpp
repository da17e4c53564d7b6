#include "liftlab/attribution.hpp"

#include "liftlab/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace liftlab::attribution {

net::InputGradient LinearSurrogate::input_gradient(const WindowMatrix& x, OutputMode mode) const {
    if (x.rows() != weights_.rows() || x.cols() != weights_.cols()) throw ShapeError("window shape mismatch");
    const double z = (weights_.array() * x.array()).sum();
    const double p = 1.0 / (1.0 + std::exp(-z));
    net::InputGradient out;
    out.output = mode == OutputMode::Probability ? p : z;
    out.gradient = weights_ * (mode == OutputMode::Probability ? p * (1.0 - p) : 1.0);
    return out;
}

SaliencyMap from_gradient(const Eigen::MatrixXd& gradient, Normalization normalization) {
    SaliencyMap map;
    map.values = gradient.cwiseAbs();
    map.normalization = normalization;
    if (normalization == Normalization::MaxOne) {
        const double peak = map.values.size() ? map.values.maxCoeff() : 0.0;
        if (peak > 0.0) {
            map.values /= peak;
            map.scale = peak;
        }
    }
    return map;
}

SaliencyMap saliency(const net::Model& model, const WindowMatrix& window, const SaliencyOptions& options) {
    return saliency(ModelGradient(model), window, options);
}

std::vector<SaliencyMap> saliency_all(const net::Model& model, std::span<const windowing::Window> windows,
                                      const SaliencyOptions& options) {
    std::vector<SaliencyMap> maps;
    maps.reserve(windows.size());
    const ModelGradient grad(model);
    for (const auto& w : windows) maps.push_back(saliency(grad, w.data, options));
    return maps;
}

namespace {

void check_homogeneous(std::span<const SaliencyMap> maps) {
    if (maps.empty()) throw ShapeError("no saliency maps");
    for (const auto& m : maps) {
        if (m.values.rows() != maps.front().values.rows() || m.values.cols() != maps.front().values.cols()) {
            throw ShapeError("saliency maps have different shapes");
        }
    }
}

} // namespace

SaliencyMap mean_map(std::span<const SaliencyMap> maps) {
    check_homogeneous(maps);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(maps.front().values.rows(), maps.front().values.cols());
    for (const auto& m : maps) sum += m.raw();
    SaliencyMap out;
    out.values = sum / static_cast<double>(maps.size());
    return out;
}

ChannelRanking aggregate_saliency(std::span<const SaliencyMap> maps, std::span<const std::string> channel_names) {
    check_homogeneous(maps);
    const auto n = static_cast<std::size_t>(maps.front().values.cols());
    if (channel_names.size() != n) throw ShapeError("channel name count does not match saliency maps");

    Eigen::VectorXd importance = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (const auto& m : maps) importance += m.raw().colwise().sum().transpose();
    importance /= static_cast<double>(maps.size() * static_cast<std::size_t>(maps.front().values.rows()));

    const double total = importance.sum();
    ChannelRanking ranking(n);
    for (std::size_t c = 0; c < n; ++c) {
        ranking[c].channel = channel_names[c];
        ranking[c].index = c;
        ranking[c].share = total > 0.0 ? importance[static_cast<Eigen::Index>(c)] / total : 1.0 / static_cast<double>(n);
    }
    std::stable_sort(ranking.begin(), ranking.end(),
                     [](const ChannelShare& a, const ChannelShare& b) { return a.share > b.share; });
    return ranking;
}

HeatmapArtifact render_heatmap(const SaliencyMap& map, std::span<const std::string> channel_names) {
    const auto rows = map.values.rows();
    const auto cols = map.values.cols();
    if (static_cast<Eigen::Index>(channel_names.size()) != cols) {
        throw ShapeError("heatmap needs one name per channel");
    }
    const double peak = map.values.size() ? map.values.maxCoeff() : 0.0;

    HeatmapArtifact art;
    art.pgm = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double v = peak > 0.0 ? std::clamp(map.values(r, c) / peak, 0.0, 1.0) : 0.0;
            art.pgm.push_back(static_cast<char>(static_cast<unsigned char>(std::floor(255.0 * v + 0.5))));
        }
    }

    std::ostringstream csv;
    csv << "step";
    for (const auto& name : channel_names) csv << ',' << name;
    csv << '\n';
    char buf[32];
    for (Eigen::Index r = 0; r < rows; ++r) {
        csv << r;
        for (Eigen::Index c = 0; c < cols; ++c) {
            std::snprintf(buf, sizeof buf, ",%.17g", map.values(r, c));
            csv << buf;
        }
        csv << '\n';
    }
    art.csv = csv.str();
    return art;
}

void write_heatmap(const std::string& stem, const HeatmapArtifact& artifact) {
    std::ofstream pgm(stem + ".pgm", std::ios::binary);
    std::ofstream csv(stem + ".csv");
    if (!pgm || !csv) throw ParseError("cannot write heatmap '" + stem + "'");
    pgm << artifact.pgm;
    csv << artifact.csv;
}

std::string ranking_csv(const ChannelRanking& ranking) {
    std::string out = "channel,share\n";
    char buf[32];
    for (const auto& entry : ranking) {
        std::snprintf(buf, sizeof buf, ",%.17g\n", entry.share);
        out += entry.channel + buf;
    }
    return out;
}

SaliencyMap parse_heatmap_csv(const std::string& csv, std::vector<std::string>* channel_names) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty heatmap csv");
    std::vector<std::string> names;
    {
        std::istringstream header(line);
        std::string cell;
        std::getline(header, cell, ',');  // "step"
        while (std::getline(header, cell, ',')) names.push_back(cell);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        std::vector<double> values;
        while (std::getline(row, cell, ',')) {
            double v = 0.0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc{}) throw ParseError("non-numeric heatmap cell '" + cell + "'");
            values.push_back(v);
        }
        if (values.size() != names.size()) throw ShapeError("heatmap row width differs from header");
        rows.push_back(std::move(values));
    }
    SaliencyMap map;
    map.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            map.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    if (channel_names) *channel_names = std::move(names);
    return map;
}

} // namespace liftlab::attribution
