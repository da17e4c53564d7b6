#pragma once

#include "liftlab/liftnet.hpp"

#include <Eigen/Core>

#include <concepts>
#include <span>
#include <string>
#include <vector>

namespace liftlab::attribution {

using net::OutputMode;
using windowing::WindowMatrix;

enum class Normalization { Raw, MaxOne };

/// |d output / d input| per (time step, channel).
struct SaliencyMap {
    Eigen::MatrixXd values;  // window_len x n_channels, >= 0
    Normalization normalization = Normalization::Raw;
    double scale = 1.0;      // raw = values * scale

    Eigen::MatrixXd raw() const { return values * scale; }
};

struct SaliencyOptions {
    Normalization normalization = Normalization::MaxOne;
    OutputMode mode = OutputMode::Probability;
};

/// Anything that can report its output and the input gradient for a window.
template <typename M>
concept InputDifferentiable = requires(const M& m, const WindowMatrix& x, OutputMode mode) {
    { m.input_gradient(x, mode) } -> std::same_as<net::InputGradient>;
};

/// Test hook that bypasses the LSTM: output = sigmoid(w . flatten(x)), with
/// x flattened row-major (time step major).
class LinearSurrogate {
public:
    explicit LinearSurrogate(Eigen::MatrixXd weights) : weights_(std::move(weights)) {}
    const Eigen::MatrixXd& weights() const { return weights_; }
    net::InputGradient input_gradient(const WindowMatrix& x, OutputMode mode) const;

private:
    Eigen::MatrixXd weights_;  // same shape as the window
};

/// Adapter so a trained Model satisfies InputDifferentiable.
class ModelGradient {
public:
    explicit ModelGradient(const net::Model& model) : model_(&model) {}
    net::InputGradient input_gradient(const WindowMatrix& x, OutputMode mode) const {
        return net::input_gradient(*model_, x, mode);
    }

private:
    const net::Model* model_;
};

SaliencyMap from_gradient(const Eigen::MatrixXd& gradient, Normalization normalization);

template <InputDifferentiable M>
SaliencyMap saliency(const M& model, const WindowMatrix& window, const SaliencyOptions& options = {}) {
    return from_gradient(model.input_gradient(window, options.mode).gradient, options.normalization);
}

SaliencyMap saliency(const net::Model& model, const WindowMatrix& window, const SaliencyOptions& options = {});

/// Raw saliency of every window in the dataset (or the first `limit`).
std::vector<SaliencyMap> saliency_all(const net::Model& model, std::span<const windowing::Window> windows,
                                      const SaliencyOptions& options = {});

struct ChannelShare {
    std::string channel;
    std::size_t index = 0;  // column in the layout
    double share = 0.0;
};

using ChannelRanking = std::vector<ChannelShare>;

/// Mean raw saliency per channel over all maps and frames, normalized to
/// shares; descending, ties in layout order. All-zero input gives equal shares.
ChannelRanking aggregate_saliency(std::span<const SaliencyMap> maps, std::span<const std::string> channel_names);

/// Mean raw map over `maps` (for rendering an aggregate heatmap).
SaliencyMap mean_map(std::span<const SaliencyMap> maps);

struct HeatmapArtifact {
    std::string pgm;  // binary P5 raster, rows = time steps, columns = channels
    std::string csv;  // header of channel names, one row per time step
};

HeatmapArtifact render_heatmap(const SaliencyMap& map, std::span<const std::string> channel_names);

/// Writes <stem>.pgm and <stem>.csv.
void write_heatmap(const std::string& stem, const HeatmapArtifact& artifact);

std::string ranking_csv(const ChannelRanking& ranking);

/// Reads the numeric matrix of a heatmap CSV (as written by render_heatmap).
SaliencyMap parse_heatmap_csv(const std::string& csv, std::vector<std::string>* channel_names = nullptr);

} // namespace liftlab::attribution
