#pragma once

#include "liftlab/imu_core.hpp"
#include "liftlab/windowing.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace liftlab::net {

using windowing::Dataset;
using windowing::Label;
using windowing::Window;
using windowing::WindowMatrix;

enum class DenseActivation { Relu, Tanh };

struct ModelConfig {
    std::size_t window_len = 10;
    std::size_t n_channels = 36;
    std::size_t lstm_hidden = 128;
    std::vector<std::size_t> dense_widths{5, 5};
    std::uint64_t seed = 0;
    DenseActivation activation = DenseActivation::Relu;
    /// Optional channel layout; when set, datasets and recordings are
    /// matched against it by name.
    std::vector<std::string> channel_names;

    void validate() const;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t epochs = 30;
    double validation_split = 0.2;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> train_accuracy;
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
};

struct TensorInfo {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;

    Eigen::Index size() const { return rows * cols; }
};

using MatrixView = Eigen::Map<const Eigen::MatrixXd>;
using MutableMatrixView = Eigen::Map<Eigen::MatrixXd>;

/// LSTM (gate blocks stacked i, f, g, o) followed by a dense head ending in
/// one sigmoid unit. All parameters live in one flat vector; LSTM tensors
/// come first so they form a contiguous prefix.
class Model {
public:
    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const std::vector<TensorInfo>& tensors() const { return tensors_; }
    const TensorInfo& tensor(std::string_view name) const;

    Eigen::VectorXd& parameters() { return params_; }
    const Eigen::VectorXd& parameters() const { return params_; }
    std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
    /// Number of leading parameters that belong to the LSTM.
    Eigen::Index lstm_parameter_count() const { return lstm_count_; }

    MatrixView view(const TensorInfo& t) const { return {params_.data() + t.offset, t.rows, t.cols}; }
    MutableMatrixView view(const TensorInfo& t) { return {params_.data() + t.offset, t.rows, t.cols}; }
    MatrixView view(std::string_view name) const { return view(tensor(name)); }
    MutableMatrixView view(std::string_view name) { return view(tensor(name)); }

    /// hidden x n_channels block of the input gate.
    Eigen::MatrixXd input_gate_weights() const;
    std::size_t dense_layer_count() const { return config_.dense_widths.size() + 1; }

    /// Learning rate of the last full training run; fine_tune defaults to a tenth.
    double trained_learning_rate = 1e-3;

private:
    ModelConfig config_;
    std::vector<TensorInfo> tensors_;
    Eigen::VectorXd params_;
    Eigen::Index lstm_count_ = 0;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, forget-gate bias 1.
Model init_model(const ModelConfig& cfg);

/// Probability of Lift for one window. Throws ShapeError / InputError.
double forward(const Model& model, const WindowMatrix& window);

/// Batched forward; equal to calling forward() on each window.
std::vector<double> predict(const Model& model, std::span<const Window> windows);
std::vector<double> predict(const Model& model, std::span<const WindowMatrix* const> windows);

/// Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
double loss(double prob, Label label);

struct GradientResult {
    Eigen::VectorXd gradient;  // same layout as Model::parameters()
    double loss = 0.0;         // mean over the batch
};

/// Mean loss gradient over `batch` by backpropagation through time.
GradientResult gradients(const Model& model, std::span<const Window> batch);

enum class OutputMode { Probability, Logit };

struct InputGradient {
    double output = 0.0;    // probability or logit, per mode
    WindowMatrix gradient;  // d output / d window
};

InputGradient input_gradient(const Model& model, const WindowMatrix& window, OutputMode mode);

/// Splits, then trains with Adam (beta1 0.9, beta2 0.999, eps 1e-8).
std::pair<Model, TrainHistory> train(Model model, const Dataset& data, const TrainConfig& tc);

struct FineTuneOptions {
    bool freeze_lstm = false;
    std::optional<double> learning_rate;  // default: model.trained_learning_rate / 10
    std::size_t epochs = 10;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
};

/// Continues training on a small target-domain dataset (no validation split).
Model fine_tune(Model model, const Dataset& small_data, const FineTuneOptions& options);

/// Per-frame Lift probability: each window's score is written to its start
/// frame and carried forward until the next window start.
std::vector<double> score_recording(const Model& model, const imu::Recording& rec, std::size_t stride);

/// Throws ShapeError unless `ds` matches the model's window length and layout.
void check_dataset(const Model& model, const Dataset& ds);

void save_model(const std::string& path, const Model& model);
/// Rejects files whose channel layout differs from `expected_channels` when given.
Model load_model(const std::string& path, std::span<const std::string> expected_channels = {});

} // namespace liftlab::net
