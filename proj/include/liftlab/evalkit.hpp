#pragma once

#include "liftlab/fusion_filters.hpp"
#include "liftlab/imu_core.hpp"
#include "liftlab/liftnet.hpp"
#include "liftlab/windowing.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace liftlab::eval {

using windowing::Label;

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionMatrix&) const = default;
};

/// 0/0 ratios are reported as 0 and flagged.
struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

/// Predicted Lift iff score >= threshold.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const Label> labels, double threshold = 0.5);
Metrics metrics(const ConfusionMatrix& cm);

struct Evaluation {
    ConfusionMatrix cm;
    Metrics metrics;
};

Evaluation evaluate(const net::Model& model, const windowing::Dataset& data, double threshold = 0.5);

// ---------------------------------------------------------------------------
// Experiment harnesses

struct DataSources {
    std::vector<imu::LabeledRecording> train;
    std::vector<imu::LabeledRecording> eval;
};

/// Shared settings for every sweep. Per-row fields (window length, sensors,
/// filter, hyperparameters) override the corresponding defaults here.
struct ExperimentConfig {
    net::ModelConfig model;  // window_len / n_channels / channel_names / seed set per row
    net::TrainConfig train;  // seed set per row
    std::size_t window_len = 10;
    std::optional<std::size_t> train_stride;  // default: window_len
    std::size_t eval_stride = 1;
    windowing::LabelOptions labels;
    bool balance_eval = true;
    double threshold = 0.5;
    std::vector<std::uint64_t> seeds{0};  // one replicate per base seed
    std::size_t jobs = 1;
};

struct GridAxes {
    std::vector<std::size_t> batch_sizes;
    std::vector<std::size_t> window_lens;
    std::vector<std::size_t> epochs;
    std::vector<double> validation_splits;
};

struct CatalogRow {
    std::size_t id = 0;
    std::string experiment;
    std::vector<std::pair<std::string, std::string>> params;
    Metrics train;
    Evaluation eval;
    std::uint64_t seed = 0;
    std::string status = "ok";

    const std::string* param(std::string_view name) const;
};

/// Datasets a single row trains and evaluates on.
struct PreparedData {
    windowing::Dataset train;
    windowing::Dataset eval;
};

PreparedData prepare_data(const DataSources& sources, std::size_t window_len, const ExperimentConfig& cfg,
                          std::uint64_t row_seed, std::span<const imu::SensorId> sensors = {});

/// Train + evaluate one configuration; errors land in the row's status.
CatalogRow run_experiment(const PreparedData& data, net::ModelConfig model_cfg, net::TrainConfig train_cfg,
                          double threshold, std::uint64_t row_seed);

/// Rows in lexicographic axis order (batch, window, epochs, split), seeds innermost.
std::vector<CatalogRow> grid_search(const GridAxes& axes, const DataSources& sources, const ExperimentConfig& cfg);

/// {all six} and {left wrist, right wrist, upper back}.
std::vector<std::vector<imu::SensorId>> default_ablation_subsets();

std::vector<CatalogRow> ablation_sweep(std::span<const std::vector<imu::SensorId>> subsets, const DataSources& sources,
                                       const ExperimentConfig& cfg);

std::vector<CatalogRow> filter_compare(std::span<const fusion::FilterKind> kinds, const DataSources& sources,
                                       const ExperimentConfig& cfg);

struct SummaryRow {
    std::string group;
    std::size_t rows = 0;
    double median_eval_f1 = 0.0;
    double max_eval_f1 = 0.0;
    double median_eval_acc = 0.0;
    double max_eval_acc = 0.0;
    double median_train_f1 = 0.0;
    double median_train_acc = 0.0;
};

/// Median/max per value of `group_param`, groups in order of first
/// appearance; failed rows are skipped.
std::vector<SummaryRow> summarize(std::span<const CatalogRow> rows, const std::string& group_param);

double median(std::vector<double> values);

std::string catalog_csv(std::span<const CatalogRow> rows);
std::vector<CatalogRow> parse_catalog_csv(const std::string& text);
std::string summary_csv(std::span<const SummaryRow> rows);

/// Rows sorted by descending evaluation F1 (stable).
std::vector<CatalogRow> sort_by_eval_f1(std::vector<CatalogRow> rows);

} // namespace liftlab::eval
