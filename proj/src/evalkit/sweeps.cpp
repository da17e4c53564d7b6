#include "liftlab/error.hpp"
#include "liftlab/evalkit.hpp"
#include "liftlab/random.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace liftlab::eval {

namespace {

std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Runs task(i) for i in [0, n) on up to `jobs` threads; results keep index order.
std::vector<CatalogRow> run_pool(std::size_t n, std::size_t jobs, const std::function<CatalogRow(std::size_t)>& task) {
    std::vector<CatalogRow> rows(n);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                rows[i] = task(i);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const auto threads = std::max<std::size_t>(1, std::min(jobs, n));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    for (std::size_t i = 0; i < n; ++i) rows[i].id = i;
    return rows;
}

void check_config(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
    if (cfg.eval_stride < 1 || (cfg.train_stride && *cfg.train_stride < 1)) throw ConfigError("stride must be >= 1");
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
    if (cfg.jobs < 1) throw ConfigError("jobs must be >= 1");
}

CatalogRow failed_row(std::uint64_t seed, const std::string& status) {
    CatalogRow row;
    row.seed = seed;
    row.status = status;
    return row;
}

} // namespace

const std::string* CatalogRow::param(std::string_view name) const {
    for (const auto& [k, v] : params) {
        if (k == name) return &v;
    }
    return nullptr;
}

PreparedData prepare_data(const DataSources& sources, std::size_t window_len, const ExperimentConfig& cfg,
                          std::uint64_t row_seed, std::span<const imu::SensorId> sensors) {
    if (sources.train.empty()) throw EmptyDatasetError("no training recordings");
    if (sources.eval.empty()) throw EmptyDatasetError("no evaluation recordings");
    const auto layout = sources.train.front().recording.sensors;
    const auto stride = cfg.train_stride.value_or(window_len);

    PreparedData out;
    out.train = windowing::balance(windowing::slice_all(sources.train, window_len, stride, cfg.labels), window_len,
                                   layout, derive_seed(row_seed, 1));
    auto eval_windows = windowing::slice_all(sources.eval, window_len, cfg.eval_stride, cfg.labels);
    const auto eval_layout = sources.eval.front().recording.sensors;
    out.eval = cfg.balance_eval
                   ? windowing::balance(std::move(eval_windows), window_len, eval_layout, derive_seed(row_seed, 2))
                   : windowing::make_dataset(std::move(eval_windows), window_len, eval_layout);
    if (!sensors.empty()) {
        out.train = windowing::select_sensors(out.train, sensors);
        out.eval = windowing::select_sensors(out.eval, sensors);
    }
    return out;
}

CatalogRow run_experiment(const PreparedData& data, net::ModelConfig model_cfg, net::TrainConfig train_cfg,
                          double threshold, std::uint64_t row_seed) {
    CatalogRow row;
    row.seed = row_seed;
    model_cfg.window_len = data.train.window_len;
    model_cfg.n_channels = data.train.n_channels();
    model_cfg.channel_names = imu::channel_names(data.train.sensors);
    model_cfg.seed = derive_seed(row_seed, 3);
    train_cfg.seed = derive_seed(row_seed, 4);

    auto [model, history] = net::train(net::init_model(model_cfg), data.train, train_cfg);
    row.train = evaluate(model, data.train, threshold).metrics;
    row.eval = evaluate(model, data.eval, threshold);
    return row;
}

namespace {

// Shared body of every sweep row: prepare, train, evaluate; data errors are
// recorded in the row.
CatalogRow guarded_row(const DataSources& sources, std::size_t window_len, const ExperimentConfig& cfg,
                       const net::ModelConfig& mc, const net::TrainConfig& tc, std::uint64_t row_seed,
                       std::span<const imu::SensorId> sensors) {
    try {
        const auto data = prepare_data(sources, window_len, cfg, row_seed, sensors);
        return run_experiment(data, mc, tc, cfg.threshold, row_seed);
    } catch (const Error& e) {
        return failed_row(row_seed, std::string(e.kind()) + ": " + e.message());
    }
}

} // namespace

std::vector<CatalogRow> grid_search(const GridAxes& axes, const DataSources& sources, const ExperimentConfig& cfg) {
    check_config(cfg);
    if (axes.batch_sizes.empty() || axes.window_lens.empty() || axes.epochs.empty() ||
        axes.validation_splits.empty()) {
        throw ConfigError("every grid axis needs at least one value");
    }
    struct Cell {
        std::size_t batch, window, epochs;
        double split;
        std::size_t combination;
        std::uint64_t base_seed;
    };
    std::vector<Cell> cells;
    std::size_t combination = 0;
    for (auto b : axes.batch_sizes) {
        for (auto w : axes.window_lens) {
            for (auto e : axes.epochs) {
                for (auto s : axes.validation_splits) {
                    for (auto seed : cfg.seeds) cells.push_back({b, w, e, s, combination, seed});
                    ++combination;
                }
            }
        }
    }
    return run_pool(cells.size(), cfg.jobs, [&](std::size_t i) {
        const auto& c = cells[i];
        auto tc = cfg.train;
        tc.batch_size = c.batch;
        tc.epochs = c.epochs;
        tc.validation_split = c.split;
        const auto seed = derive_seed(c.base_seed, c.combination);
        auto row = guarded_row(sources, c.window, cfg, cfg.model, tc, seed, {});
        row.experiment = "grid";
        row.params = {{"batch_size", std::to_string(c.batch)},
                      {"window_len", std::to_string(c.window)},
                      {"epochs", std::to_string(c.epochs)},
                      {"validation_split", format_real(c.split)}};
        return row;
    });
}

std::vector<std::vector<imu::SensorId>> default_ablation_subsets() {
    using imu::SensorId;
    return {std::vector<SensorId>(imu::kAllSensors.begin(), imu::kAllSensors.end()),
            {SensorId::LeftWrist, SensorId::RightWrist, SensorId::UpperBack}};
}

// Subsets and filter kinds of one replicate share a seed, so every row of a
// replicate sees the same balanced windows and initial weights.
std::vector<CatalogRow> ablation_sweep(std::span<const std::vector<imu::SensorId>> subsets, const DataSources& sources,
                                       const ExperimentConfig& cfg) {
    check_config(cfg);
    if (subsets.empty()) throw ConfigError("no sensor subsets");
    for (const auto& s : subsets) {
        if (s.empty()) throw ConfigError("sensor subsets must be non-empty");
    }
    const auto n_seeds = cfg.seeds.size();
    return run_pool(subsets.size() * n_seeds, cfg.jobs, [&](std::size_t i) {
        const auto& subset = subsets[i / n_seeds];
        const auto seed = derive_seed(cfg.seeds[i % n_seeds], 0);
        auto row = guarded_row(sources, cfg.window_len, cfg, cfg.model, cfg.train, seed, subset);
        row.experiment = "ablation";
        row.params = {{"sensors", imu::join_sensor_list(subset, '+')}};
        return row;
    });
}

std::vector<CatalogRow> filter_compare(std::span<const fusion::FilterKind> kinds, const DataSources& sources,
                                       const ExperimentConfig& cfg) {
    check_config(cfg);
    if (kinds.empty()) throw ConfigError("no filter kinds");
    std::vector<DataSources> filtered;
    filtered.reserve(kinds.size());
    for (const auto& kind : kinds) {
        kind.validate();
        DataSources f = sources;
        for (auto* part : {&f.train, &f.eval}) {
            for (auto& lr : *part) lr.recording = fusion::apply_filter(lr.recording, kind);
        }
        filtered.push_back(std::move(f));
    }
    const auto n_seeds = cfg.seeds.size();
    return run_pool(kinds.size() * n_seeds, cfg.jobs, [&](std::size_t i) {
        const auto k = i / n_seeds;
        const auto seed = derive_seed(cfg.seeds[i % n_seeds], 0);
        auto row = guarded_row(filtered[k], cfg.window_len, cfg, cfg.model, cfg.train, seed, {});
        row.experiment = "filter";
        row.params = {{"filter", std::string(fusion::filter_name(kinds[k].type))}};
        return row;
    });
}

std::vector<CatalogRow> sort_by_eval_f1(std::vector<CatalogRow> rows) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const CatalogRow& a, const CatalogRow& b) { return a.eval.metrics.f1 > b.eval.metrics.f1; });
    return rows;
}

std::vector<SummaryRow> summarize(std::span<const CatalogRow> rows, const std::string& group_param) {
    std::vector<SummaryRow> out;
    std::vector<std::vector<const CatalogRow*>> members;
    for (const auto& row : rows) {
        const auto* value = row.param(group_param);
        if (!value) throw ConfigError("catalog rows have no parameter '" + group_param + "'");
        std::size_t g = 0;
        while (g < out.size() && out[g].group != *value) ++g;
        if (g == out.size()) {
            out.push_back({});
            out.back().group = *value;
            members.emplace_back();
        }
        if (row.status == "ok") members[g].push_back(&row);
    }
    for (std::size_t g = 0; g < out.size(); ++g) {
        std::vector<double> ef1, eacc, tf1, tacc;
        for (const auto* r : members[g]) {
            ef1.push_back(r->eval.metrics.f1);
            eacc.push_back(r->eval.metrics.accuracy);
            tf1.push_back(r->train.f1);
            tacc.push_back(r->train.accuracy);
        }
        auto& s = out[g];
        s.rows = members[g].size();
        s.median_eval_f1 = median(ef1);
        s.median_eval_acc = median(eacc);
        s.median_train_f1 = median(tf1);
        s.median_train_acc = median(tacc);
        s.max_eval_f1 = ef1.empty() ? 0.0 : *std::max_element(ef1.begin(), ef1.end());
        s.max_eval_acc = eacc.empty() ? 0.0 : *std::max_element(eacc.begin(), eacc.end());
    }
    return out;
}

} // namespace liftlab::eval
