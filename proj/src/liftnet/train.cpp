#include "liftlab/error.hpp"
#include "liftlab/liftnet.hpp"
#include "liftlab/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace liftlab::net {
namespace {

struct FitOptions {
    double learning_rate = 1e-3;
    std::size_t epochs = 1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    bool freeze_lstm = false;
};

class Adam {
public:
    explicit Adam(Eigen::Index n) : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

    void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grad, double lr) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        ++t_;
        auto m = m_.segment(0, params.size());
        auto v = v_.segment(0, params.size());
        m = beta1 * m + (1.0 - beta1) * grad;
        v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    }

private:
    Eigen::VectorXd m_;
    Eigen::VectorXd v_;
    long t_ = 0;
};

void require_both_classes(std::span<const Window> windows, const char* what) {
    const bool has_lift = std::any_of(windows.begin(), windows.end(), [](const Window& w) { return w.label == Label::Lift; });
    const bool has_non = std::any_of(windows.begin(), windows.end(), [](const Window& w) { return w.label == Label::NonLift; });
    if (!has_lift || !has_non) throw ClassMissingError(std::string(what) + " needs both Lift and NonLift windows");
}

std::pair<double, double> loss_and_accuracy(const Model& model, std::span<const Window> windows) {
    const auto probs = predict(model, windows);
    double total = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        total += loss(probs[i], windows[i].label);
        correct += (probs[i] >= 0.5) == (windows[i].label == Label::Lift);
    }
    const auto n = static_cast<double>(windows.size());
    return {total / n, static_cast<double>(correct) / n};
}

TrainHistory fit(Model& model, std::span<const Window> train_set, std::span<const Window> val_set,
                 const FitOptions& opt) {
    TrainHistory history;
    const Eigen::Index frozen = opt.freeze_lstm ? model.lstm_parameter_count() : 0;
    const Eigen::Index trainable = static_cast<Eigen::Index>(model.parameter_count()) - frozen;
    Adam adam(trainable);
    Rng rng(derive_seed(opt.seed, 0x5eed));

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<Window> batch;

    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += opt.batch_size) {
            const auto end = std::min(order.size(), begin + opt.batch_size);
            batch.clear();
            for (auto k = begin; k < end; ++k) batch.push_back(train_set[order[k]]);
            const auto g = gradients(model, batch);
            if (!std::isfinite(g.loss) || !g.gradient.allFinite()) {
                throw DivergenceError("non-finite loss or gradient in epoch " + std::to_string(epoch + 1));
            }
            epoch_loss += g.loss * static_cast<double>(batch.size());
            adam.step(model.parameters().tail(trainable), g.gradient.tail(trainable), opt.learning_rate);
        }
        if (!model.parameters().allFinite()) {
            throw DivergenceError("parameters became non-finite in epoch " + std::to_string(epoch + 1));
        }
        history.train_loss.push_back(epoch_loss / static_cast<double>(train_set.size()));
        history.train_accuracy.push_back(loss_and_accuracy(model, train_set).second);
        if (!val_set.empty()) {
            const auto [vl, va] = loss_and_accuracy(model, val_set);
            history.val_loss.push_back(vl);
            history.val_accuracy.push_back(va);
        }
    }
    return history;
}

} // namespace

void check_dataset(const Model& model, const Dataset& ds) {
    const auto& cfg = model.config();
    if (ds.window_len != cfg.window_len || ds.n_channels() != cfg.n_channels) {
        throw ShapeError("dataset is " + std::to_string(ds.window_len) + "x" + std::to_string(ds.n_channels()) +
                         ", model expects " + std::to_string(cfg.window_len) + "x" + std::to_string(cfg.n_channels));
    }
    if (!cfg.channel_names.empty() && imu::channel_names(ds.sensors) != cfg.channel_names) {
        throw ShapeError("dataset channel layout differs from the model's");
    }
}

std::pair<Model, TrainHistory> train(Model model, const Dataset& data, const TrainConfig& tc) {
    tc.validate();
    check_dataset(model, data);
    require_both_classes(data.windows, "training");
    const auto [train_set, val_set] = windowing::split(data, tc.validation_split, derive_seed(tc.seed, 1));

    FitOptions opt;
    opt.learning_rate = tc.learning_rate;
    opt.epochs = tc.epochs;
    opt.batch_size = tc.batch_size;
    opt.seed = tc.seed;
    auto history = fit(model, train_set.windows, val_set.windows, opt);
    model.trained_learning_rate = tc.learning_rate;
    return {std::move(model), std::move(history)};
}

Model fine_tune(Model model, const Dataset& small_data, const FineTuneOptions& options) {
    if (options.epochs == 0) return model;
    if (small_data.windows.empty()) throw EmptyDatasetError("fine-tuning dataset is empty");
    if (options.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    check_dataset(model, small_data);
    require_both_classes(small_data.windows, "fine-tuning");

    FitOptions opt;
    opt.learning_rate = options.learning_rate.value_or(model.trained_learning_rate / 10.0);
    if (!(opt.learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    opt.epochs = options.epochs;
    opt.batch_size = options.batch_size;
    opt.seed = options.seed;
    opt.freeze_lstm = options.freeze_lstm;
    fit(model, small_data.windows, {}, opt);
    return model;
}

std::vector<double> score_recording(const Model& model, const imu::Recording& rec, std::size_t stride) {
    const auto& cfg = model.config();
    const auto len = rec.frame_count();
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (len < cfg.window_len) {
        throw EmptyDatasetError("recording '" + rec.trial_id + "' is shorter than the model window");
    }

    // Map model channels onto recording columns.
    std::vector<Eigen::Index> cols;
    if (!cfg.channel_names.empty()) {
        const auto names = imu::channel_names(rec.sensors);
        for (const auto& want : cfg.channel_names) {
            const auto it = std::find(names.begin(), names.end(), want);
            if (it == names.end()) throw ShapeError("recording lacks model channel '" + want + "'");
            cols.push_back(static_cast<Eigen::Index>(it - names.begin()));
        }
    } else {
        if (rec.channel_count() != cfg.n_channels) {
            throw ShapeError("recording has " + std::to_string(rec.channel_count()) + " channels, model expects " +
                             std::to_string(cfg.n_channels));
        }
        cols.resize(cfg.n_channels);
        std::iota(cols.begin(), cols.end(), Eigen::Index{0});
    }

    const auto wl = static_cast<Eigen::Index>(cfg.window_len);
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + cfg.window_len <= len; s += stride) starts.push_back(s);
    std::vector<WindowMatrix> windows;
    windows.reserve(starts.size());
    for (auto s : starts) windows.emplace_back(rec.frames.middleRows(static_cast<Eigen::Index>(s), wl)(Eigen::all, cols));
    std::vector<const WindowMatrix*> ptrs;
    for (const auto& w : windows) ptrs.push_back(&w);
    const auto probs = predict(model, std::span<const WindowMatrix* const>(ptrs));

    std::vector<double> series(len, probs.front());
    for (std::size_t k = 0; k < starts.size(); ++k) {
        const auto until = k + 1 < starts.size() ? starts[k + 1] : len;
        std::fill(series.begin() + static_cast<std::ptrdiff_t>(starts[k]),
                  series.begin() + static_cast<std::ptrdiff_t>(until), probs[k]);
    }
    return series;
}

} // namespace liftlab::net
