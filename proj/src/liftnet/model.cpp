#include "liftlab/error.hpp"
#include "liftlab/liftnet.hpp"
#include "liftlab/random.hpp"
#include "pass.hpp"

#include <algorithm>
#include <cmath>

namespace liftlab::net {

using Eigen::Index;
using Eigen::MatrixXd;

void ModelConfig::validate() const {
    if (window_len < 1 || n_channels < 1 || lstm_hidden < 1) throw ConfigError("model dimensions must be >= 1");
    for (auto w : dense_widths) {
        if (w < 1) throw ConfigError("dense widths must be >= 1");
    }
    if (!channel_names.empty() && channel_names.size() != n_channels) {
        throw ConfigError("channel_names has " + std::to_string(channel_names.size()) + " entries, n_channels is " +
                          std::to_string(n_channels));
    }
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(validation_split > 0.0 && validation_split < 1.0)) throw ConfigError("validation_split must be in (0, 1)");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be >= 0");
}

Model::Model(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto H = static_cast<Index>(config_.lstm_hidden);
    const auto C = static_cast<Index>(config_.n_channels);
    Index offset = 0;
    const auto add = [&](std::string name, Index rows, Index cols) {
        tensors_.push_back({std::move(name), rows, cols, offset});
        offset += rows * cols;
    };
    add("lstm.W", 4 * H, C);
    add("lstm.U", 4 * H, H);
    add("lstm.b", 4 * H, 1);
    lstm_count_ = offset;
    Index in = H;
    for (std::size_t i = 0; i < config_.dense_widths.size(); ++i) {
        const auto out = static_cast<Index>(config_.dense_widths[i]);
        add("dense" + std::to_string(i) + ".W", out, in);
        add("dense" + std::to_string(i) + ".b", out, 1);
        in = out;
    }
    add("output.W", 1, in);
    add("output.b", 1, 1);
    params_ = Eigen::VectorXd::Zero(offset);
}

const TensorInfo& Model::tensor(std::string_view name) const {
    const auto it = std::find_if(tensors_.begin(), tensors_.end(), [&](const TensorInfo& t) { return t.name == name; });
    if (it == tensors_.end()) throw ShapeError("no tensor named '" + std::string(name) + "'");
    return *it;
}

Eigen::MatrixXd Model::input_gate_weights() const {
    return view("lstm.W").topRows(static_cast<Index>(config_.lstm_hidden));
}

Model init_model(const ModelConfig& cfg) {
    Model model(cfg);
    Rng rng(cfg.seed);
    const auto fill = [&](const TensorInfo& t, double fan_in) {
        const double bound = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        auto v = model.view(t);
        for (Index j = 0; j < v.cols(); ++j) {
            for (Index i = 0; i < v.rows(); ++i) v(i, j) = dist(rng);
        }
    };
    const auto H = static_cast<double>(cfg.lstm_hidden);
    for (const auto& t : model.tensors()) {
        if (t.name == "lstm.W") {
            fill(t, static_cast<double>(cfg.n_channels));
        } else if (t.name == "lstm.U" || t.name == "lstm.b") {
            fill(t, H);
        } else {
            // Dense weight and bias share the layer's fan-in.
            const auto& w = model.tensor(t.name.substr(0, t.name.find('.')) + ".W");
            fill(t, static_cast<double>(w.cols));
        }
    }
    const auto h = static_cast<Index>(cfg.lstm_hidden);
    model.view("lstm.b").middleRows(h, h).setConstant(1.0);  // forget gate
    return model;
}

// ---------------------------------------------------------------------------

namespace detail {

void load_inputs(const Model& model, std::span<const WindowMatrix* const> windows, Pass& pass) {
    const auto& cfg = model.config();
    const auto T = static_cast<Index>(cfg.window_len);
    const auto C = static_cast<Index>(cfg.n_channels);
    const auto B = static_cast<Index>(windows.size());
    if (B == 0) throw ShapeError("empty batch");
    pass.batch = B;
    pass.x.assign(static_cast<std::size_t>(T), MatrixXd(C, B));
    for (Index b = 0; b < B; ++b) {
        const auto& w = *windows[static_cast<std::size_t>(b)];
        if (w.rows() != T || w.cols() != C) {
            throw ShapeError("window is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                             ", model expects " + std::to_string(T) + "x" + std::to_string(C));
        }
        if (!w.allFinite()) throw InputError("non-finite value in window");
        for (Index t = 0; t < T; ++t) pass.x[static_cast<std::size_t>(t)].col(b) = w.row(t).transpose();
    }
}

void run_forward(const Model& model, Pass& pass) {
    const auto& cfg = model.config();
    const auto T = static_cast<std::size_t>(cfg.window_len);
    const auto H = static_cast<Index>(cfg.lstm_hidden);
    const auto B = pass.batch;
    const auto W = model.view("lstm.W");
    const auto U = model.view("lstm.U");
    const auto bias = model.view("lstm.b");

    pass.gates.assign(T, MatrixXd(4 * H, B));
    pass.c.assign(T + 1, MatrixXd::Zero(H, B));
    pass.h.assign(T + 1, MatrixXd::Zero(H, B));
    pass.tanh_c.assign(T, MatrixXd(H, B));

    for (std::size_t t = 0; t < T; ++t) {
        auto& z = pass.gates[t];
        z.noalias() = W * pass.x[t];
        z.noalias() += U * pass.h[t];
        z.colwise() += bias.col(0);
        z.topRows(2 * H) = (1.0 + (-z.topRows(2 * H).array()).exp()).inverse().matrix();
        z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
        z.bottomRows(H) = (1.0 + (-z.bottomRows(H).array()).exp()).inverse().matrix();

        const auto i = z.topRows(H).array();
        const auto f = z.middleRows(H, H).array();
        const auto g = z.middleRows(2 * H, H).array();
        const auto o = z.bottomRows(H).array();
        pass.c[t + 1] = (f * pass.c[t].array() + i * g).matrix();
        pass.tanh_c[t] = pass.c[t + 1].array().tanh().matrix();
        pass.h[t + 1] = (o * pass.tanh_c[t].array()).matrix();
    }

    const auto n_hidden = cfg.dense_widths.size();
    pass.pre.assign(n_hidden + 1, MatrixXd());
    pass.act.assign(n_hidden, MatrixXd());
    const MatrixXd* input = &pass.h[T];
    for (std::size_t l = 0; l <= n_hidden; ++l) {
        const std::string prefix = l < n_hidden ? "dense" + std::to_string(l) : std::string("output");
        const auto Wl = model.view(prefix + ".W");
        const auto bl = model.view(prefix + ".b");
        pass.pre[l].noalias() = Wl * (*input);
        pass.pre[l].colwise() += bl.col(0);
        if (l < n_hidden) {
            if (cfg.activation == DenseActivation::Relu) {
                pass.act[l] = pass.pre[l].cwiseMax(0.0);
            } else {
                pass.act[l] = pass.pre[l].array().tanh().matrix();
            }
            input = &pass.act[l];
        }
    }
    pass.logit = pass.pre.back().row(0);
    pass.prob = pass.logit.unaryExpr([](double z) { return sigmoid(z); });
}

void run_backward(const Model& model, const Pass& pass, const Eigen::RowVectorXd& d_logit, Eigen::VectorXd* param_grad,
                  std::vector<MatrixXd>* input_grad) {
    const auto& cfg = model.config();
    const auto T = static_cast<std::size_t>(cfg.window_len);
    const auto H = static_cast<Index>(cfg.lstm_hidden);
    const auto B = pass.batch;
    const auto n_hidden = cfg.dense_widths.size();

    Eigen::VectorXd scratch;
    Eigen::VectorXd& grad = param_grad ? *param_grad : scratch;
    grad = Eigen::VectorXd::Zero(static_cast<Index>(model.parameter_count()));
    const auto grad_view = [&](std::string_view name) {
        const auto& t = model.tensor(name);
        return MutableMatrixView(grad.data() + t.offset, t.rows, t.cols);
    };

    // Dense head, last layer first.
    MatrixXd delta = d_logit;  // 1 x B
    for (std::size_t l = n_hidden + 1; l-- > 0;) {
        const std::string prefix = l < n_hidden ? "dense" + std::to_string(l) : std::string("output");
        const MatrixXd& input = l == 0 ? pass.h[T] : pass.act[l - 1];
        if (param_grad) {
            grad_view(prefix + ".W").noalias() += delta * input.transpose();
            grad_view(prefix + ".b") += delta.rowwise().sum();
        }
        MatrixXd d_input = model.view(prefix + ".W").transpose() * delta;
        if (l > 0) {
            const auto& pre = pass.pre[l - 1];
            if (cfg.activation == DenseActivation::Relu) {
                d_input = (pre.array() > 0.0).select(d_input, 0.0);
            } else {
                d_input.array() *= 1.0 - pass.act[l - 1].array().square();
            }
        }
        delta = std::move(d_input);
    }

    // LSTM, backpropagation through time.
    const auto W = model.view("lstm.W");
    const auto U = model.view("lstm.U");
    auto dW = grad_view("lstm.W");
    auto dU = grad_view("lstm.U");
    auto db = grad_view("lstm.b");
    if (input_grad) input_grad->assign(T, MatrixXd());

    MatrixXd dh = std::move(delta);  // H x B
    MatrixXd dc = MatrixXd::Zero(H, B);
    MatrixXd dz(4 * H, B);
    for (std::size_t t = T; t-- > 0;) {
        const auto& z = pass.gates[t];
        const auto i = z.topRows(H).array();
        const auto f = z.middleRows(H, H).array();
        const auto g = z.middleRows(2 * H, H).array();
        const auto o = z.bottomRows(H).array();
        const auto tc = pass.tanh_c[t].array();

        dc.array() += dh.array() * o * (1.0 - tc.square());
        dz.topRows(H) = (dc.array() * g * i * (1.0 - i)).matrix();
        dz.middleRows(H, H) = (dc.array() * pass.c[t].array() * f * (1.0 - f)).matrix();
        dz.middleRows(2 * H, H) = (dc.array() * i * (1.0 - g.square())).matrix();
        dz.bottomRows(H) = (dh.array() * tc * o * (1.0 - o)).matrix();

        if (param_grad) {
            dW.noalias() += dz * pass.x[t].transpose();
            dU.noalias() += dz * pass.h[t].transpose();
            db += dz.rowwise().sum();
        }
        if (input_grad) (*input_grad)[t].noalias() = W.transpose() * dz;
        dh.noalias() = U.transpose() * dz;
        dc = (dc.array() * f).matrix();
    }
}

} // namespace detail

// ---------------------------------------------------------------------------

double forward(const Model& model, const WindowMatrix& window) {
    const WindowMatrix* ptr = &window;
    return predict(model, std::span<const WindowMatrix* const>(&ptr, 1)).front();
}

std::vector<double> predict(const Model& model, std::span<const WindowMatrix* const> windows) {
    constexpr std::size_t kChunk = 256;
    std::vector<double> out;
    out.reserve(windows.size());
    detail::Pass pass;
    for (std::size_t begin = 0; begin < windows.size(); begin += kChunk) {
        const auto n = std::min(kChunk, windows.size() - begin);
        detail::load_inputs(model, windows.subspan(begin, n), pass);
        detail::run_forward(model, pass);
        for (Index b = 0; b < pass.batch; ++b) out.push_back(pass.prob[b]);
    }
    return out;
}

std::vector<double> predict(const Model& model, std::span<const Window> windows) {
    std::vector<const WindowMatrix*> ptrs;
    ptrs.reserve(windows.size());
    for (const auto& w : windows) ptrs.push_back(&w.data);
    return predict(model, std::span<const WindowMatrix* const>(ptrs));
}

double loss(double prob, Label label) {
    const double p = std::clamp(prob, 1e-7, 1.0 - 1e-7);
    return label == Label::Lift ? -std::log(p) : -std::log(1.0 - p);
}

namespace {

// d loss / d logit for the clamped cross-entropy.
double loss_logit_gradient(double prob, Label label) {
    if (prob < 1e-7 || prob > 1.0 - 1e-7) return 0.0;
    return prob - static_cast<double>(windowing::to_int(label));
}

} // namespace

GradientResult gradients(const Model& model, std::span<const Window> batch) {
    if (batch.empty()) throw ShapeError("empty batch");
    std::vector<const WindowMatrix*> ptrs;
    ptrs.reserve(batch.size());
    for (const auto& w : batch) ptrs.push_back(&w.data);

    detail::Pass pass;
    detail::load_inputs(model, ptrs, pass);
    detail::run_forward(model, pass);

    const auto B = static_cast<double>(batch.size());
    Eigen::RowVectorXd d_logit(pass.batch);
    GradientResult result;
    for (Index b = 0; b < pass.batch; ++b) {
        const auto& w = batch[static_cast<std::size_t>(b)];
        result.loss += loss(pass.prob[b], w.label);
        d_logit[b] = loss_logit_gradient(pass.prob[b], w.label) / B;
    }
    result.loss /= B;
    detail::run_backward(model, pass, d_logit, &result.gradient, nullptr);
    return result;
}

InputGradient input_gradient(const Model& model, const WindowMatrix& window, OutputMode mode) {
    const WindowMatrix* ptr = &window;
    detail::Pass pass;
    detail::load_inputs(model, std::span<const WindowMatrix* const>(&ptr, 1), pass);
    detail::run_forward(model, pass);

    const double p = pass.prob[0];
    Eigen::RowVectorXd d_logit(1);
    d_logit[0] = mode == OutputMode::Probability ? p * (1.0 - p) : 1.0;
    std::vector<MatrixXd> dx;
    detail::run_backward(model, pass, d_logit, nullptr, &dx);

    InputGradient out;
    out.output = mode == OutputMode::Probability ? p : pass.logit[0];
    out.gradient.resize(window.rows(), window.cols());
    for (Index t = 0; t < window.rows(); ++t) out.gradient.row(t) = dx[static_cast<std::size_t>(t)].col(0).transpose();
    return out;
}

} // namespace liftlab::net
