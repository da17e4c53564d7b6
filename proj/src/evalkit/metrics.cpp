#include "liftlab/error.hpp"
#include "liftlab/evalkit.hpp"

#include <algorithm>

namespace liftlab::eval {

ConfusionMatrix confusion(std::span<const double> scores, std::span<const Label> labels, double threshold) {
    if (scores.size() != labels.size()) {
        throw ShapeError("score/label length mismatch: " + std::to_string(scores.size()) + " vs " +
                         std::to_string(labels.size()));
    }
    if (scores.empty()) throw EmptyDatasetError("nothing to evaluate");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must lie in (0, 1)");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool predicted = scores[i] >= threshold;
        const bool actual = labels[i] == Label::Lift;
        if (predicted && actual) ++cm.tp;
        else if (predicted) ++cm.fp;
        else if (actual) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
    Metrics m;
    const auto ratio = [](std::uint64_t num, std::uint64_t den, bool& undefined) {
        undefined = den == 0;
        return undefined ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    bool unused = false;
    m.accuracy = ratio(cm.tp + cm.tn, cm.total(), unused);
    m.precision = ratio(cm.tp, cm.tp + cm.fp, m.precision_undefined);
    m.recall = ratio(cm.tp, cm.tp + cm.fn, m.recall_undefined);
    const double denom = m.precision + m.recall;
    m.f1_undefined = denom == 0.0;
    m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.precision * m.recall / denom;
    return m;
}

Evaluation evaluate(const net::Model& model, const windowing::Dataset& data, double threshold) {
    net::check_dataset(model, data);
    const auto scores = net::predict(model, data.windows);
    std::vector<Label> labels;
    labels.reserve(data.windows.size());
    for (const auto& w : data.windows) labels.push_back(w.label);
    Evaluation out;
    out.cm = confusion(scores, labels, threshold);
    out.metrics = metrics(out.cm);
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace liftlab::eval
