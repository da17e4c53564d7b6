#include "liftlab/windowing.hpp"

#include "liftlab/error.hpp"
#include "liftlab/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

namespace liftlab::windowing {

using imu::LiftInterval;

std::size_t Dataset::count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(windows.begin(), windows.end(), [&](const Window& w) { return w.label == label; }));
}

void Dataset::validate() const {
    const auto nch = static_cast<Eigen::Index>(n_channels());
    for (const auto& w : windows) {
        if (w.data.rows() != static_cast<Eigen::Index>(window_len) || w.data.cols() != nch) {
            throw ShapeError("window " + w.trial_id + "@" + std::to_string(w.start_frame) + " is " +
                             std::to_string(w.data.rows()) + "x" + std::to_string(w.data.cols()) +
                             ", dataset expects " + std::to_string(window_len) + "x" + std::to_string(nch));
        }
        if (!w.data.allFinite()) throw InputError("non-finite value in window " + w.trial_id);
    }
}

std::int64_t max_core_overlap(std::int64_t start, std::int64_t window_len, std::span<const LiftInterval> lifts,
                              double rate_hz, double lift_core_s) {
    const auto core_len = imu::round_half_up(lift_core_s * rate_hz);
    const auto end = start + window_len;
    std::int64_t best = 0;
    for (const auto& lift : lifts) {
        const auto overlap = std::min(end, lift.bol_frame + core_len) - std::max(start, lift.bol_frame);
        best = std::max(best, overlap);
    }
    return best;
}

Label label_window(std::int64_t start, std::int64_t window_len, std::span<const LiftInterval> lifts, double rate_hz,
                   double lift_core_s, double overlap_fraction) {
    if (!(overlap_fraction > 0.0 && overlap_fraction <= 1.0)) {
        throw ConfigError("overlap_fraction must be in (0, 1]");
    }
    const auto overlap = max_core_overlap(start, window_len, lifts, rate_hz, lift_core_s);
    const double needed = overlap_fraction * static_cast<double>(window_len);
    return static_cast<double>(overlap) >= needed - 1e-9 ? Label::Lift : Label::NonLift;
}

std::size_t window_count(std::size_t len, std::size_t window_len, std::size_t stride) {
    if (window_len == 0 || stride == 0 || window_len > len) return 0;
    return (len - window_len) / stride + 1;
}

std::vector<Window> slice_windows(const imu::LabeledRecording& lr, std::size_t window_len, std::size_t stride,
                                  const LabelOptions& options) {
    const auto& rec = lr.recording;
    const auto len = rec.frame_count();
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (window_len < 1 || window_len > len) {
        throw EmptyDatasetError("window of " + std::to_string(window_len) + " frames does not fit trial '" +
                                rec.trial_id + "' of " + std::to_string(len) + " frames");
    }
    const std::span<const LiftInterval> lifts =
        lr.all_nonlift ? std::span<const LiftInterval>{} : std::span<const LiftInterval>(lr.lifts);
    const auto wl = static_cast<std::int64_t>(window_len);

    std::vector<Window> out;
    out.reserve(window_count(len, window_len, stride));
    for (std::size_t start = 0; start + window_len <= len; start += stride) {
        const auto s = static_cast<std::int64_t>(start);
        if (options.ambiguous_margin > 0.0) {
            const auto overlap = max_core_overlap(s, wl, lifts, rec.sample_rate_hz, options.lift_core_s);
            const double frac = static_cast<double>(overlap) / static_cast<double>(wl);
            if (overlap > 0 && std::abs(frac - options.overlap_fraction) < options.ambiguous_margin) continue;
        }
        Window w;
        w.trial_id = rec.trial_id;
        w.start_frame = s;
        w.data = rec.frames.middleRows(s, wl);
        w.label = label_window(s, wl, lifts, rec.sample_rate_hz, options.lift_core_s, options.overlap_fraction);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<Window> slice_all(std::span<const imu::LabeledRecording> recordings, std::size_t window_len,
                              std::size_t stride, const LabelOptions& options) {
    std::vector<Window> all;
    for (const auto& lr : recordings) {
        if (!recordings.empty() && lr.recording.sensors != recordings.front().recording.sensors) {
            throw SchemaError("trial '" + lr.recording.trial_id + "' has a different sensor layout");
        }
        auto ws = slice_windows(lr, window_len, stride, options);
        all.insert(all.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
    }
    return all;
}

Dataset make_dataset(std::vector<Window> windows, std::size_t window_len, std::vector<imu::SensorId> sensors,
                     Provenance provenance) {
    Dataset ds;
    ds.windows = std::move(windows);
    ds.window_len = window_len;
    ds.sensors = std::move(sensors);
    ds.provenance = std::move(provenance);
    ds.validate();
    return ds;
}

Dataset balance(std::vector<Window> windows, std::size_t window_len, std::vector<imu::SensorId> sensors,
                std::uint64_t seed) {
    std::vector<std::size_t> lift_idx, nonlift_idx;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        (windows[i].label == Label::Lift ? lift_idx : nonlift_idx).push_back(i);
    }
    if (lift_idx.empty()) throw ClassMissingError("no Lift windows to balance");
    if (nonlift_idx.empty()) throw ClassMissingError("no NonLift windows to balance");

    Rng rng(seed);
    auto& majority = lift_idx.size() > nonlift_idx.size() ? lift_idx : nonlift_idx;
    const auto keep = std::min(lift_idx.size(), nonlift_idx.size());
    std::shuffle(majority.begin(), majority.end(), rng);
    majority.resize(keep);

    std::vector<std::size_t> chosen;
    chosen.reserve(2 * keep);
    chosen.insert(chosen.end(), lift_idx.begin(), lift_idx.end());
    chosen.insert(chosen.end(), nonlift_idx.begin(), nonlift_idx.end());
    std::sort(chosen.begin(), chosen.end());
    std::shuffle(chosen.begin(), chosen.end(), rng);

    std::vector<Window> out;
    out.reserve(chosen.size());
    for (auto i : chosen) out.push_back(std::move(windows[i]));

    Provenance prov;
    prov.seed = seed;
    prov.params = "balanced=1;per_class=" + std::to_string(keep);
    return make_dataset(std::move(out), window_len, std::move(sensors), std::move(prov));
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation fraction must be in (0, 1)");
    }
    std::vector<std::size_t> lift_idx, nonlift_idx;
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        (ds.windows[i].label == Label::Lift ? lift_idx : nonlift_idx).push_back(i);
    }
    Rng rng(seed);
    std::vector<char> to_val(ds.windows.size(), 0);
    for (auto* cls : {&lift_idx, &nonlift_idx}) {
        std::shuffle(cls->begin(), cls->end(), rng);
        const auto n_val = static_cast<std::size_t>(
            imu::round_half_up(validation_fraction * static_cast<double>(cls->size())));
        for (std::size_t k = 0; k < n_val && k < cls->size(); ++k) to_val[(*cls)[k]] = 1;
    }

    Dataset train, val;
    for (auto* part : {&train, &val}) {
        part->window_len = ds.window_len;
        part->sensors = ds.sensors;
        part->provenance = ds.provenance;
    }
    for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        (to_val[i] ? val : train).windows.push_back(ds.windows[i]);
    }
    if (train.windows.empty() || val.windows.empty()) {
        throw SplitError("validation fraction " + std::to_string(validation_fraction) + " leaves a side empty (" +
                         std::to_string(ds.windows.size()) + " windows)");
    }
    return {std::move(train), std::move(val)};
}

Dataset select_sensors(const Dataset& ds, std::span<const imu::SensorId> subset) {
    if (subset.empty()) throw ConfigError("sensor subset is empty");
    std::vector<Eigen::Index> cols;
    for (auto s : subset) {
        const auto it = std::find(ds.sensors.begin(), ds.sensors.end(), s);
        if (it == ds.sensors.end()) {
            throw SensorMissingError("dataset has no sensor '" + std::string(imu::sensor_name(s)) + "'");
        }
        const auto base = static_cast<Eigen::Index>(it - ds.sensors.begin()) * imu::kChannelsPerSensor;
        for (int c = 0; c < imu::kChannelsPerSensor; ++c) cols.push_back(base + c);
    }
    Dataset out;
    out.window_len = ds.window_len;
    out.sensors.assign(subset.begin(), subset.end());
    out.provenance = ds.provenance;
    out.provenance.params += ";sensors=" + imu::join_sensor_list(subset, '+');
    out.windows.reserve(ds.windows.size());
    for (const auto& w : ds.windows) {
        Window copy;
        copy.trial_id = w.trial_id;
        copy.start_frame = w.start_frame;
        copy.label = w.label;
        copy.data = w.data(Eigen::all, cols);
        out.windows.push_back(std::move(copy));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

} // namespace

void write_dataset(std::ostream& out, const Dataset& ds) {
    out << "#window_len=" << ds.window_len << '\n'
        << "#sensors=" << imu::join_sensor_list(ds.sensors) << '\n'
        << "#seed=" << ds.provenance.seed << '\n'
        << "#params=" << ds.provenance.params << '\n';
    char buf[32];
    std::string row;
    for (const auto& w : ds.windows) {
        row = w.trial_id + "," + std::to_string(w.start_frame) + "," + std::to_string(to_int(w.label));
        for (Eigen::Index r = 0; r < w.data.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.data.cols(); ++c) {
                std::snprintf(buf, sizeof buf, ",%.17g", w.data(r, c));
                row += buf;
            }
        }
        row += '\n';
        out << row;
    }
}

void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write dataset '" + path + "'");
    write_dataset(out, ds);
}

Dataset parse_dataset(std::istream& in) {
    Dataset ds;
    bool have_len = false, have_sensors = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto eq = t.find('=');
            if (eq == std::string_view::npos) throw ParseError("malformed dataset header line " + std::to_string(line_no));
            const auto key = trim(t.substr(1, eq - 1));
            const auto value = trim(t.substr(eq + 1));
            if (key == "window_len") {
                auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), ds.window_len);
                if (ec != std::errc{} || ds.window_len == 0) throw ParseError("malformed window_len");
                have_len = true;
            } else if (key == "sensors") {
                ds.sensors = imu::parse_sensor_list(value);
                have_sensors = true;
            } else if (key == "seed") {
                std::from_chars(value.data(), value.data() + value.size(), ds.provenance.seed);
            } else if (key == "params") {
                ds.provenance.params = value;
            }
            continue;
        }
        if (!have_len || !have_sensors) throw ParseError("dataset rows before header");
        const auto width = ds.window_len * ds.n_channels();
        Window w;
        w.data.resize(static_cast<Eigen::Index>(ds.window_len), static_cast<Eigen::Index>(ds.n_channels()));
        std::size_t field = 0;
        std::size_t pos = 0;
        while (pos <= t.size()) {
            auto next = t.find(',', pos);
            if (next == std::string_view::npos) next = t.size();
            const auto f = trim(t.substr(pos, next - pos));
            if (field == 0) {
                w.trial_id = f;
            } else if (field == 1) {
                auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), w.start_frame);
                if (ec != std::errc{}) throw ParseError("line " + std::to_string(line_no) + ": bad start_frame");
            } else if (field == 2) {
                if (f == "1") {
                    w.label = Label::Lift;
                } else if (f == "0") {
                    w.label = Label::NonLift;
                } else {
                    throw ParseError("line " + std::to_string(line_no) + ": bad label");
                }
            } else {
                const auto k = field - 3;
                if (k >= width) throw SchemaError("line " + std::to_string(line_no) + ": too many values");
                double v = 0.0;
                auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
                if (ec != std::errc{} || p != f.data() + f.size()) {
                    throw ParseError("line " + std::to_string(line_no) + ": non-numeric value");
                }
                const auto nch = ds.n_channels();
                w.data(static_cast<Eigen::Index>(k / nch), static_cast<Eigen::Index>(k % nch)) = v;
            }
            ++field;
            pos = next + 1;
        }
        if (field != width + 3) {
            throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) + " values");
        }
        ds.windows.push_back(std::move(w));
    }
    if (!have_len || !have_sensors) throw ParseError("dataset header incomplete");
    ds.validate();
    return ds;
}

Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset '" + path + "'");
    return parse_dataset(in);
}

} // namespace liftlab::windowing
