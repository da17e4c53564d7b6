#include "liftlab_cli.hpp"

#include "corpus.hpp"
#include "run_context.hpp"

#include "liftlab/attribution.hpp"
#include "liftlab/error.hpp"
#include "liftlab/evalkit.hpp"
#include "liftlab/fusion_filters.hpp"
#include "liftlab/liftnet.hpp"
#include "liftlab/synthgen.hpp"
#include "liftlab/windowing.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <thread>

namespace liftlab::cli {

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Option groups

struct WindowOpts {
    std::size_t window_len = 10;
    std::size_t stride = 0;  // 0: command default
    double lift_core_s = windowing::LabelOptions{}.lift_core_s;
    double overlap = windowing::LabelOptions{}.overlap_fraction;
    double ambiguous_margin = 0.0;
    std::string eol_policy = "provided";
    std::string sensors = "all";
    std::string filter = "none";
    double mahony_kp = fusion::MahonyParams{}.kp;
    double mahony_ki = fusion::MahonyParams{}.ki;
    double ekf_gyro_var = fusion::EkfParams{}.gyro_noise_var;
    double ekf_accel_var = fusion::EkfParams{}.accel_noise_var;
    bool balance = true;
    std::uint64_t seed = 0;

    windowing::LabelOptions labels() const { return {lift_core_s, overlap, ambiguous_margin}; }
};

struct ModelOpts {
    std::size_t hidden = net::ModelConfig{}.lstm_hidden;
    std::vector<std::size_t> dense = net::ModelConfig{}.dense_widths;
    std::string activation = "relu";
    std::size_t epochs = net::TrainConfig{}.epochs;
    std::size_t batch_size = net::TrainConfig{}.batch_size;
    double validation_split = net::TrainConfig{}.validation_split;
    double learning_rate = net::TrainConfig{}.learning_rate;
    std::uint64_t seed = 0;
};

struct DataOpts {
    std::string data;
    std::string labels;
    std::string dataset;
};

struct SweepData {
    std::string train_data, train_labels, eval_data, eval_labels;
};

imu::EolPolicy parse_eol_policy(const std::string& s) {
    if (s == "provided") return imu::EolPolicy::UseProvided;
    if (s == "derive") return imu::EolPolicy::DeriveFromBol;
    throw CLI::ValidationError("--eol-policy", "expected provided|derive, got '" + s + "'");
}

std::vector<imu::SensorId> parse_sensors(const std::string& s) {
    if (s == "all") return {imu::kAllSensors.begin(), imu::kAllSensors.end()};
    auto list = imu::parse_sensor_list(s);
    if (list.empty()) throw ConfigError("empty sensor list");
    return list;
}

net::DenseActivation parse_activation(const std::string& s) {
    if (s == "relu") return net::DenseActivation::Relu;
    if (s == "tanh") return net::DenseActivation::Tanh;
    throw CLI::ValidationError("--activation", "expected relu|tanh, got '" + s + "'");
}

fusion::FilterKind filter_kind(const std::string& name, const WindowOpts& w) {
    switch (fusion::parse_filter_type(name)) {
    case fusion::FilterKind::Type::Mahony:
        return fusion::FilterKind::make_mahony({w.mahony_kp, w.mahony_ki, false});
    case fusion::FilterKind::Type::Ekf: {
        fusion::EkfParams p;
        p.gyro_noise_var = w.ekf_gyro_var;
        p.accel_noise_var = w.ekf_accel_var;
        return fusion::FilterKind::make_ekf(p);
    }
    case fusion::FilterKind::Type::None:
        break;
    }
    return fusion::FilterKind::none();
}

void add_data_options(CLI::App* app, DataOpts& d, bool allow_dataset) {
    app->add_option("--data", d.data, "Directory of *.imu.csv recordings");
    app->add_option("--labels", d.labels, "Label CSV (default: <data>/labels.csv)");
    if (allow_dataset) app->add_option("--dataset", d.dataset, "Windowed dataset file (instead of --data)");
}

void add_labeling_options(CLI::App* app, WindowOpts& w) {
    app->add_option("--lift-core", w.lift_core_s, "Lift core length in seconds")->capture_default_str();
    app->add_option("--overlap", w.overlap, "Core overlap fraction that makes a window a lift")->capture_default_str();
    app->add_option("--ambiguous-margin", w.ambiguous_margin, "Drop windows this close to the overlap threshold")
        ->capture_default_str();
    app->add_option("--eol-policy", w.eol_policy, "provided|derive")->capture_default_str();
}

void add_filter_options(CLI::App* app, WindowOpts& w, bool with_kind) {
    if (with_kind) app->add_option("--filter", w.filter, "none|mahony|ekf")->capture_default_str();
    app->add_option("--mahony-kp", w.mahony_kp)->capture_default_str();
    app->add_option("--mahony-ki", w.mahony_ki)->capture_default_str();
    app->add_option("--ekf-gyro-var", w.ekf_gyro_var)->capture_default_str();
    app->add_option("--ekf-accel-var", w.ekf_accel_var)->capture_default_str();
}

void add_window_options(CLI::App* app, WindowOpts& w) {
    app->add_option("--window-len", w.window_len, "Frames per window")->capture_default_str();
    app->add_option("--stride", w.stride, "Frames between window starts (0: command default)")->capture_default_str();
    app->add_option("--sensors", w.sensors, "Comma-separated sensors or 'all'")->capture_default_str();
    app->add_flag("--balance,!--no-balance", w.balance, "Down-sample the majority class")->default_str("true");
    app->add_option("--window-seed", w.seed, "Seed for balancing")->capture_default_str();
    add_labeling_options(app, w);
    add_filter_options(app, w, true);
}

void add_model_options(CLI::App* app, ModelOpts& m, bool with_grid_axes) {
    app->add_option("--hidden", m.hidden, "LSTM hidden units")->capture_default_str();
    app->add_option("--dense", m.dense, "Dense layer widths")->delimiter(',')->capture_default_str();
    app->add_option("--activation", m.activation, "relu|tanh")->capture_default_str();
    app->add_option("--lr", m.learning_rate, "Adam learning rate")->capture_default_str();
    if (!with_grid_axes) {
        app->add_option("--epochs", m.epochs)->capture_default_str();
        app->add_option("--batch-size", m.batch_size)->capture_default_str();
        app->add_option("--validation-split", m.validation_split)->capture_default_str();
        app->add_option("--seed", m.seed, "Model/training seed")->capture_default_str();
    }
}

net::ModelConfig model_config(const ModelOpts& m) {
    net::ModelConfig mc;
    mc.lstm_hidden = m.hidden;
    mc.dense_widths = m.dense;
    mc.activation = parse_activation(m.activation);
    mc.seed = m.seed;
    return mc;
}

net::TrainConfig train_config(const ModelOpts& m) {
    net::TrainConfig tc;
    tc.batch_size = m.batch_size;
    tc.epochs = m.epochs;
    tc.validation_split = m.validation_split;
    tc.learning_rate = m.learning_rate;
    tc.seed = m.seed;
    return tc;
}

std::string real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out << text;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Windows a labeled corpus per the options; stride 0 falls back to `default_stride`.
windowing::Dataset build_dataset(std::vector<imu::LabeledRecording> corpus, const WindowOpts& w,
                                 std::size_t default_stride, RunContext& ctx) {
    const auto kind = filter_kind(w.filter, w);
    kind.validate();
    if (kind.type != fusion::FilterKind::Type::None) {
        for (auto& lr : corpus) lr.recording = fusion::apply_filter(lr.recording, kind);
    }
    const auto stride = w.stride ? w.stride : default_stride;
    auto windows = windowing::slice_all(corpus, w.window_len, stride, w.labels());
    auto layout = corpus.front().recording.sensors;
    ctx.seed("window", w.seed);
    auto ds = w.balance ? windowing::balance(std::move(windows), w.window_len, layout, w.seed)
                        : windowing::make_dataset(std::move(windows), w.window_len, layout);
    const auto sensors = parse_sensors(w.sensors);
    if (sensors != layout) ds = windowing::select_sensors(ds, sensors);
    ds.provenance.seed = w.seed;
    ds.provenance.params = "window_len=" + std::to_string(w.window_len) + ";stride=" + std::to_string(stride) +
                           ";filter=" + w.filter + ";balance=" + (w.balance ? "1" : "0") +
                           ";lift_core=" + real(w.lift_core_s) + ";overlap=" + real(w.overlap) +
                           ";ambiguous_margin=" + real(w.ambiguous_margin);
    return ds;
}

// A dataset from either --dataset or --data/--labels.
windowing::Dataset load_or_build(const DataOpts& d, const WindowOpts& w, std::size_t default_stride,
                                 RunContext& ctx) {
    if (!d.dataset.empty()) {
        if (!d.data.empty()) throw CLI::ValidationError("--dataset", "give either --dataset or --data, not both");
        return windowing::read_dataset(ctx.input(d.dataset).string());
    }
    if (d.data.empty()) throw CLI::ValidationError("--data", "one of --dataset or --data is required");
    return build_dataset(load_corpus(d.data, d.labels, parse_eol_policy(w.eol_policy), ctx), w, default_stride, ctx);
}

// ---------------------------------------------------------------------------
// Commands

struct SynthOpts {
    std::size_t trials = 20;
    std::string mode = "trainlike";
    std::uint64_t seed = 0;
    double duration_s = synth::CorpusTemplate{}.duration_s;
    std::size_t lifts = synth::CorpusTemplate{}.lifts_per_trial;
    double accel_noise = synth::CorpusTemplate{}.noise.accel_sigma;
    double gyro_noise = synth::CorpusTemplate{}.noise.gyro_sigma;
    double distractor_gain = synth::DistractorRule{}.gyro_gain;
    std::string distractor_sensors = "right_upper_arm";
    bool no_distractor = false;
};

void cmd_synth(const SynthOpts& o, RunContext& ctx, std::ostream& out) {
    synth::CorpusTemplate tmpl;
    tmpl.duration_s = o.duration_s;
    tmpl.lifts_per_trial = o.lifts;
    tmpl.noise = {o.accel_noise, o.gyro_noise};
    if (o.no_distractor) {
        tmpl.distractor.reset();
    } else {
        tmpl.distractor->gyro_gain = o.distractor_gain;
        tmpl.distractor->sensors = parse_sensors(o.distractor_sensors);
    }
    ctx.seed("corpus", o.seed);
    const auto corpus = synth::generate_corpus(tmpl, o.trials, o.seed, synth::parse_corpus_mode(o.mode));
    std::vector<imu::RawLabel> labels;
    for (const auto& trial : corpus) {
        imu::write_recording(ctx.output(trial.recording.trial_id + kRecordingSuffix).string(), trial.recording);
        const auto raw = trial.raw_labels();
        labels.insert(labels.end(), raw.begin(), raw.end());
    }
    imu::write_labels(ctx.output(kLabelFile).string(), labels);
    out << "wrote " << corpus.size() << " recordings and " << labels.size() << " labels to " << ctx.out_dir().string()
        << '\n';
}

void cmd_validate(const DataOpts& d, const WindowOpts& w, RunContext& ctx, std::ostream& out) {
    auto recordings = load_recordings(d.data, ctx);
    const auto label_file = resolve_labels(d.data, d.labels, false);
    std::vector<imu::LabeledRecording> labeled;
    if (label_file) {
        labeled = label_recordings(recordings, imu::read_labels(ctx.input(*label_file).string()),
                                   parse_eol_policy(w.eol_policy));
    }
    std::string csv = "trial,subject,frames,rate_hz,sensors,start,lifts\n";
    for (std::size_t i = 0; i < recordings.size(); ++i) {
        const auto& r = recordings[i];
        csv += r.trial_id + "," + r.subject_id + "," + std::to_string(r.frame_count()) + "," +
               real(r.sample_rate_hz) + "," + imu::join_sensor_list(r.sensors, '+') + "," +
               r.start_time_of_day().to_string() + "," +
               (label_file ? std::to_string(labeled[i].lifts.size()) : std::string("-")) + "\n";
    }
    write_text(ctx.output("validation.csv"), csv);
    out << recordings.size() << " recordings valid" << (label_file ? ", labels aligned" : "") << '\n';
}

void cmd_sync(const DataOpts& d, const WindowOpts& w, RunContext& ctx, std::ostream& out) {
    const auto corpus = load_corpus(d.data, d.labels, parse_eol_policy(w.eol_policy), ctx);
    std::string csv = "trial,lift,bol_frame,eol_frame\n";
    std::size_t n = 0;
    for (const auto& lr : corpus) {
        for (std::size_t k = 0; k < lr.lifts.size(); ++k) {
            csv += lr.recording.trial_id + "," + std::to_string(k) + "," + std::to_string(lr.lifts[k].bol_frame) + "," +
                   std::to_string(lr.lifts[k].eol_frame) + "\n";
            ++n;
        }
    }
    write_text(ctx.output("frames.csv"), csv);
    out << "aligned " << n << " lifts across " << corpus.size() << " recordings\n";
}

struct OffsetOpts {
    std::optional<std::int64_t> offset;
    std::string model;
    std::int64_t max_lag = 25;
    std::size_t score_stride = 1;
};

void cmd_fix_offset(const DataOpts& d, const WindowOpts& w, const OffsetOpts& o, RunContext& ctx,
                    std::ostream& out) {
    if (o.offset.has_value() == !o.model.empty()) {
        throw CLI::ValidationError("fix-offset", "give exactly one of --offset or --model");
    }
    if (o.max_lag < 0) throw CLI::ValidationError("--max-lag", "must be >= 0");
    const auto corpus = load_corpus(d.data, d.labels, parse_eol_policy(w.eol_policy), ctx);
    std::optional<net::Model> model;
    if (!o.model.empty()) model = net::load_model(ctx.input(o.model).string());

    std::vector<imu::RawLabel> labels;
    std::string report = "trial,offset_frames,lifts\n";
    for (const auto& lr : corpus) {
        std::int64_t offset = o.offset.value_or(0);
        if (model) {
            const auto scores = net::score_recording(*model, lr.recording, o.score_stride);
            offset = imu::estimate_time_offset(scores, lr, o.max_lag);
        }
        const auto fixed = imu::apply_time_offset(lr, offset);
        for (const auto& lift : fixed.lifts) labels.push_back(imu::interval_to_label(fixed.recording, lift));
        report += lr.recording.trial_id + "," + std::to_string(offset) + "," + std::to_string(fixed.lifts.size()) + "\n";
    }
    // Register both outputs first so a refused overwrite leaves nothing behind.
    const auto label_path = ctx.output(kLabelFile);
    const auto report_path = ctx.output("offsets.csv");
    write_text(report_path, report);
    imu::write_labels(label_path.string(), labels);
    out << "shifted labels of " << corpus.size() << " recordings\n";
}

struct PlacementOpts {
    std::string sensor;
    std::string reference = "waist";
    std::size_t still_begin = 0;
    std::size_t still_frames = 50;
    double threshold_deg = imu::PlacementCheckOptions{}.threshold_deg;
    bool apply = false;
};

void cmd_fix_placement(const DataOpts& d, const PlacementOpts& o, RunContext& ctx, std::ostream& out) {
    const auto suspect = imu::parse_sensor(o.sensor);
    const auto reference = imu::parse_sensor(o.reference);
    if (!suspect) throw CLI::ValidationError("--sensor", "unknown sensor '" + o.sensor + "'");
    if (!reference) throw CLI::ValidationError("--reference", "unknown sensor '" + o.reference + "'");
    const auto recordings = load_recordings(d.data, ctx);
    std::string report = "trial,sensor,anomaly,r00,r01,r02,r10,r11,r12,r20,r21,r22\n";
    std::size_t found = 0;
    for (const auto& rec : recordings) {
        const imu::FrameRange still{o.still_begin, o.still_begin + o.still_frames};
        const auto fix = imu::detect_placement_anomaly(rec, *suspect, *reference, still, {o.threshold_deg});
        report += rec.trial_id + "," + std::string(imu::sensor_name(*suspect)) + "," + (fix ? "1" : "0");
        const imu::Mat3 r = fix ? fix->rotation() : imu::Mat3::Identity();
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) report += "," + real(r(i, j));
        }
        report += "\n";
        if (fix) ++found;
        if (o.apply) {
            const auto repaired = fix ? imu::apply_placement_fix(rec, *fix) : rec;
            imu::write_recording(ctx.output(rec.trial_id + kRecordingSuffix).string(), repaired);
        }
    }
    write_text(ctx.output("placement.csv"), report);
    out << found << " of " << recordings.size() << " recordings flagged" << (o.apply ? " and repaired" : "") << '\n';
}

void cmd_window(const DataOpts& d, const WindowOpts& w, RunContext& ctx, std::ostream& out) {
    if (d.data.empty()) throw CLI::ValidationError("--data", "required");
    const auto ds = build_dataset(load_corpus(d.data, d.labels, parse_eol_policy(w.eol_policy), ctx), w,
                                  w.window_len, ctx);
    windowing::write_dataset(ctx.output("windows.csv").string(), ds);
    out << ds.windows.size() << " windows (" << ds.count(windowing::Label::Lift) << " lift)\n";
}

void cmd_train(const DataOpts& d, const WindowOpts& w, const ModelOpts& m, RunContext& ctx, std::ostream& out) {
    const auto ds = load_or_build(d, w, w.window_len, ctx);
    auto mc = model_config(m);
    mc.window_len = ds.window_len;
    mc.n_channels = ds.n_channels();
    mc.channel_names = imu::channel_names(ds.sensors);
    ctx.seed("model", m.seed);
    auto [model, history] = net::train(net::init_model(mc), ds, train_config(m));

    std::string csv = "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    for (std::size_t e = 0; e < history.train_loss.size(); ++e) {
        csv += std::to_string(e + 1) + "," + real(history.train_loss[e]) + "," + real(history.train_accuracy[e]) +
               "," + real(history.val_loss[e]) + "," + real(history.val_accuracy[e]) + "\n";
    }
    net::save_model(ctx.output("model.json").string(), model);
    write_text(ctx.output("history.csv"), csv);
    out << "trained on " << ds.windows.size() << " windows; final val accuracy "
        << (history.val_accuracy.empty() ? 0.0 : history.val_accuracy.back()) << '\n';
}

void cmd_finetune(const DataOpts& d, const WindowOpts& w, const std::string& model_path,
                  net::FineTuneOptions opts, std::optional<double> lr, RunContext& ctx, std::ostream& out) {
    const auto ds = load_or_build(d, w, w.window_len, ctx);
    auto model = net::load_model(ctx.input(model_path).string(), imu::channel_names(ds.sensors));
    opts.learning_rate = lr;
    ctx.seed("finetune", opts.seed);
    model = net::fine_tune(std::move(model), ds, opts);
    net::save_model(ctx.output("model.json").string(), model);
    out << "fine-tuned on " << ds.windows.size() << " windows\n";
}

void cmd_eval(const DataOpts& d, const WindowOpts& w, const std::string& model_path, double threshold,
              RunContext& ctx, std::ostream& out) {
    const auto ds = load_or_build(d, w, 1, ctx);
    const auto model = net::load_model(ctx.input(model_path).string(), imu::channel_names(ds.sensors));
    eval::CatalogRow row;
    row.experiment = "eval";
    row.params = {{"model", fs::path(model_path).filename().string()},
                  {"threshold", real(threshold)},
                  {"windows", std::to_string(ds.windows.size())}};
    row.eval = eval::evaluate(model, ds, threshold);
    row.train = row.eval.metrics;
    row.seed = model.config().seed;
    const std::vector<eval::CatalogRow> rows{row};
    write_text(ctx.output("catalog.csv"), eval::catalog_csv(rows));
    const auto& m = row.eval.metrics;
    out << "accuracy " << m.accuracy << " precision " << m.precision << " recall " << m.recall << " f1 " << m.f1
        << '\n';
}

struct SweepOpts {
    SweepData data;
    ModelOpts model;
    WindowOpts window;
    std::size_t train_stride = 0;
    std::size_t eval_stride = 1;
    bool balance_eval = true;
    double threshold = 0.5;
    std::vector<std::uint64_t> seeds{0};
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
};

void add_sweep_options(CLI::App* app, SweepOpts& s) {
    app->add_option("--train-data", s.data.train_data, "Training corpus directory")->required();
    app->add_option("--train-labels", s.data.train_labels);
    app->add_option("--eval-data", s.data.eval_data, "Evaluation corpus directory")->required();
    app->add_option("--eval-labels", s.data.eval_labels);
    app->add_option("--train-stride", s.train_stride, "0: window length")->capture_default_str();
    app->add_option("--eval-stride", s.eval_stride)->capture_default_str()->check(CLI::PositiveNumber);
    app->add_flag("--balance-eval,!--no-balance-eval", s.balance_eval)->default_str("true");
    app->add_option("--threshold", s.threshold)->capture_default_str();
    app->add_option("--seeds", s.seeds, "Replicate base seeds")->delimiter(',')->capture_default_str();
    app->add_option("--jobs", s.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    add_model_options(app, s.model, true);
    add_labeling_options(app, s.window);
}

eval::DataSources load_sources(const SweepOpts& s, RunContext& ctx) {
    const auto policy = parse_eol_policy(s.window.eol_policy);
    eval::DataSources src;
    src.train = load_corpus(s.data.train_data, s.data.train_labels, policy, ctx);
    src.eval = load_corpus(s.data.eval_data, s.data.eval_labels, policy, ctx);
    return src;
}

eval::ExperimentConfig experiment_config(const SweepOpts& s, RunContext& ctx) {
    eval::ExperimentConfig cfg;
    cfg.model = model_config(s.model);
    cfg.train = train_config(s.model);
    cfg.window_len = s.window.window_len;
    if (s.train_stride) cfg.train_stride = s.train_stride;
    cfg.eval_stride = s.eval_stride;
    cfg.labels = s.window.labels();
    cfg.balance_eval = s.balance_eval;
    cfg.threshold = s.threshold;
    cfg.seeds = s.seeds;
    cfg.jobs = s.jobs;
    for (std::size_t i = 0; i < s.seeds.size(); ++i) ctx.seed("replicate" + std::to_string(i), s.seeds[i]);
    return cfg;
}

void write_sweep(const std::vector<eval::CatalogRow>& rows, const std::string& group, RunContext& ctx,
                 std::ostream& out) {
    write_text(ctx.output("catalog.csv"), eval::catalog_csv(rows));
    const auto summary = eval::summarize(rows, group);
    write_text(ctx.output("summary.csv"), eval::summary_csv(summary));
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.status != "ok";
    out << rows.size() << " rows (" << failed << " failed)\n";
    for (const auto& s : summary) {
        out << "  " << group << "=" << s.group << ": median eval f1 " << s.median_eval_f1 << ", max "
            << s.max_eval_f1 << '\n';
    }
}

struct GridOpts {
    std::vector<std::size_t> batch_sizes{32};
    std::vector<std::size_t> window_lens{10};
    std::vector<std::size_t> epochs{30};
    std::vector<double> validation_splits{0.2};
    std::string group_by = "window_len";
};

void cmd_grid(const SweepOpts& s, const GridOpts& g, RunContext& ctx, std::ostream& out) {
    const auto src = load_sources(s, ctx);
    const auto cfg = experiment_config(s, ctx);
    const eval::GridAxes axes{g.batch_sizes, g.window_lens, g.epochs, g.validation_splits};
    write_sweep(eval::grid_search(axes, src, cfg), g.group_by, ctx, out);
}

void cmd_ablate(const SweepOpts& s, const std::vector<std::string>& subset_specs, RunContext& ctx,
                std::ostream& out) {
    std::vector<std::vector<imu::SensorId>> subsets;
    for (const auto& spec : subset_specs) subsets.push_back(parse_sensors(spec));
    if (subsets.empty()) subsets = eval::default_ablation_subsets();
    const auto src = load_sources(s, ctx);
    auto cfg = experiment_config(s, ctx);
    write_sweep(eval::ablation_sweep(subsets, src, cfg), "sensors", ctx, out);
}

void cmd_filter_compare(const SweepOpts& s, const std::vector<std::string>& names, RunContext& ctx,
                        std::ostream& out) {
    std::vector<fusion::FilterKind> kinds;
    for (const auto& n : names) kinds.push_back(filter_kind(n, s.window));
    const auto src = load_sources(s, ctx);
    const auto cfg = experiment_config(s, ctx);
    write_sweep(eval::filter_compare(kinds, src, cfg), "filter", ctx, out);
}

struct SaliencyOpts {
    std::string model;
    std::string label_class = "all";
    std::size_t limit = 0;
    std::size_t examples = 0;
    std::string normalization = "maxone";
};

void cmd_saliency(const DataOpts& d, const WindowOpts& w, const SaliencyOpts& o, RunContext& ctx,
                  std::ostream& out) {
    const auto ds = load_or_build(d, w, w.window_len, ctx);
    const auto names = imu::channel_names(ds.sensors);
    const auto model = net::load_model(ctx.input(o.model).string(), names);
    attribution::SaliencyOptions opts;
    if (o.normalization == "raw") opts.normalization = attribution::Normalization::Raw;
    else if (o.normalization != "maxone") throw CLI::ValidationError("--normalization", "expected maxone|raw");

    std::vector<windowing::Window> picked;
    for (const auto& win : ds.windows) {
        const bool keep = o.label_class == "all" || (o.label_class == "lift" && win.label == windowing::Label::Lift) ||
                          (o.label_class == "nonlift" && win.label == windowing::Label::NonLift);
        if (o.label_class != "all" && o.label_class != "lift" && o.label_class != "nonlift") {
            throw CLI::ValidationError("--class", "expected all|lift|nonlift");
        }
        if (keep) picked.push_back(win);
        if (o.limit && picked.size() == o.limit) break;
    }
    if (picked.empty()) throw EmptyDatasetError("no windows of class '" + o.label_class + "'");

    const auto maps = attribution::saliency_all(model, picked, opts);
    const auto ranking = attribution::aggregate_saliency(maps, names);
    const auto mean = attribution::mean_map(maps);
    const auto art = attribution::render_heatmap(mean, names);
    write_text(ctx.output("saliency_mean.pgm"), art.pgm);
    write_text(ctx.output("saliency_mean.csv"), art.csv);
    write_text(ctx.output("ranking.csv"), attribution::ranking_csv(ranking));
    for (std::size_t i = 0; i < std::min(o.examples, maps.size()); ++i) {
        const auto ex = attribution::render_heatmap(maps[i], names);
        const auto stem = "saliency_" + picked[i].trial_id + "_" + std::to_string(picked[i].start_frame);
        write_text(ctx.output(stem + ".pgm"), ex.pgm);
        write_text(ctx.output(stem + ".csv"), ex.csv);
    }
    out << "saliency over " << maps.size() << " windows; top channels:";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, ranking.size()); ++i) out << ' ' << ranking[i].channel;
    out << '\n';
}

struct ReportOpts {
    std::vector<std::string> catalogs;
    std::string group_by;
    std::size_t top = 10;
};

void cmd_report(const ReportOpts& o, RunContext& ctx, std::ostream& out) {
    std::vector<eval::CatalogRow> rows;
    for (const auto& path : o.catalogs) {
        auto part = eval::parse_catalog_csv(read_text(ctx.input(path)));
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) throw EmptyDatasetError("catalogs contain no rows");
    auto group = o.group_by;
    if (group.empty()) {
        if (rows.front().params.empty()) throw ConfigError("catalog has no parameter columns; pass --group-by");
        group = rows.front().params.front().first;
    }
    const auto summary = eval::summarize(rows, group);
    write_text(ctx.output("summary.csv"), eval::summary_csv(summary));

    auto sorted = eval::sort_by_eval_f1(rows);
    sorted.resize(std::min(o.top, sorted.size()));
    write_text(ctx.output("top.csv"), eval::catalog_csv(sorted));

    // Groups x {median f1, max f1, median acc, max acc}.
    attribution::SaliencyMap grid;
    grid.values.resize(static_cast<Eigen::Index>(summary.size()), 4);
    for (std::size_t g = 0; g < summary.size(); ++g) {
        const auto r = static_cast<Eigen::Index>(g);
        grid.values(r, 0) = summary[g].median_eval_f1;
        grid.values(r, 1) = summary[g].max_eval_f1;
        grid.values(r, 2) = summary[g].median_eval_acc;
        grid.values(r, 3) = summary[g].max_eval_acc;
    }
    const std::vector<std::string> cols{"median_eval_f1", "max_eval_f1", "median_eval_acc", "max_eval_acc"};
    const auto art = attribution::render_heatmap(grid, cols);
    write_text(ctx.output("summary.pgm"), art.pgm);
    out << summary.size() << " groups by " << group << " from " << rows.size() << " rows\n";
}

// ---------------------------------------------------------------------------

struct Invocation {
    std::string out_dir = "out";
    DataOpts data;
    WindowOpts window;
    ModelOpts model;
    SynthOpts synth;
    OffsetOpts offset;
    PlacementOpts placement;
    SweepOpts sweep;
    GridOpts grid;
    std::vector<std::string> subsets;
    std::vector<std::string> filters{"none", "mahony", "ekf"};
    SaliencyOpts saliency;
    ReportOpts report;
    std::string model_path;
    double threshold = 0.5;
    net::FineTuneOptions finetune;
    std::optional<double> finetune_lr;
};

using Handler = std::function<void(RunContext&)>;

// Effective value of every option of the chosen subcommand (flag, config
// file or default), one "name=value" per line.
std::string config_echo(const CLI::App& command) {
    std::string text;
    for (const auto* opt : command.get_options()) {
        const auto& names = opt->get_lnames();
        if (names.empty() || names.front() == "help") continue;
        std::string value;
        if (opt->count() > 0) {
            if (opt->get_type_size() == 0) {
                value = opt->as<bool>() ? "true" : "false";
            } else {
                for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
            }
        } else {
            value = opt->get_default_str();
            if (opt->get_type_size() == 0 && value.empty()) value = "false";
        }
        text += names.front() + "=" + value + "\n";
    }
    return text;
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Lift detection from wearable IMU recordings", "liftlab"};
    app.set_config("--config", "", "INI file; [section] per subcommand, flags override it");
    app.require_subcommand(1);

    Invocation inv;
    std::map<CLI::App*, Handler> handlers;
    std::ostream& log = out;

    const auto sub = [&](const std::string& name, const std::string& help, Handler h) {
        auto* s = app.add_subcommand(name, help);
        s->add_option("--out", inv.out_dir, "Output directory")->capture_default_str();
        handlers[s] = std::move(h);
        return s;
    };

    auto* synth = sub("synth", "Generate a synthetic labeled corpus",
                      [&](RunContext& c) { cmd_synth(inv.synth, c, log); });
    synth->add_option("--trials", inv.synth.trials)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--mode", inv.synth.mode, "trainlike|fieldlike")->capture_default_str();
    synth->add_option("--seed", inv.synth.seed)->capture_default_str();
    synth->add_option("--duration", inv.synth.duration_s, "Seconds per trial")->capture_default_str();
    synth->add_option("--lifts", inv.synth.lifts, "Lifts per trial")->capture_default_str();
    synth->add_option("--accel-noise", inv.synth.accel_noise)->capture_default_str();
    synth->add_option("--gyro-noise", inv.synth.gyro_noise)->capture_default_str();
    synth->add_option("--distractor-gain", inv.synth.distractor_gain)->capture_default_str();
    synth->add_option("--distractor-sensors", inv.synth.distractor_sensors)->capture_default_str();
    synth->add_flag("--no-distractor", inv.synth.no_distractor);

    auto* validate = sub("validate", "Parse and check a corpus",
                         [&](RunContext& c) { cmd_validate(inv.data, inv.window, c, log); });
    add_data_options(validate, inv.data, false);
    validate->get_option("--data")->required();
    validate->add_option("--eol-policy", inv.window.eol_policy, "provided|derive")->capture_default_str();

    auto* sync = sub("sync", "Align labels to frame indices",
                     [&](RunContext& c) { cmd_sync(inv.data, inv.window, c, log); });
    add_data_options(sync, inv.data, false);
    sync->get_option("--data")->required();
    sync->add_option("--eol-policy", inv.window.eol_policy, "provided|derive")->capture_default_str();

    auto* offset = sub("fix-offset", "Shift labels by a known or estimated frame offset",
                       [&](RunContext& c) { cmd_fix_offset(inv.data, inv.window, inv.offset, c, log); });
    add_data_options(offset, inv.data, false);
    offset->get_option("--data")->required();
    offset->add_option("--eol-policy", inv.window.eol_policy, "provided|derive")->capture_default_str();
    offset->add_option("--offset", inv.offset.offset, "Frames to shift every label");
    offset->add_option("--model", inv.offset.model, "Estimate offsets from this model's scores");
    offset->add_option("--max-lag", inv.offset.max_lag)->capture_default_str();
    offset->add_option("--score-stride", inv.offset.score_stride)->capture_default_str()->check(CLI::PositiveNumber);

    auto* placement = sub("fix-placement", "Detect (and optionally undo) a rotated sensor",
                          [&](RunContext& c) { cmd_fix_placement(inv.data, inv.placement, c, log); });
    placement->add_option("--data", inv.data.data)->required();
    placement->add_option("--sensor", inv.placement.sensor, "Suspect sensor")->required();
    placement->add_option("--reference", inv.placement.reference)->capture_default_str();
    placement->add_option("--still-begin", inv.placement.still_begin, "First still frame")->capture_default_str();
    placement->add_option("--still-frames", inv.placement.still_frames)->capture_default_str();
    placement->add_option("--threshold-deg", inv.placement.threshold_deg)->capture_default_str();
    placement->add_flag("--apply", inv.placement.apply, "Write repaired recordings");

    auto* window = sub("window", "Slice, label and balance windows",
                       [&](RunContext& c) { cmd_window(inv.data, inv.window, c, log); });
    add_data_options(window, inv.data, false);
    add_window_options(window, inv.window);

    auto* train = sub("train", "Train a model",
                      [&](RunContext& c) { cmd_train(inv.data, inv.window, inv.model, c, log); });
    add_data_options(train, inv.data, true);
    add_window_options(train, inv.window);
    add_model_options(train, inv.model, false);

    auto* finetune = sub("finetune", "Continue training a model on a small dataset", [&](RunContext& c) {
        cmd_finetune(inv.data, inv.window, inv.model_path, inv.finetune, inv.finetune_lr, c, log);
    });
    add_data_options(finetune, inv.data, true);
    add_window_options(finetune, inv.window);
    finetune->add_option("--model", inv.model_path)->required();
    finetune->add_option("--epochs", inv.finetune.epochs)->capture_default_str();
    finetune->add_option("--batch-size", inv.finetune.batch_size)->capture_default_str();
    finetune->add_option("--lr", inv.finetune_lr, "Default: a tenth of the original rate");
    finetune->add_option("--seed", inv.finetune.seed)->capture_default_str();
    finetune->add_flag("--freeze-lstm", inv.finetune.freeze_lstm);

    auto* evalc = sub("eval", "Evaluate a model", [&](RunContext& c) {
        cmd_eval(inv.data, inv.window, inv.model_path, inv.threshold, c, log);
    });
    add_data_options(evalc, inv.data, true);
    add_window_options(evalc, inv.window);
    evalc->add_option("--model", inv.model_path)->required();
    evalc->add_option("--threshold", inv.threshold)->capture_default_str();

    auto* grid = sub("grid", "Hyperparameter grid search",
                     [&](RunContext& c) { cmd_grid(inv.sweep, inv.grid, c, log); });
    add_sweep_options(grid, inv.sweep);
    grid->add_option("--batch-sizes", inv.grid.batch_sizes)->delimiter(',')->capture_default_str();
    grid->add_option("--window-lens", inv.grid.window_lens)->delimiter(',')->capture_default_str();
    grid->add_option("--epochs", inv.grid.epochs)->delimiter(',')->capture_default_str();
    grid->add_option("--validation-splits", inv.grid.validation_splits)->delimiter(',')->capture_default_str();
    grid->add_option("--group-by", inv.grid.group_by)->capture_default_str();

    const auto add_single_run = [&](CLI::App* s) {
        s->add_option("--window-len", inv.sweep.window.window_len)->capture_default_str();
        s->add_option("--epochs", inv.sweep.model.epochs)->capture_default_str();
        s->add_option("--batch-size", inv.sweep.model.batch_size)->capture_default_str();
        s->add_option("--validation-split", inv.sweep.model.validation_split)->capture_default_str();
    };

    auto* ablate = sub("ablate", "Retrain on sensor subsets",
                       [&](RunContext& c) { cmd_ablate(inv.sweep, inv.subsets, c, log); });
    add_sweep_options(ablate, inv.sweep);
    add_single_run(ablate);
    ablate->add_option("--subset", inv.subsets, "Comma-separated sensors or 'all'; repeatable");

    auto* fcompare = sub("filter-compare", "Retrain on filtered recordings",
                         [&](RunContext& c) { cmd_filter_compare(inv.sweep, inv.filters, c, log); });
    add_sweep_options(fcompare, inv.sweep);
    add_single_run(fcompare);
    fcompare->add_option("--filters", inv.filters)->delimiter(',')->capture_default_str();
    add_filter_options(fcompare, inv.sweep.window, false);

    auto* saliency = sub("saliency", "Input-gradient saliency of a model",
                         [&](RunContext& c) { cmd_saliency(inv.data, inv.window, inv.saliency, c, log); });
    add_data_options(saliency, inv.data, true);
    add_window_options(saliency, inv.window);
    saliency->add_option("--model", inv.saliency.model)->required();
    saliency->add_option("--class", inv.saliency.label_class, "all|lift|nonlift")->capture_default_str();
    saliency->add_option("--limit", inv.saliency.limit, "Max windows (0: all)")->capture_default_str();
    saliency->add_option("--examples", inv.saliency.examples, "Per-window heatmaps to write")->capture_default_str();
    saliency->add_option("--normalization", inv.saliency.normalization, "maxone|raw")->capture_default_str();

    auto* report = sub("report", "Summaries and heatmaps from catalog CSVs",
                       [&](RunContext& c) { cmd_report(inv.report, c, log); });
    report->add_option("--catalog", inv.report.catalogs, "Catalog CSV; repeatable")->required();
    report->add_option("--group-by", inv.report.group_by, "Default: first parameter column");
    report->add_option("--top", inv.report.top)->capture_default_str();

    std::vector<const char*> argv{"liftlab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kUsageError;
    }

    CLI::App* chosen = app.get_subcommands().front();
    try {
        RunContext ctx(chosen->get_name(), inv.out_dir);
        ctx.set_args(args);
        ctx.set_config(config_echo(*chosen));
        handlers.at(chosen)(ctx);
        out << "manifest: " << ctx.write_manifest().string() << '\n';
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << e.get_name() << ": " << e.what() << '\n';
        return kUsageError;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kDataError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kInternalError;
    }
}

} // namespace liftlab::cli
