#include "gradcheck.hpp"
#include "oracles.hpp"

#include "liftlab/error.hpp"
#include "liftlab/liftnet.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <random>

using namespace liftlab;
using namespace liftlab::net;

namespace {

// Value of the seed-42 default model on snapshot_window(), computed once by
// the scalar oracle and frozen here.
constexpr double kSeed42Snapshot = 0.43923743025477024;

WindowMatrix snapshot_window(std::size_t len = 10, std::size_t channels = 36) {
    WindowMatrix w(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(channels));
    for (Eigen::Index t = 0; t < w.rows(); ++t)
        for (Eigen::Index c = 0; c < w.cols(); ++c) w(t, c) = std::sin(0.3 * static_cast<double>(t) + 0.7 * static_cast<double>(c));
    return w;
}

ModelConfig small_config(std::size_t hidden = 8, std::size_t channels = 2, std::uint64_t seed = 1) {
    ModelConfig cfg;
    cfg.window_len = 10;
    cfg.n_channels = channels;
    cfg.lstm_hidden = hidden;
    cfg.seed = seed;
    return cfg;
}

// One-sensor layout. Lift windows carry `lift_level` on channel 0, NonLift
// windows `nonlift_level`; channel 1 is noise, the rest zero.
Dataset two_level_dataset(int per_class, double lift_level, double nonlift_level, std::uint64_t seed,
                          double noise = 0.3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise);
    std::vector<Window> ws;
    for (int i = 0; i < 2 * per_class; ++i) {
        Window w;
        w.trial_id = "fixture";
        w.start_frame = i;
        w.label = i % 2 ? Label::Lift : Label::NonLift;
        w.data = WindowMatrix::Zero(10, 6);
        const double level = w.label == Label::Lift ? lift_level : nonlift_level;
        for (Eigen::Index t = 0; t < 10; ++t) {
            w.data(t, 0) = level + n(rng);
            w.data(t, 1) = n(rng);
        }
        ws.push_back(std::move(w));
    }
    return windowing::make_dataset(std::move(ws), 10, {imu::SensorId::LeftWrist}, {seed, "fixture"});
}

double accuracy(const Model& m, std::span<const Window> ws) {
    const auto p = predict(m, ws);
    std::size_t right = 0;
    for (std::size_t i = 0; i < ws.size(); ++i) right += (p[i] >= 0.5) == (ws[i].label == Label::Lift);
    return static_cast<double>(right) / static_cast<double>(ws.size());
}

} // namespace

TEST(InitModel, DeterministicAndShaped) {
    ModelConfig cfg;
    cfg.seed = 3;
    const auto a = init_model(cfg), b = init_model(cfg);
    EXPECT_EQ(a.parameters(), b.parameters());
    EXPECT_EQ(a.input_gate_weights().rows(), 128);
    EXPECT_EQ(a.input_gate_weights().cols(), 36);
    cfg.seed = 4;
    EXPECT_NE(init_model(cfg).parameters(), a.parameters());
}

TEST(InitModel, RangesAndForgetBias) {
    const auto m = init_model(small_config(16, 6));
    const double bound_lstm = 1.0 / std::sqrt(6.0);
    const auto W = m.view("lstm.W");
    EXPECT_LE(W.cwiseAbs().maxCoeff(), bound_lstm);
    const auto b = m.view("lstm.b");
    for (Eigen::Index j = 0; j < 16; ++j) EXPECT_EQ(b(16 + j, 0), 1.0);
    EXPECT_LE(m.view("dense0.W").cwiseAbs().maxCoeff(), 1.0 / std::sqrt(16.0));
    std::size_t total = 0;
    for (const auto& t : m.tensors()) total += static_cast<std::size_t>(t.size());
    EXPECT_EQ(total, m.parameter_count());
    // 4H(C + H + 1) + dense 16*5+5 + 5*5+5 + 5+1
    EXPECT_EQ(m.parameter_count(), 4u * 16 * (6 + 16 + 1) + 85 + 30 + 6);
}

TEST(Forward, ZeroWeightsGiveOneHalf) {
    auto m = init_model(ModelConfig{});
    m.parameters().setZero();
    EXPECT_EQ(forward(m, snapshot_window()), 0.5);
}

TEST(Forward, OutputInOpenUnitInterval) {
    const auto m = init_model(small_config(8, 36));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 10.0);
    for (int i = 0; i < 50; ++i) {
        WindowMatrix w(10, 36);
        for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = n(rng);
        const double p = forward(m, w);
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
    }
}

TEST(Forward, MatchesScalarOracle) {
    for (auto act : {DenseActivation::Relu, DenseActivation::Tanh}) {
        auto cfg = small_config(6, 4, 9);
        cfg.activation = act;
        cfg.dense_widths = {5, 3, 2};
        const auto m = init_model(cfg);
        const auto w = snapshot_window(10, 4);
        EXPECT_NEAR(forward(m, w), oracle::lstm_forward(m, w), 1e-14);
    }
}

TEST(Forward, Seed42Snapshot) {
    ModelConfig cfg;
    cfg.seed = 42;
    const auto m = init_model(cfg);
    const auto w = snapshot_window();
    EXPECT_NEAR(oracle::lstm_forward(m, w), kSeed42Snapshot, 1e-12) << std::setprecision(17) << oracle::lstm_forward(m, w);
    EXPECT_NEAR(forward(m, w), kSeed42Snapshot, 1e-12);
}

TEST(Forward, Errors) {
    const auto m = init_model(small_config(4, 2));
    EXPECT_THROW(forward(m, WindowMatrix::Zero(9, 2)), ShapeError);
    EXPECT_THROW(forward(m, WindowMatrix::Zero(10, 3)), ShapeError);
    WindowMatrix bad = WindowMatrix::Zero(10, 2);
    bad(3, 1) = std::nan("");
    EXPECT_THROW(forward(m, bad), InputError);
}

TEST(Forward, BatchContextInvariance) {
    const auto m = init_model(small_config(8, 6));
    const auto ds = two_level_dataset(20, 1.0, -1.0, 5);
    const auto batch = predict(m, std::span<const Window>(ds.windows));
    for (std::size_t i = 0; i < ds.windows.size(); ++i) EXPECT_NEAR(batch[i], forward(m, ds.windows[i].data), 1e-12);
    std::vector<Window> reversed(ds.windows.rbegin(), ds.windows.rend());
    const auto rev = predict(m, std::span<const Window>(reversed));
    for (std::size_t i = 0; i < rev.size(); ++i) EXPECT_NEAR(rev[i], batch[batch.size() - 1 - i], 1e-12);
}

TEST(Loss, Values) {
    EXPECT_NEAR(loss(0.5, Label::Lift), std::log(2.0), 1e-15);
    EXPECT_NEAR(loss(0.5, Label::NonLift), std::log(2.0), 1e-15);
    EXPECT_NEAR(loss(1 - 1e-7, Label::Lift), 1e-7, 1e-12);
    EXPECT_NEAR(loss(0.9, Label::NonLift), -std::log(0.1), 1e-12);
    EXPECT_NEAR(loss(0.9, Label::NonLift), 2.302585, 1e-6);
    for (double p : {0.0, 1.0, 1e-300}) {
        EXPECT_TRUE(std::isfinite(loss(p, Label::Lift)));
        EXPECT_TRUE(std::isfinite(loss(p, Label::NonLift)));
    }
}

TEST(Gradients, MatchFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (auto act : {DenseActivation::Relu, DenseActivation::Tanh}) {
            const auto tc = oracle::tiny_case(seed, act);
            const auto r = oracle::check_parameter_gradients(tc.model, tc.batch);
            EXPECT_EQ(r.checked, tc.model.parameter_count());
            EXPECT_LE(r.max_rel, 1e-4) << "seed " << seed;
        }
    }
}

TEST(Gradients, LossIsBatchMean) {
    const auto tc = oracle::tiny_case(3);
    EXPECT_NEAR(gradients(tc.model, tc.batch).loss, oracle::mean_loss(tc.model, tc.batch), 1e-14);
}

TEST(Gradients, DuplicatedWindowIsMeanInvariant) {
    const auto tc = oracle::tiny_case(7);
    const std::vector<Window> one{tc.batch[0]};
    const std::vector<Window> two{tc.batch[0], tc.batch[0]};
    const auto a = gradients(tc.model, one), b = gradients(tc.model, two);
    EXPECT_LE((a.gradient - b.gradient).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_DOUBLE_EQ(a.loss, b.loss);
}

TEST(Gradients, DeadReluHeadBlocksLstmGradient) {
    auto tc = oracle::tiny_case(2);
    tc.model.view("dense0.b").setConstant(-100.0);  // every first-layer unit dead
    const auto g = gradients(tc.model, tc.batch).gradient;
    const auto n_lstm = tc.model.lstm_parameter_count();
    EXPECT_EQ(g.head(n_lstm).cwiseAbs().maxCoeff(), 0.0);
    const auto& t = tc.model.tensor("dense0.W");
    EXPECT_EQ(g.segment(t.offset, t.size()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gradients, EmptyBatchAndShape) {
    const auto tc = oracle::tiny_case(1);
    EXPECT_THROW(gradients(tc.model, std::span<const Window>{}), ShapeError);
    std::vector<Window> wrong{tc.batch[0]};
    wrong[0].data = WindowMatrix::Zero(4, 2);
    EXPECT_THROW(gradients(tc.model, wrong), ShapeError);
}

namespace {

ModelConfig block_config(std::size_t hidden = 8, std::uint64_t seed = 1) { return small_config(hidden, 6, seed); }

} // namespace

TEST(Train, SeparableFixture) {
    const auto ds = two_level_dataset(100, 1.0, -1.0, 11);
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 16;
    tc.seed = 3;
    const auto [m, hist] = train(init_model(block_config()), ds, tc);
    ASSERT_EQ(hist.train_loss.size(), 30u);
    EXPECT_GE(hist.train_accuracy.back(), 0.99);
    EXPECT_GE(accuracy(m, ds.windows), 0.99);
    EXPECT_LT(hist.train_loss.back(), hist.train_loss.front());
}

TEST(Train, ZeroLearningRateIsFixedPoint) {
    const auto ds = two_level_dataset(20, 1.0, -1.0, 2);
    TrainConfig tc;
    tc.epochs = 1;
    tc.learning_rate = 0.0;
    const auto start = init_model(block_config());
    const auto [m, hist] = train(start, ds, tc);
    EXPECT_EQ(m.parameters(), start.parameters());
    EXPECT_EQ(hist.train_loss.size(), 1u);
}

TEST(Train, DeterministicPerSeed) {
    const auto ds = two_level_dataset(30, 0.5, -0.5, 4);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 8;
    tc.seed = 9;
    const auto a = train(init_model(block_config()), ds, tc);
    const auto b = train(init_model(block_config()), ds, tc);
    EXPECT_EQ(a.first.parameters(), b.first.parameters());
    EXPECT_EQ(a.second.train_loss, b.second.train_loss);
    EXPECT_EQ(a.second.val_accuracy, b.second.val_accuracy);
    tc.seed = 10;
    EXPECT_NE(train(init_model(block_config()), ds, tc).first.parameters(), a.first.parameters());
}

TEST(Train, SingleClassRejected) {
    auto ds = two_level_dataset(10, 1.0, -1.0, 2);
    for (auto& w : ds.windows) w.label = Label::Lift;
    EXPECT_THROW(train(init_model(block_config()), ds, TrainConfig{}), ClassMissingError);
}

TEST(Train, DivergenceNamesEpoch) {
    const auto ds = two_level_dataset(10, 1.0, -1.0, 2);
    TrainConfig tc;
    tc.epochs = 2;
    tc.learning_rate = std::numeric_limits<double>::max();
    try {
        train(init_model(block_config()), ds, tc);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_NE(e.message().find("in epoch "), std::string::npos) << e.message();
    }
}

TEST(FineTune, FreezeKeepsLstmBits) {
    const auto ds = two_level_dataset(10, 1.0, -1.0, 2);
    const auto m = init_model(block_config());
    FineTuneOptions opt;
    opt.freeze_lstm = true;
    opt.learning_rate = 1e-2;
    const auto tuned = fine_tune(m, ds, opt);
    const auto n = m.lstm_parameter_count();
    EXPECT_EQ(tuned.parameters().head(n), m.parameters().head(n));
    EXPECT_NE(tuned.parameters().tail(m.parameters().size() - n), m.parameters().tail(m.parameters().size() - n));
}

TEST(FineTune, ZeroEpochsIsIdentity) {
    const auto ds = two_level_dataset(10, 1.0, -1.0, 2);
    const auto m = init_model(block_config());
    FineTuneOptions opt;
    opt.epochs = 0;
    EXPECT_EQ(fine_tune(m, ds, opt).parameters(), m.parameters());
}

TEST(FineTune, ImprovesOnShiftedDistribution) {
    // Source: Lift at +1, NonLift at -1. Target: everything shifted down by 1.5.
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 16;
    tc.seed = 1;
    const auto [source_model, hist] =
        train(init_model(block_config(8, 5)), two_level_dataset(100, 1.0, -1.0, 21), tc);
    const auto small = two_level_dataset(10, -0.5, -2.5, 22);
    const auto held_out = two_level_dataset(100, -0.5, -2.5, 23);
    FineTuneOptions opt;
    opt.learning_rate = 1e-2;
    opt.epochs = 30;
    opt.seed = 4;
    const auto tuned = fine_tune(source_model, small, opt);
    const double before = accuracy(source_model, held_out.windows);
    const double after = accuracy(tuned, held_out.windows);
    EXPECT_GT(after, before);
    EXPECT_GE(after, 0.9);
}

TEST(ScoreRecording, CountsAndConstancy) {
    auto cfg = small_config(4, 36);
    const auto m = init_model(cfg);
    auto rec = oracle::still_recording(1000);
    const auto s = score_recording(m, rec, 1);
    ASSERT_EQ(s.size(), 1000u);
    for (double v : s) EXPECT_EQ(v, s.front());

    // Distinct frames -> one evaluation per start; the tail carries the last.
    for (Eigen::Index f = 0; f < 1000; ++f) rec.frames(f, 0) = 0.01 * static_cast<double>(f);
    const auto varied = score_recording(m, rec, 1);
    const auto win = windowing::slice_windows(imu::LabeledRecording{rec, {}, 0, false}, 10, 1);
    ASSERT_EQ(win.size(), 991u);
    for (std::size_t i = 0; i < win.size(); ++i) EXPECT_NEAR(varied[i], forward(m, win[i].data), 1e-12);
    for (std::size_t i = 991; i < 1000; ++i) EXPECT_EQ(varied[i], varied[990]);

    const auto strided = score_recording(m, rec, 4);
    EXPECT_EQ(strided[5], strided[4]);
    EXPECT_NEAR(strided[4], forward(m, win[4].data), 1e-12);
    EXPECT_THROW(score_recording(m, oracle::still_recording(5), 1), EmptyDatasetError);
}

TEST(SaveLoad, RoundTripIsExact) {
    auto cfg = small_config(5, 6, 77);
    cfg.channel_names = imu::channel_names(std::vector<imu::SensorId>{imu::SensorId::Waist});
    cfg.activation = DenseActivation::Tanh;
    auto m = init_model(cfg);
    m.trained_learning_rate = 0.0123;
    const auto path = (std::filesystem::temp_directory_path() / "liftlab_model_roundtrip.json").string();
    save_model(path, m);
    const auto back = load_model(path, cfg.channel_names);
    EXPECT_EQ(back.parameters(), m.parameters());
    EXPECT_EQ(back.config().lstm_hidden, 5u);
    EXPECT_EQ(back.config().activation, DenseActivation::Tanh);
    EXPECT_EQ(back.trained_learning_rate, 0.0123);
    const auto w = snapshot_window(10, 6);
    EXPECT_EQ(forward(back, w), forward(m, w));
    const auto other = imu::channel_names(std::vector<imu::SensorId>{imu::SensorId::LeftWrist});
    EXPECT_THROW(load_model(path, other), ShapeError);
    std::filesystem::remove(path);
}
