#include "gradcheck.hpp"
#include "oracles.hpp"

#include "liftlab/attribution.hpp"
#include "liftlab/error.hpp"

#include <gtest/gtest.h>

#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

using namespace liftlab;
using namespace liftlab::attribution;
using windowing::Label;
using windowing::Window;

namespace {

std::vector<std::string> names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
    return out;
}

SaliencyMap raw_map(Eigen::MatrixXd v) { return SaliencyMap{std::move(v), Normalization::Raw, 1.0}; }

double share_of(const ChannelRanking& r, const std::string& channel) {
    for (const auto& s : r)
        if (s.channel == channel) return s.share;
    return -1.0;
}

struct Pgm {
    int width = 0, height = 0, maxval = 0;
    std::vector<unsigned char> pixels;
};

Pgm parse_pgm(const std::string& bytes) {
    std::istringstream in(bytes);
    std::string magic;
    Pgm p;
    in >> magic >> p.width >> p.height >> p.maxval;
    in.get();
    EXPECT_EQ(magic, "P5");
    p.pixels.resize(static_cast<std::size_t>(p.width * p.height));
    in.read(reinterpret_cast<char*>(p.pixels.data()), static_cast<std::streamsize>(p.pixels.size()));
    EXPECT_EQ(in.gcount(), static_cast<std::streamsize>(p.pixels.size()));
    return p;
}

} // namespace

TEST(Saliency, LinearSurrogateIsProportionalToWeights) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd w(10, 6), x(10, 6);
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            w.data()[i] = n(rng);
            x.data()[i] = 0.2 * n(rng);
        }
        const LinearSurrogate model(w);
        const auto m = saliency(model, x);
        EXPECT_EQ(m.normalization, Normalization::MaxOne);
        const Eigen::MatrixXd rel = w.cwiseAbs() / w.cwiseAbs().maxCoeff();
        EXPECT_LE((m.values - rel).cwiseAbs().maxCoeff(), 1e-9);

        // Raw values carry the sigmoid slope.
        double z = 0.0;
        for (Eigen::Index t = 0; t < 10; ++t)
            for (Eigen::Index c = 0; c < 6; ++c) z += w(t, c) * x(t, c);
        const double slope = oracle::sigm(z) * (1 - oracle::sigm(z));
        EXPECT_LE((m.raw() - slope * w.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Saliency, MatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto tc = oracle::tiny_case(seed);
        for (const auto& w : tc.batch) {
            const auto m = saliency(tc.model, w.data, {Normalization::Raw, OutputMode::Probability});
            EXPECT_LE(oracle::check_input_gradient(tc.model, w.data, m.raw()), 1e-3) << "seed " << seed;
        }
    }
}

TEST(Saliency, LogitModeMatchesOracle) {
    const auto tc = oracle::tiny_case(5);
    const auto& x = tc.batch[0].data;
    const auto g = net::input_gradient(tc.model, x, OutputMode::Logit);
    EXPECT_NEAR(g.output, oracle::lstm_forward(tc.model, x, true), 1e-13);
    const double p = oracle::sigm(g.output);
    const auto prob = net::input_gradient(tc.model, x, OutputMode::Probability);
    EXPECT_LE((prob.gradient - p * (1 - p) * g.gradient).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Saliency, ZeroModelGivesZeroMap) {
    net::ModelConfig cfg;
    cfg.lstm_hidden = 8;
    cfg.n_channels = 6;
    auto model = net::init_model(cfg);
    model.parameters().setZero();
    const auto m = saliency(model, Eigen::MatrixXd::Constant(10, 6, 0.7), {Normalization::Raw, OutputMode::Probability});
    EXPECT_EQ(m.values.cwiseAbs().maxCoeff(), 0.0);
    // MaxOne on an all-zero map stays all zero.
    EXPECT_EQ(saliency(model, Eigen::MatrixXd::Zero(10, 6)).values.maxCoeff(), 0.0);
}

TEST(Saliency, MaxOneInvariant) {
    const auto tc = oracle::tiny_case(8);
    const auto m = saliency(tc.model, tc.batch[1].data);
    EXPECT_DOUBLE_EQ(m.values.maxCoeff(), 1.0);
    EXPECT_GE(m.values.minCoeff(), 0.0);
    EXPECT_THROW(saliency(tc.model, Eigen::MatrixXd::Zero(4, 2)), ShapeError);
}

TEST(Aggregate, Examples) {
    Eigen::MatrixXd one = Eigen::MatrixXd::Zero(3, 4);
    one.col(2).setConstant(0.5);
    const std::vector<SaliencyMap> single{raw_map(one)};
    const auto r = aggregate_saliency(single, names(4));
    EXPECT_EQ(r.front().channel, "c2");
    EXPECT_DOUBLE_EQ(r.front().share, 1.0);

    const std::vector<SaliencyMap> uniform{raw_map(Eigen::MatrixXd::Ones(3, 4)), raw_map(Eigen::MatrixXd::Constant(3, 4, 2.0))};
    for (const auto& s : aggregate_saliency(uniform, names(4))) EXPECT_NEAR(s.share, 0.25, 1e-15);
    // Ties keep layout order.
    const auto tied = aggregate_saliency(uniform, names(4));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(tied[i].index, i);

    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 2, 1, 4, 2;
    b << 6, 3, 2, 1;
    const std::vector<SaliencyMap> twice{raw_map(a), raw_map(b)};
    const auto ab = aggregate_saliency(twice, names(2));
    EXPECT_NEAR(share_of(ab, "c0"), 2.0 * share_of(ab, "c1"), 1e-15);
}

TEST(Aggregate, UsesRawValuesOfNormalizedMaps) {
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 1, 0;
    b << 0, 1;
    // Second map was normalized from a raw maximum of 3.
    const std::vector<SaliencyMap> maps{SaliencyMap{a, Normalization::MaxOne, 1.0}, SaliencyMap{b, Normalization::MaxOne, 3.0}};
    const auto r = aggregate_saliency(maps, names(2));
    EXPECT_NEAR(share_of(r, "c1"), 0.75, 1e-15);
}

TEST(Aggregate, SumsToOneAndPermutationEquivariant) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<SaliencyMap> maps;
        for (int k = 0; k < 4; ++k) {
            Eigen::MatrixXd v(5, 7);
            for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = u(rng);
            maps.push_back(raw_map(v));
        }
        const auto r = aggregate_saliency(maps, names(7));
        double total = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            total += r[i].share;
            if (i) EXPECT_GE(r[i - 1].share, r[i].share);
        }
        EXPECT_NEAR(total, 1.0, 1e-9);

        std::vector<int> perm(7);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<SaliencyMap> permuted;
        for (const auto& m : maps) {
            Eigen::MatrixXd v(5, 7);
            for (int c = 0; c < 7; ++c) v.col(c) = m.values.col(perm[static_cast<std::size_t>(c)]);
            permuted.push_back(raw_map(v));
        }
        std::vector<std::string> permuted_names;
        for (int c = 0; c < 7; ++c) permuted_names.push_back("c" + std::to_string(perm[static_cast<std::size_t>(c)]));
        const auto rp = aggregate_saliency(permuted, permuted_names);
        for (const auto& s : r) EXPECT_NEAR(share_of(rp, s.channel), s.share, 1e-15);
    }
}

TEST(Aggregate, Errors) {
    const std::vector<SaliencyMap> mixed{raw_map(Eigen::MatrixXd::Ones(3, 4)), raw_map(Eigen::MatrixXd::Ones(2, 4))};
    EXPECT_THROW(aggregate_saliency(mixed, names(4)), ShapeError);
    const std::vector<SaliencyMap> ok{raw_map(Eigen::MatrixXd::Ones(3, 4))};
    EXPECT_THROW(aggregate_saliency(ok, names(3)), ShapeError);
    EXPECT_THROW(aggregate_saliency(std::span<const SaliencyMap>{}, names(3)), ShapeError);
}

TEST(Heatmap, Examples) {
    Eigen::MatrixXd v(2, 2);
    v << 0, 1, 1, 0;
    const auto art = render_heatmap(SaliencyMap{v, Normalization::MaxOne, 1.0}, names(2));
    const auto pgm = parse_pgm(art.pgm);
    EXPECT_EQ(pgm.width, 2);
    EXPECT_EQ(pgm.height, 2);
    EXPECT_EQ(pgm.maxval, 255);
    EXPECT_EQ(pgm.pixels, (std::vector<unsigned char>{0, 255, 255, 0}));

    const auto black = parse_pgm(render_heatmap(raw_map(Eigen::MatrixXd::Zero(3, 5)), names(5)).pgm);
    for (auto px : black.pixels) EXPECT_EQ(px, 0);

    const auto tc = oracle::tiny_case(1);
    const auto bright = parse_pgm(render_heatmap(saliency(tc.model, tc.batch[0].data), names(2)).pgm);
    EXPECT_EQ(*std::max_element(bright.pixels.begin(), bright.pixels.end()), 255);

    EXPECT_THROW(render_heatmap(raw_map(v), names(3)), ShapeError);
}

TEST(Heatmap, CsvRoundTrip) {
    Eigen::MatrixXd v(3, 2);
    v << 0.1, 0.25, 1.0 / 3.0, 0, 7, 1e-9;
    std::vector<std::string> back_names;
    const auto back = parse_heatmap_csv(render_heatmap(raw_map(v), names(2)).csv, &back_names);
    EXPECT_EQ(back.values, v);
    EXPECT_EQ(back_names, names(2));
}

TEST(Saliency, InformativeChannelRanksFirst) {
    // Label depends on channel 3 only; every channel carries unit noise.
    constexpr Eigen::Index kInformative = 3;
    int agree = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        std::mt19937_64 rng(seed * 1000);
        std::normal_distribution<double> n;
        std::vector<Window> ws;
        for (int i = 0; i < 400; ++i) {
            Window w;
            w.label = i % 2 ? Label::Lift : Label::NonLift;
            w.data = windowing::WindowMatrix(10, 6);
            for (Eigen::Index k = 0; k < w.data.size(); ++k) w.data.data()[k] = n(rng);
            w.data.col(kInformative).array() += w.label == Label::Lift ? 1.0 : -1.0;
            w.start_frame = i;
            ws.push_back(std::move(w));
        }
        const auto ds = windowing::make_dataset(ws, 10, {imu::SensorId::Waist});
        net::ModelConfig cfg;
        cfg.lstm_hidden = 8;
        cfg.n_channels = 6;
        cfg.seed = seed;
        net::TrainConfig tc;
        tc.epochs = 30;
        tc.batch_size = 16;
        tc.seed = seed;
        const auto model = net::train(net::init_model(cfg), ds, tc).first;
        const auto maps = saliency_all(model, ds.windows);
        const auto ranking = aggregate_saliency(maps, imu::channel_names(ds.sensors));
        agree += ranking.front().index == static_cast<std::size_t>(kInformative);
        std::cout << "seed " << seed << ": top " << ranking.front().channel << " share " << ranking.front().share << "\n";
    }
    EXPECT_GE(agree, 3) << "informative channel first in " << agree << "/5 seeds";
}
