#include "liftlab/synthgen.hpp"

#include "liftlab/error.hpp"
#include "liftlab/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace liftlab::synth {

using imu::round_half_up;

namespace {

struct FrameSpan {
    std::int64_t begin;
    std::int64_t length;
};

FrameSpan to_frames(double start_s, double duration_s, double rate) {
    return {round_half_up(start_s * rate), round_half_up(duration_s * rate)};
}

// Half-sine over the span; nonzero on every frame of the span.
double pulse(std::int64_t k, const FrameSpan& span) {
    return std::sin(M_PI * (static_cast<double>(k - span.begin) + 0.5) / static_cast<double>(span.length));
}

} // namespace

void MotionSpec::validate() const {
    if (!(duration_s > 0.0) || !(rate_hz > 0.0)) throw SpecError("duration and rate must be positive");
    if (!(noise.accel_sigma >= 0.0) || !(noise.gyro_sigma >= 0.0)) throw SpecError("noise sigma must be >= 0");
    const auto len = round_half_up(duration_s * rate_hz);
    std::int64_t previous_end = 0;
    for (std::size_t i = 0; i < lifts.size(); ++i) {
        const auto& l = lifts[i];
        const auto span = to_frames(l.bol_s, l.duration_s, rate_hz);
        if (l.bol_s < 0.0 || span.length < 1 || span.begin + span.length >= len) {
            throw SpecError("lift " + std::to_string(i) + " lies outside the recording");
        }
        if (i > 0 && span.begin < previous_end) throw SpecError("lifts overlap or are unsorted");
        previous_end = span.begin + span.length;
    }
    if (!distractor_pulses.empty() && !distractor) throw SpecError("distractor pulses need a distractor rule");
    for (const auto& p : distractor_pulses) {
        const auto span = to_frames(p.start_s, p.duration_s, rate_hz);
        if (p.start_s < 0.0 || span.length < 1 || span.begin + span.length > len) {
            throw SpecError("distractor pulse lies outside the recording");
        }
    }
}

std::vector<imu::RawLabel> SyntheticTrial::raw_labels() const {
    std::vector<imu::RawLabel> out;
    for (const auto& lift : labels.lifts) out.push_back(imu::interval_to_label(recording, lift));
    return out;
}

SyntheticTrial generate_recording(const MotionSpec& spec) {
    spec.validate();
    const auto len = round_half_up(spec.duration_s * spec.rate_hz);
    imu::Recording rec;
    rec.subject_id = spec.subject_id;
    rec.trial_id = spec.trial_id;
    rec.start_epoch_ms = spec.start_epoch_ms;
    rec.sample_rate_hz = spec.rate_hz;
    rec.sensors.assign(imu::kAllSensors.begin(), imu::kAllSensors.end());
    rec.frames = imu::FrameMatrix::Zero(len, static_cast<Eigen::Index>(rec.sensors.size()) * imu::kChannelsPerSensor);

    Rng rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index f = 0; f < len; ++f) {
        for (std::size_t s = 0; s < rec.sensors.size(); ++s) {
            const auto c = static_cast<Eigen::Index>(s) * imu::kChannelsPerSensor;
            for (int k = 0; k < 3; ++k) rec.frames(f, c + k) += spec.noise.accel_sigma * normal(rng);
            for (int k = 3; k < 6; ++k) rec.frames(f, c + k) += spec.noise.gyro_sigma * normal(rng);
            rec.frames(f, c + 2) += imu::kGravity;
        }
    }

    SyntheticTrial trial;
    const auto add_distractor = [&](const FrameSpan& span, double amplitude) {
        if (!spec.distractor) return;
        for (auto sensor : spec.distractor->sensors) {
            const auto c = static_cast<Eigen::Index>(rec.sensor_offset(sensor));
            for (auto k = span.begin; k < span.begin + span.length; ++k) {
                rec.frames(k, c + 4) += spec.distractor->gyro_gain * amplitude * pulse(k, span);
            }
        }
    };

    for (const auto& lift : spec.lifts) {
        const auto span = to_frames(lift.bol_s, lift.duration_s, spec.rate_hz);
        for (auto sensor : spec.informative_sensors) {
            const auto c = static_cast<Eigen::Index>(rec.sensor_offset(sensor));
            for (auto k = span.begin; k < span.begin + span.length; ++k) {
                const double s = lift.amplitude * pulse(k, span);
                rec.frames(k, c + 2) += spec.accel_gain * s;
                rec.frames(k, c + 3) += spec.gyro_gain * s;
            }
        }
        add_distractor(span, lift.amplitude);
        trial.labels.lifts.push_back({span.begin, span.begin + span.length});
    }
    for (const auto& p : spec.distractor_pulses) {
        const auto span = to_frames(p.start_s, p.duration_s, spec.rate_hz);
        add_distractor(span, p.amplitude);
        trial.distractor_spans.push_back({span.begin, span.begin + span.length});
    }

    rec.validate();
    trial.recording = rec;
    trial.labels.recording = std::move(rec);
    trial.labels.validate();
    return trial;
}

// ---------------------------------------------------------------------------

void CorpusTemplate::validate() const {
    if (!(duration_s > 0.0) || !(rate_hz > 0.0)) throw SpecError("duration and rate must be positive");
    if (!(amplitude_min > 0.0) || amplitude_max < amplitude_min) throw SpecError("bad amplitude range");
    if (!(distractor_spacing_s > 0.0)) throw SpecError("distractor spacing must be positive");
    if (lifts_per_trial > 0) {
        const double slot = duration_s / static_cast<double>(lifts_per_trial);
        if (slot < lift_duration_s + 2.0 * edge_margin_s) {
            throw SpecError("too many lifts for the trial duration");
        }
    }
}

CorpusMode parse_corpus_mode(std::string_view name) {
    if (name == "trainlike") return CorpusMode::TrainLike;
    if (name == "fieldlike") return CorpusMode::FieldLike;
    throw ConfigError("unknown corpus mode '" + std::string(name) + "' (trainlike|fieldlike)");
}

std::string_view corpus_mode_name(CorpusMode mode) {
    return mode == CorpusMode::TrainLike ? "trainlike" : "fieldlike";
}

std::vector<SyntheticTrial> generate_corpus(const CorpusTemplate& tmpl, std::size_t n_trials, std::uint64_t base_seed,
                                            CorpusMode mode) {
    tmpl.validate();
    if (n_trials < 1) throw SpecError("corpus needs at least one trial");

    std::vector<SyntheticTrial> corpus;
    corpus.reserve(n_trials);
    for (std::size_t i = 0; i < n_trials; ++i) {
        const auto trial_seed = derive_seed(base_seed, i);
        MotionSpec spec;
        char id[64];
        std::snprintf(id, sizeof id, "%s_t%03zu", std::string(corpus_mode_name(mode)).c_str(), i);
        spec.trial_id = id;
        std::snprintf(id, sizeof id, "S%02zu", i / 5);
        spec.subject_id = id;
        // Space trials through the day without reaching midnight.
        const auto slot_ms = static_cast<std::int64_t>((tmpl.duration_s + 60.0) * 1000.0);
        spec.start_epoch_ms = tmpl.start_epoch_ms + (static_cast<std::int64_t>(i) * slot_ms) % (12LL * 3'600'000);
        spec.duration_s = tmpl.duration_s;
        spec.rate_hz = tmpl.rate_hz;
        spec.noise = tmpl.noise;
        spec.informative_sensors = tmpl.informative_sensors;
        spec.accel_gain = tmpl.accel_gain;
        spec.gyro_gain = tmpl.gyro_gain;
        spec.distractor = tmpl.distractor;
        spec.seed = derive_seed(trial_seed, 2);

        Rng layout(derive_seed(trial_seed, 1));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const auto amplitude = [&](Rng& r) {
            return tmpl.amplitude_min + (tmpl.amplitude_max - tmpl.amplitude_min) * unit(r);
        };
        if (tmpl.lifts_per_trial > 0) {
            const double slot = tmpl.duration_s / static_cast<double>(tmpl.lifts_per_trial);
            for (std::size_t j = 0; j < tmpl.lifts_per_trial; ++j) {
                const double lo = static_cast<double>(j) * slot + tmpl.edge_margin_s;
                const double hi = static_cast<double>(j + 1) * slot - tmpl.edge_margin_s - tmpl.lift_duration_s;
                LiftSpec lift;
                lift.bol_s = lo + (hi - lo) * unit(layout);
                lift.duration_s = tmpl.lift_duration_s;
                lift.amplitude = amplitude(layout);
                spec.lifts.push_back(lift);
            }
        }

        if (mode == CorpusMode::FieldLike && tmpl.distractor && tmpl.distractor->mode == CorrelationMode::TrainOnly) {
            Rng field(derive_seed(trial_seed, 3));
            std::vector<std::pair<double, double>> gaps;
            double cursor = 0.0;
            for (const auto& lift : spec.lifts) {
                gaps.emplace_back(cursor, lift.bol_s);
                cursor = lift.bol_s + lift.duration_s;
            }
            gaps.emplace_back(cursor, tmpl.duration_s);
            for (const auto& [a, b] : gaps) {
                double t = a + tmpl.distractor_margin_s + 0.5 * tmpl.distractor_spacing_s * unit(field);
                while (t + tmpl.lift_duration_s + tmpl.distractor_margin_s <= b) {
                    spec.distractor_pulses.push_back({t, tmpl.lift_duration_s, amplitude(field)});
                    t += tmpl.lift_duration_s + tmpl.distractor_spacing_s * (0.5 + 0.5 * unit(field));
                }
            }
        }
        corpus.push_back(generate_recording(spec));
    }
    return corpus;
}

} // namespace liftlab::synth
