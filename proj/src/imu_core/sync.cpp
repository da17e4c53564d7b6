#include "liftlab/error.hpp"
#include "liftlab/imu_core.hpp"

#include <algorithm>
#include <cmath>

namespace liftlab::imu {

std::int64_t round_half_up(double x) { return static_cast<std::int64_t>(std::floor(x + 0.5)); }

std::int64_t epoch_to_frame(TimeOfDay event, const Recording& rec, bool clamp) {
    const auto len = static_cast<std::int64_t>(rec.frame_count());
    const auto start = rec.start_time_of_day();
    const double duration_ms = static_cast<double>(len) * 1000.0 / rec.sample_rate_hz;
    if (static_cast<double>(start.ms) + duration_ms >= static_cast<double>(kMsPerDay)) {
        throw TimeOrderError("recording '" + rec.trial_id + "' crosses midnight");
    }

    const auto delta_ms = event.ms - start.ms;
    if (delta_ms < 0) {
        if (clamp) return 0;
        throw TimeOrderError("event " + event.to_string() + " precedes start of '" + rec.trial_id + "' (" +
                             start.to_string() + ")");
    }
    const auto frame = round_half_up(static_cast<double>(delta_ms) * rec.sample_rate_hz / 1000.0);
    if (frame >= len) {
        if (clamp) return len - 1;
        throw OutOfRangeError("event " + event.to_string() + " maps to frame " + std::to_string(frame) +
                              " beyond recording of " + std::to_string(len) + " frames");
    }
    return frame;
}

std::int64_t adjust_eol(std::int64_t bol_frame, double sample_rate_hz) {
    return bol_frame + round_half_up(kEolOffsetSeconds * sample_rate_hz);
}

LabeledRecording align_labels(const Recording& rec, std::span<const RawLabel> labels, EolPolicy policy) {
    LabeledRecording lr;
    lr.recording = rec;
    const auto len = static_cast<std::int64_t>(rec.frame_count());

    for (const auto& label : labels) {
        if (label.trial_id != rec.trial_id) {
            throw LabelConflictError("label for trial '" + label.trial_id + "' applied to trial '" +
                                     rec.trial_id + "'");
        }
        LiftInterval lift;
        lift.bol_frame = epoch_to_frame(label.bol, rec);
        if (policy == EolPolicy::UseProvided && label.eol) {
            lift.eol_frame = epoch_to_frame(*label.eol, rec);
        } else {
            lift.eol_frame = adjust_eol(lift.bol_frame, rec.sample_rate_hz);
            if (lift.eol_frame >= len) {
                throw OutOfRangeError("derived eol frame " + std::to_string(lift.eol_frame) +
                                      " beyond recording of " + std::to_string(len) + " frames");
            }
        }
        if (lift.eol_frame <= lift.bol_frame) {
            throw LabelConflictError("label at " + label.bol.to_string() + " collapses to an empty interval");
        }
        lr.lifts.push_back(lift);
    }

    std::sort(lr.lifts.begin(), lr.lifts.end(),
              [](const LiftInterval& a, const LiftInterval& b) { return a.bol_frame < b.bol_frame; });
    for (std::size_t i = 1; i < lr.lifts.size(); ++i) {
        if (lr.lifts[i].bol_frame < lr.lifts[i - 1].eol_frame) {
            throw LabelConflictError(
                "overlapping lifts (" + std::to_string(lr.lifts[i - 1].bol_frame) + "," +
                std::to_string(lr.lifts[i - 1].eol_frame) + ") and (" + std::to_string(lr.lifts[i].bol_frame) +
                "," + std::to_string(lr.lifts[i].eol_frame) + ") in trial '" + rec.trial_id + "'");
        }
    }
    return lr;
}

RawLabel interval_to_label(const Recording& rec, const LiftInterval& lift, LabelSource source) {
    const auto start = rec.start_time_of_day().ms;
    const auto to_time = [&](std::int64_t frame) {
        return TimeOfDay{start + round_half_up(static_cast<double>(frame) * 1000.0 / rec.sample_rate_hz)};
    };
    RawLabel label;
    label.trial_id = rec.trial_id;
    label.bol = to_time(lift.bol_frame);
    label.eol = to_time(lift.eol_frame);
    label.source = source;
    return label;
}

} // namespace liftlab::imu
