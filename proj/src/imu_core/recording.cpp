#include "liftlab/error.hpp"
#include "liftlab/imu_core.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace liftlab::imu {
namespace {

constexpr std::array<std::string_view, 6> kSensorNames{
    "left_wrist", "right_wrist", "right_thigh", "upper_back", "right_upper_arm", "waist",
};

constexpr std::array<std::string_view, 6> kChannelSuffix{"ax", "ay", "az", "gx", "gy", "gz"};

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(trim(s.substr(pos, next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
    if (s.empty()) return false;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

std::string format_g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

AccelUnit parse_accel_unit(std::string_view s) {
    const auto u = lower(s);
    if (u == "m/s2" || u == "m/s^2" || u == "mps2") return AccelUnit::MetersPerSecond2;
    if (u == "g") return AccelUnit::StandardGravity;
    throw ParseError("unknown accelerometer unit '" + std::string(s) + "'");
}

GyroUnit parse_gyro_unit(std::string_view s) {
    const auto u = lower(s);
    if (u == "rad/s") return GyroUnit::RadiansPerSecond;
    if (u == "deg/s" || u == "dps") return GyroUnit::DegreesPerSecond;
    throw ParseError("unknown gyroscope unit '" + std::string(s) + "'");
}

} // namespace

std::string_view sensor_name(SensorId id) { return kSensorNames.at(static_cast<std::size_t>(id)); }

std::optional<SensorId> parse_sensor(std::string_view name) {
    const auto key = lower(trim(name));
    for (std::size_t i = 0; i < kSensorNames.size(); ++i) {
        if (key == kSensorNames[i]) return static_cast<SensorId>(i);
    }
    return std::nullopt;
}

std::vector<SensorId> parse_sensor_list(std::string_view comma_list) {
    std::vector<SensorId> out;
    if (trim(comma_list).empty()) return out;
    for (auto item : split(comma_list, ',')) {
        const auto id = parse_sensor(item);
        if (!id) throw ParseError("unknown sensor '" + std::string(item) + "'");
        if (std::find(out.begin(), out.end(), *id) != out.end()) {
            throw ParseError("duplicate sensor '" + std::string(item) + "'");
        }
        out.push_back(*id);
    }
    return out;
}

std::string join_sensor_list(std::span<const SensorId> sensors, char sep) {
    std::string out;
    for (std::size_t i = 0; i < sensors.size(); ++i) {
        if (i) out += sep;
        out += sensor_name(sensors[i]);
    }
    return out;
}

std::vector<std::string> channel_names(std::span<const SensorId> sensors) {
    std::vector<std::string> names;
    names.reserve(sensors.size() * kChannelsPerSensor);
    for (auto s : sensors) {
        for (auto suffix : kChannelSuffix) {
            names.push_back(std::string(sensor_name(s)) + "." + std::string(suffix));
        }
    }
    return names;
}

// ---------------------------------------------------------------------------

TimeOfDay TimeOfDay::from_epoch_ms(std::int64_t epoch_ms) {
    return TimeOfDay{((epoch_ms % kMsPerDay) + kMsPerDay) % kMsPerDay};
}

TimeOfDay TimeOfDay::parse(std::string_view text) {
    const auto t = trim(text);
    const auto bad = [&] { return ParseError("malformed time of day '" + std::string(t) + "'"); };
    auto parts = split(t, ':');
    std::string_view frac;
    if (parts.size() == 4) {
        frac = parts[3];
        parts.pop_back();
    } else if (parts.size() == 3) {
        const auto dot = parts[2].find('.');
        if (dot != std::string_view::npos) {
            frac = parts[2].substr(dot + 1);
            parts[2] = parts[2].substr(0, dot);
        }
    } else {
        throw bad();
    }
    int hh = 0, mm = 0, ss = 0;
    if (!parse_int(parts[0], hh) || !parse_int(parts[1], mm) || !parse_int(parts[2], ss)) throw bad();
    if (hh < 0 || hh > 23 || mm < 0 || mm > 59 || ss < 0 || ss > 59) throw bad();
    int millis = 0;
    if (!frac.empty()) {
        if (frac.size() > 3 || !std::all_of(frac.begin(), frac.end(), [](char c) { return c >= '0' && c <= '9'; })) {
            throw bad();
        }
        std::string padded(frac);
        padded.resize(3, '0');
        parse_int(std::string_view(padded), millis);
    }
    return TimeOfDay{((hh * 60LL + mm) * 60LL + ss) * 1000LL + millis};
}

std::string TimeOfDay::to_string() const {
    const auto h = ms / 3'600'000;
    const auto m = (ms / 60'000) % 60;
    const auto s = (ms / 1000) % 60;
    const auto f = ms % 1000;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld.%03lld", static_cast<long long>(h),
                  static_cast<long long>(m), static_cast<long long>(s), static_cast<long long>(f));
    return buf;
}

// ---------------------------------------------------------------------------

bool Recording::has_sensor(SensorId id) const {
    return std::find(sensors.begin(), sensors.end(), id) != sensors.end();
}

std::size_t Recording::sensor_offset(SensorId id) const {
    const auto it = std::find(sensors.begin(), sensors.end(), id);
    if (it == sensors.end()) {
        throw SensorMissingError("sensor '" + std::string(sensor_name(id)) + "' not active in trial '" +
                                 trial_id + "'");
    }
    return static_cast<std::size_t>(it - sensors.begin()) * kChannelsPerSensor;
}

Vec3 Recording::accel(std::size_t frame, SensorId id) const {
    const auto c = static_cast<Eigen::Index>(sensor_offset(id));
    return frames.row(static_cast<Eigen::Index>(frame)).segment<3>(c).transpose();
}

Vec3 Recording::gyro(std::size_t frame, SensorId id) const {
    const auto c = static_cast<Eigen::Index>(sensor_offset(id));
    return frames.row(static_cast<Eigen::Index>(frame)).segment<3>(c + 3).transpose();
}

void Recording::validate() const {
    if (frames.rows() == 0) throw ParseError("no frames");
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
        throw SchemaError("sample rate must be positive");
    }
    if (sensors.empty()) throw SchemaError("no active sensors");
    if (static_cast<std::size_t>(frames.cols()) != sensors.size() * kChannelsPerSensor) {
        throw SchemaError("channel count " + std::to_string(frames.cols()) + " does not match " +
                          std::to_string(sensors.size()) + " sensors");
    }
    if (!frames.allFinite()) throw ParseError("non-finite channel value");
}

void LabeledRecording::validate() const {
    recording.validate();
    const auto len = static_cast<std::int64_t>(recording.frame_count());
    for (std::size_t i = 0; i < lifts.size(); ++i) {
        const auto& l = lifts[i];
        if (l.bol_frame < 0 || l.bol_frame >= l.eol_frame || l.eol_frame >= len) {
            throw OutOfRangeError("lift interval (" + std::to_string(l.bol_frame) + "," +
                                  std::to_string(l.eol_frame) + ") outside recording of " +
                                  std::to_string(len) + " frames");
        }
        if (i > 0 && l.bol_frame < lifts[i - 1].eol_frame) {
            throw LabelConflictError("lift intervals overlap or are unsorted");
        }
    }
}

PlacementFix::PlacementFix(SensorId sensor, const Mat3& rotation) : sensor_(sensor), rotation_(rotation) {
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho > 1e-9 || std::abs(rotation.determinant() - 1.0) > 1e-9) {
        throw ConfigError("placement fix rotation is not a proper rotation");
    }
}

// ---------------------------------------------------------------------------

Recording parse_recording(std::istream& in, const RecordingSchema& schema) {
    Recording rec;
    bool have_subject = false, have_trial = false, have_start = false, have_rate = false,
         have_sensors = false;
    AccelUnit accel_unit = AccelUnit::MetersPerSecond2;
    GyroUnit gyro_unit = GyroUnit::RadiansPerSecond;

    std::vector<double> values;
    std::size_t rows = 0;
    std::size_t width = 0;
    std::string line;
    std::size_t line_no = 0;

    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            if (rows > 0) throw ParseError("line " + std::to_string(line_no) + ": header after data");
            const auto eq = t.find('=');
            if (eq == std::string_view::npos) {
                throw ParseError("line " + std::to_string(line_no) + ": malformed header '" + std::string(t) + "'");
            }
            const auto key = trim(t.substr(1, eq - 1));
            const auto value = trim(t.substr(eq + 1));
            if (key == "subject") {
                rec.subject_id = value;
                have_subject = true;
            } else if (key == "trial") {
                rec.trial_id = value;
                have_trial = !value.empty();
            } else if (key == "start_epoch_ms") {
                if (!parse_int(value, rec.start_epoch_ms)) throw ParseError("malformed start_epoch_ms");
                have_start = true;
            } else if (key == "rate_hz") {
                if (!parse_double(value, rec.sample_rate_hz) || !(rec.sample_rate_hz > 0.0) ||
                    !std::isfinite(rec.sample_rate_hz)) {
                    throw ParseError("malformed rate_hz");
                }
                have_rate = true;
            } else if (key == "sensors") {
                rec.sensors = parse_sensor_list(value);
                if (rec.sensors.empty()) throw ParseError("empty sensor list");
                have_sensors = true;
            } else if (key == "units") {
                const auto parts = split(value, ',');
                if (parts.size() != 2) throw ParseError("units header needs <accel>,<gyro>");
                accel_unit = parse_accel_unit(parts[0]);
                gyro_unit = parse_gyro_unit(parts[1]);
            }
            // Unknown keys are ignored so files can carry extra metadata.
            continue;
        }

        if (!(have_subject && have_trial && have_start && have_rate && have_sensors)) {
            throw ParseError("line " + std::to_string(line_no) +
                             ": data before complete header (need subject, trial, start_epoch_ms, "
                             "rate_hz, sensors)");
        }
        if (width == 0) width = rec.sensors.size() * kChannelsPerSensor;
        const auto fields = split(t, ',');
        if (fields.size() != width) {
            throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                              " values, got " + std::to_string(fields.size()));
        }
        for (auto f : fields) {
            double v = 0.0;
            if (!parse_double(f, v) || !std::isfinite(v)) {
                throw ParseError("row " + std::to_string(rows + 1) + " (line " + std::to_string(line_no) +
                                 "): non-numeric channel value '" + std::string(f) + "'");
            }
            values.push_back(v);
        }
        ++rows;
    }

    if (!(have_subject && have_trial && have_start && have_rate && have_sensors)) {
        throw ParseError("incomplete header");
    }
    if (rows == 0) throw ParseError("no frames");
    for (auto required : schema.required_sensors) {
        if (!rec.has_sensor(required)) {
            throw SchemaError("trial '" + rec.trial_id + "' is missing sensor '" +
                              std::string(sensor_name(required)) + "'");
        }
    }

    rec.frames = Eigen::Map<const FrameMatrix>(values.data(), static_cast<Eigen::Index>(rows),
                                               static_cast<Eigen::Index>(width));
    const double accel_scale = accel_unit == AccelUnit::StandardGravity ? kGravity : 1.0;
    const double gyro_scale = gyro_unit == GyroUnit::DegreesPerSecond ? M_PI / 180.0 : 1.0;
    if (accel_scale != 1.0 || gyro_scale != 1.0) {
        for (std::size_t s = 0; s < rec.sensors.size(); ++s) {
            const auto c = static_cast<Eigen::Index>(s * kChannelsPerSensor);
            rec.frames.middleCols(c, 3) *= accel_scale;
            rec.frames.middleCols(c + 3, 3) *= gyro_scale;
        }
    }
    rec.validate();
    return rec;
}

Recording read_recording(const std::string& path, const RecordingSchema& schema) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open recording '" + path + "'");
    try {
        return parse_recording(in, schema);
    } catch (Error& e) {
        e.add_context(path);
        throw;
    }
}

void write_recording(std::ostream& out, const Recording& rec) {
    out << "#subject=" << rec.subject_id << '\n'
        << "#trial=" << rec.trial_id << '\n'
        << "#start_epoch_ms=" << rec.start_epoch_ms << '\n'
        << "#rate_hz=" << format_g9(rec.sample_rate_hz) << '\n'
        << "#sensors=" << join_sensor_list(rec.sensors) << '\n'
        << "#units=m/s2,rad/s\n";
    std::string row;
    for (Eigen::Index r = 0; r < rec.frames.rows(); ++r) {
        row.clear();
        for (Eigen::Index c = 0; c < rec.frames.cols(); ++c) {
            if (c) row += ',';
            row += format_g9(rec.frames(r, c));
        }
        row += '\n';
        out << row;
    }
}

void write_recording(const std::string& path, const Recording& rec) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write recording '" + path + "'");
    write_recording(out, rec);
}

// ---------------------------------------------------------------------------

std::vector<RawLabel> parse_labels(std::istream& in) {
    std::vector<RawLabel> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto fields = split(t, ',');
        if (fields.front() == "trial_id") continue;  // optional header row
        if (fields.size() != 3 && fields.size() != 4) {
            throw ParseError("label line " + std::to_string(line_no) + ": expected 3 or 4 fields");
        }
        RawLabel label;
        label.trial_id = fields[0];
        try {
            label.bol = TimeOfDay::parse(fields[1]);
            if (fields.size() == 4) label.eol = TimeOfDay::parse(fields[2]);
        } catch (Error& e) {
            e.add_context("label line " + std::to_string(line_no));
            throw;
        }
        const auto source = lower(fields.back());
        if (source == "mocap") {
            label.source = LabelSource::MoCap;
        } else if (source == "video") {
            label.source = LabelSource::Video;
        } else {
            throw ParseError("label line " + std::to_string(line_no) + ": unknown source '" +
                             std::string(fields.back()) + "'");
        }
        if (label.eol && !(*label.eol > label.bol)) {
            throw ParseError("label line " + std::to_string(line_no) + ": eol not after bol");
        }
        labels.push_back(std::move(label));
    }
    return labels;
}

std::vector<RawLabel> read_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open label file '" + path + "'");
    return parse_labels(in);
}

void write_labels(std::ostream& out, std::span<const RawLabel> labels) {
    for (const auto& l : labels) {
        out << l.trial_id << ',' << l.bol.to_string();
        if (l.eol) out << ',' << l.eol->to_string();
        out << ',' << (l.source == LabelSource::MoCap ? "mocap" : "video") << '\n';
    }
}

void write_labels(const std::string& path, std::span<const RawLabel> labels) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write label file '" + path + "'");
    write_labels(out, labels);
}

} // namespace liftlab::imu
