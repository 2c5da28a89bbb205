#include "ioev/battery/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ioev/core/error.hpp"

namespace ioev::battery {

const std::array<const char*, kNumChannels>& channel_names() {
    static const std::array<const char*, kNumChannels> names = {"v_mean", "v_min", "v_max",
                                                                "current", "temperature", "soc"};
    return names;
}

TelemetryWindow::TelemetryWindow(std::vector<Frame> frames, std::string vehicle_id, long window_start_index)
    : frames_(std::move(frames)), vehicle_id_(std::move(vehicle_id)), start_(window_start_index) {
    require(frames_.size() == kWindowLength, ErrorCode::InvalidArgument,
            "window must have exactly 128 frames, got " + std::to_string(frames_.size()));
    for (size_t t = 0; t < frames_.size(); ++t) {
        const Frame& f = frames_[t];
        for (double v : f.channels())
            require(std::isfinite(v), ErrorCode::InvalidArgument, "non-finite value at step " + std::to_string(t));
        require(f.soc >= 0.0 && f.soc <= 100.0, ErrorCode::InvalidArgument,
                "soc out of [0,100] at step " + std::to_string(t));
        require(f.v_min <= f.v_mean && f.v_mean <= f.v_max, ErrorCode::InvalidArgument,
                "voltage ordering v_min <= v_mean <= v_max violated at step " + std::to_string(t));
    }
}

std::vector<double> TelemetryWindow::flatten() const {
    std::vector<double> out;
    out.reserve(kWindowLength * kNumChannels);
    for (const Frame& f : frames_) {
        auto c = f.channels();
        out.insert(out.end(), c.begin(), c.end());
    }
    return out;
}

TelemetryWindow TelemetryWindow::from_flat(const std::vector<double>& flat, std::string vehicle_id, long start) {
    require(flat.size() == kWindowLength * kNumChannels, ErrorCode::ShapeMismatch, "flat window has wrong size");
    std::vector<Frame> frames(kWindowLength);
    for (size_t t = 0; t < kWindowLength; ++t) {
        const double* p = flat.data() + t * kNumChannels;
        frames[t] = Frame{p[0], p[1], p[2], p[3], p[4], p[5]};
    }
    return TelemetryWindow(std::move(frames), std::move(vehicle_id), start);
}

std::vector<TelemetryWindow> segment_windows(const RawChargingSeries& series, size_t stride) {
    require(stride >= 1, ErrorCode::InvalidArgument, "stride must be positive");
    const size_t len = series.frames.size();
    require(len >= kWindowLength, ErrorCode::SeriesTooShort,
            "series has " + std::to_string(len) + " frames, need at least 128");
    const size_t count = (len - kWindowLength) / stride + 1;
    std::vector<TelemetryWindow> out;
    out.reserve(count);
    for (size_t k = 0; k < count; ++k) {
        size_t start = k * stride;
        std::vector<Frame> frames(series.frames.begin() + static_cast<long>(start),
                                  series.frames.begin() + static_cast<long>(start + kWindowLength));
        out.emplace_back(std::move(frames), series.vehicle_id, static_cast<long>(start));
    }
    return out;
}

namespace {

std::optional<size_t> find_column(const CsvTable& t, std::initializer_list<const char*> names) {
    for (const char* n : names)
        if (auto c = t.column(n)) return c;
    return std::nullopt;
}

double to_double(const std::string& cell, const char* what) {
    try {
        size_t used = 0;
        double v = std::stod(cell, &used);
        return v;
    } catch (const std::exception&) {
        fail(ErrorCode::ParseError, std::string("non-numeric ") + what + " value '" + cell + "'");
    }
}

}  // namespace

std::vector<RawChargingSeries> series_from_csv(const CsvTable& table) {
    auto c_vehicle = find_column(table, {"vehicle_id", "car_id"});
    auto c_time = find_column(table, {"timestamp"});
    auto c_vmean = find_column(table, {"v_mean", "volt_mean"});
    auto c_vmin = find_column(table, {"v_min", "min_single_volt"});
    auto c_vmax = find_column(table, {"v_max", "max_single_volt"});
    auto c_current = find_column(table, {"current"});
    auto c_temp = find_column(table, {"temperature", "max_temp"});
    auto c_soc = find_column(table, {"soc"});
    auto c_label = find_column(table, {"label"});
    auto c_capacity = find_column(table, {"capacity"});
    require(c_vmin && c_vmax && c_current && c_temp && c_soc, ErrorCode::SchemaMismatch,
            "charging CSV lacks one of v_min, v_max, current, temperature, soc");

    struct Row {
        double ts;
        Frame frame;
        std::optional<double> label, capacity;
    };
    std::map<std::string, std::vector<Row>> by_vehicle;
    for (size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Row x;
        x.ts = c_time ? to_double(row[*c_time], "timestamp") : static_cast<double>(r);
        x.frame.v_min = to_double(row[*c_vmin], "v_min");
        x.frame.v_max = to_double(row[*c_vmax], "v_max");
        x.frame.v_mean = c_vmean ? to_double(row[*c_vmean], "v_mean") : 0.5 * (x.frame.v_min + x.frame.v_max);
        x.frame.current = to_double(row[*c_current], "current");
        x.frame.temperature = to_double(row[*c_temp], "temperature");
        x.frame.soc = to_double(row[*c_soc], "soc");
        if (c_label && !row[*c_label].empty()) x.label = to_double(row[*c_label], "label");
        if (c_capacity && !row[*c_capacity].empty()) x.capacity = to_double(row[*c_capacity], "capacity");
        by_vehicle[c_vehicle ? row[*c_vehicle] : std::string("vehicle")].push_back(x);
    }
    std::vector<RawChargingSeries> out;
    for (auto& [vid, rows] : by_vehicle) {
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
        RawChargingSeries s;
        s.vehicle_id = vid;
        for (const auto& r : rows) {
            s.frames.push_back(r.frame);
            s.timestamps.push_back(r.ts);
            if (r.label) s.anomaly = *r.label > 0.5;
            if (r.capacity) s.capacity = r.capacity;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<RawChargingSeries> load_charging_csv(const std::string& path) { return series_from_csv(read_csv(path)); }

}  // namespace ioev::battery
