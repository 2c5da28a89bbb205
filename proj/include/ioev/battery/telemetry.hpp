#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ioev/core/csv.hpp"

namespace ioev::battery {

inline constexpr size_t kWindowLength = 128;
inline constexpr size_t kNumChannels = 6;

// Per-step features, in channel order.
struct Frame {
    double v_mean = 0.0;       // V, cell voltage mean
    double v_min = 0.0;        // V
    double v_max = 0.0;        // V
    double current = 0.0;      // A
    double temperature = 0.0;  // °C
    double soc = 0.0;          // %

    std::array<double, kNumChannels> channels() const { return {v_mean, v_min, v_max, current, temperature, soc}; }
};

const std::array<const char*, kNumChannels>& channel_names();

// Exactly kWindowLength validated frames of one vehicle.
class TelemetryWindow {
public:
    // Throws InvalidArgument when length, SoC range, voltage ordering or finiteness is violated.
    TelemetryWindow(std::vector<Frame> frames, std::string vehicle_id, long window_start_index = 0);

    const std::vector<Frame>& frames() const { return frames_; }
    const std::string& vehicle_id() const { return vehicle_id_; }
    long window_start_index() const { return start_; }

    // Row-major (step, channel) flattening: index = step * kNumChannels + channel.
    std::vector<double> flatten() const;
    static TelemetryWindow from_flat(const std::vector<double>& flat, std::string vehicle_id, long start = 0);

private:
    std::vector<Frame> frames_;
    std::string vehicle_id_;
    long start_;
};

struct RawChargingSeries {
    std::string vehicle_id;
    std::vector<Frame> frames;
    std::vector<double> timestamps;  // ordering only, never a model feature
    std::optional<bool> anomaly;     // series-level SoH label, when known
    std::optional<double> capacity;  // regression target, when known
};

// count = floor((len - 128) / stride) + 1
std::vector<TelemetryWindow> segment_windows(const RawChargingSeries& series, size_t stride);

// Reads charging snippets from CSV. Recognised columns (first match wins):
//   vehicle_id | car_id, timestamp, v_mean | volt_mean, v_min | min_single_volt,
//   v_max | max_single_volt, current, temperature | max_temp, soc, label, capacity.
// v_mean falls back to (v_min + v_max) / 2 when absent. Rows are grouped by
// vehicle and ordered by timestamp.
std::vector<RawChargingSeries> load_charging_csv(const std::string& path);
std::vector<RawChargingSeries> series_from_csv(const CsvTable& table);

}  // namespace ioev::battery
