#pragma once

#include <cstdint>

#include "ioev/battery/model.hpp"
#include "ioev/nn/param.hpp"

namespace ioev::battery {

// Two-regime charging process. Degraded packs have faded capacity, a steeper
// temperature drift, higher internal resistance and a depressed minimum cell
// voltage; labels and capacities are ground truth by construction.
struct BatterySynthOptions {
    size_t windows = 200;
    double anomaly_fraction = 0.3;
    uint64_t seed = 0;
};

struct RegimeParams {
    double capacity_mean;  // Ah
    double temp_drift;     // °C per step
    double resistance;     // ohm
    double vmin_drop;      // V
};

const RegimeParams& healthy_regime();
const RegimeParams& degraded_regime();

inline constexpr double kSynthStepSeconds = 10.0;
inline constexpr double kSynthCapacityStd = 6.0;

// A charging series of `length` frames from one vehicle of the given regime.
RawChargingSeries synth_series(bool degraded, size_t length, nn::Rng& rng, const std::string& vehicle_id);

// Independent single-window samples; each sample comes from its own vehicle.
BatteryDataset synth_battery(const BatterySynthOptions& opts);

// Every frame identical, at nominal values of the given regime.
TelemetryWindow constant_window(bool degraded);

}  // namespace ioev::battery
