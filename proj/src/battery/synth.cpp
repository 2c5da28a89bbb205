#include "ioev/battery/synth.hpp"

#include <algorithm>
#include <random>

namespace ioev::battery {

namespace {

constexpr double kOcvBase = 3.3;
constexpr double kOcvSlope = 0.009;  // V per % SoC
constexpr double kNominalCurrent = 40.0;
constexpr double kNominalSoc = 40.0;
constexpr double kNominalTemp = 25.0;

Frame make_frame(const RegimeParams& r, double soc, double current, double temp, double spread, double noise) {
    Frame f;
    f.v_mean = kOcvBase + kOcvSlope * soc + r.resistance * current + noise;
    f.v_min = f.v_mean - spread - r.vmin_drop;
    f.v_max = f.v_mean + spread;
    f.current = current;
    f.temperature = temp;
    f.soc = soc;
    return f;
}

}  // namespace

const RegimeParams& healthy_regime() {
    static const RegimeParams r{150.0, 0.01, 0.0015, 0.0};
    return r;
}

const RegimeParams& degraded_regime() {
    static const RegimeParams r{128.0, 0.035, 0.0025, 0.035};
    return r;
}

RawChargingSeries synth_series(bool degraded, size_t length, nn::Rng& rng, const std::string& vehicle_id) {
    const RegimeParams& r = degraded ? degraded_regime() : healthy_regime();
    std::normal_distribution<double> cap_dist(r.capacity_mean, kSynthCapacityStd);
    std::uniform_real_distribution<double> cur_dist(25.0, 60.0);
    std::uniform_real_distribution<double> soc0_dist(10.0, 60.0);
    std::uniform_real_distribution<double> temp0_dist(20.0, 30.0);
    std::normal_distribution<double> vnoise(0.0, 0.002);
    std::normal_distribution<double> tnoise(0.0, 0.05);
    std::normal_distribution<double> inoise(0.0, 0.3);
    std::uniform_real_distribution<double> spread_dist(0.008, 0.015);

    RawChargingSeries s;
    s.vehicle_id = vehicle_id;
    s.anomaly = degraded;
    double capacity = std::max(60.0, cap_dist(rng));
    s.capacity = capacity;
    double current = cur_dist(rng);
    double soc = soc0_dist(rng);
    double temp = temp0_dist(rng);
    double spread = spread_dist(rng);
    s.frames.reserve(length);
    for (size_t t = 0; t < length; ++t) {
        double i = current + inoise(rng);
        s.frames.push_back(make_frame(r, soc, i, temp + tnoise(rng), spread, vnoise(rng)));
        s.timestamps.push_back(static_cast<double>(t) * kSynthStepSeconds);
        soc = std::min(100.0, soc + 100.0 * i * kSynthStepSeconds / 3600.0 / capacity);
        temp += r.temp_drift;
    }
    return s;
}

BatteryDataset synth_battery(const BatterySynthOptions& opts) {
    nn::Rng rng(opts.seed);
    std::bernoulli_distribution label(opts.anomaly_fraction);
    BatteryDataset out;
    out.reserve(opts.windows);
    for (size_t k = 0; k < opts.windows; ++k) {
        bool degraded = label(rng);
        std::string vid = "veh-" + std::to_string(k);
        RawChargingSeries s = synth_series(degraded, kWindowLength, rng, vid);
        out.push_back({TelemetryWindow(std::move(s.frames), vid, 0), degraded, *s.capacity});
    }
    return out;
}

TelemetryWindow constant_window(bool degraded) {
    const RegimeParams& r = degraded ? degraded_regime() : healthy_regime();
    Frame f = make_frame(r, kNominalSoc, kNominalCurrent, kNominalTemp, 0.01, 0.0);
    return TelemetryWindow(std::vector<Frame>(kWindowLength, f), degraded ? "const-degraded" : "const-healthy", 0);
}

}  // namespace ioev::battery
