#pragma once

#include <cstdint>

#include "ioev/forecast/forecaster.hpp"

namespace ioev::forecast {

struct SeriesSynthOptions {
    size_t length = 480;
    double amplitude = 1.0;
    double period = 24.0;  // samples
    double offset = 0.0;
    double noise_std = 0.0;
    uint64_t seed = 0;
    double step_seconds = 3600.0;
};

// offset + amplitude * sin(2πt / period) + N(0, noise_std²)
StationSeries synth_sinusoid(Component c, const SeriesSynthOptions& opts);
// Cumulative sum of N(0, noise_std²) steps starting at offset.
StationSeries synth_random_walk(Component c, const SeriesSynthOptions& opts);
// Hourly tariff: base level with morning and evening peaks plus noise, in currency per kWh.
StationSeries synth_price_series(const SeriesSynthOptions& opts);
// Daily occupancy profile in [0, 1].
StationSeries synth_occupancy_series(const SeriesSynthOptions& opts);

}  // namespace ioev::forecast
