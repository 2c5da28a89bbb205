#include "ioev/forecast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ioev::forecast {

namespace {

StationSeries blank(Component c, const SeriesSynthOptions& o, const char* id) {
    StationSeries s;
    s.station_id = id;
    s.component = c;
    for (size_t t = 0; t < o.length; ++t) s.timestamps.push_back(static_cast<double>(t) * o.step_seconds);
    return s;
}

}  // namespace

StationSeries synth_sinusoid(Component c, const SeriesSynthOptions& o) {
    StationSeries s = blank(c, o, "synth-sine");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (size_t t = 0; t < o.length; ++t) {
        double v = o.offset + o.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / o.period);
        if (o.noise_std > 0.0) v += o.noise_std * z(rng);
        s.values.push_back(v);
    }
    return s;
}

StationSeries synth_random_walk(Component c, const SeriesSynthOptions& o) {
    StationSeries s = blank(c, o, "synth-walk");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> z(0.0, o.noise_std);
    double v = o.offset;
    for (size_t t = 0; t < o.length; ++t) {
        s.values.push_back(v);
        v += z(rng);
    }
    return s;
}

StationSeries synth_price_series(const SeriesSynthOptions& o) {
    StationSeries s = blank(Component::price, o, "synth-price");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const double base = o.offset > 0.0 ? o.offset : 0.25;
    for (size_t t = 0; t < o.length; ++t) {
        double hour = std::fmod(static_cast<double>(t) * 24.0 / o.period, 24.0);
        double morning = std::exp(-0.5 * std::pow((hour - 8.0) / 1.5, 2));
        double evening = std::exp(-0.5 * std::pow((hour - 19.0) / 2.0, 2));
        double night = hour < 5.0 ? -0.4 : 0.0;
        double v = base * (1.0 + o.amplitude * (0.5 * morning + 0.8 * evening + night));
        if (o.noise_std > 0.0) v += o.noise_std * z(rng);
        s.values.push_back(std::max(0.01, v));
    }
    return s;
}

StationSeries synth_occupancy_series(const SeriesSynthOptions& o) {
    StationSeries s = blank(Component::occupancy, o, "synth-occupancy");
    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (size_t t = 0; t < o.length; ++t) {
        double phase = 2.0 * std::numbers::pi * static_cast<double>(t) / o.period;
        double v = 0.5 + 0.35 * o.amplitude * std::sin(phase - std::numbers::pi / 2.0);
        if (o.noise_std > 0.0) v += o.noise_std * z(rng);
        s.values.push_back(std::clamp(v, 0.0, 1.0));
    }
    return s;
}

}  // namespace ioev::forecast
