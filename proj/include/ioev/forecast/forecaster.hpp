#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/eval/metrics.hpp"
#include "ioev/nn/recurrent.hpp"

namespace ioev::forecast {

enum class Component { occupancy, duration, volume, price };
std::string to_string(Component c);
Component parse_component(const std::string& s);

// Full observed history of one station and component.
struct StationSeries {
    std::string station_id;
    Component component = Component::occupancy;
    std::vector<double> timestamps;
    std::vector<double> values;
};

// The most recent seq_len observations; timestamps strictly increasing.
struct SeriesWindow {
    std::vector<double> values;
    Component component = Component::occupancy;
    std::string station_id;
    std::vector<double> timestamps;

    void validate(int seq_len) const;
    // The window ending just before index `end` of a series.
    static SeriesWindow from_series(const StationSeries& s, size_t end, int seq_len);
};

struct ForecastConfig {
    nn::CellKind cell = nn::CellKind::lstm;
    int num_layers = 2;
    int hidden_units = 16;
    int seq_len = 6;
    int horizon = 1;
    int epochs = 300;
    int batch_size = 32;
    double learning_rate = 0.005;
    double validation_fraction = 0.2;
    int patience = 40;

    void validate() const;
    nlohmann::json to_json() const;
    static ForecastConfig from_json(const nlohmann::json& j);
};

struct Forecast {
    Component component = Component::occupancy;
    double point_estimate = 0.0;
    std::string station_id;
    double as_of = 0.0;
};

// Occupancy is a fraction and is clamped to [0, 1]; other components pass through.
double clamp_forecast(Component c, double raw);

class Forecaster {
public:
    Forecaster(ForecastConfig cfg, Component component, std::string station_id, double mean, double scale,
               uint64_t seed);
    Forecaster(Forecaster&&) noexcept;
    Forecaster& operator=(Forecaster&&) noexcept;
    ~Forecaster();

    const ForecastConfig& config() const { return cfg_; }
    Component component() const { return component_; }
    const std::string& station_id() const { return station_id_; }
    const eval::RegressionErrors& validation() const { return validation_; }

    // Throws ComponentMismatch when the window's component differs.
    Forecast forecast_next(const SeriesWindow& w) const;
    // Unclamped one-step predictions for many windows of seq_len values.
    std::vector<double> predict_raw(const std::vector<std::vector<double>>& windows) const;
    // Recursive multi-step forecast feeding predictions back as inputs.
    std::vector<double> forecast_recursive(const SeriesWindow& w, int steps) const;

    std::string serialize() const;
    static Forecaster deserialize(const std::string& bytes);
    void save(const std::string& path) const;
    static Forecaster load(const std::string& path);

private:
    friend Forecaster fit_forecaster(const StationSeries&, const ForecastConfig&, uint64_t);
    struct Network;

    ForecastConfig cfg_;
    Component component_;
    std::string station_id_;
    double mean_, scale_;
    eval::RegressionErrors validation_;
    std::unique_ptr<Network> net_;
};

// One-step-ahead model per station trained on MSE with a chronological
// validation tail for early stopping. Throws HistoryTooShort when the series
// has fewer than seq_len + 1 values.
Forecaster fit_forecaster(const StationSeries& history, const ForecastConfig& cfg, uint64_t seed);

// Rolling one-step evaluation over every index t >= seq_len.
eval::RegressionErrors evaluate_forecast(const Forecaster& f, const StationSeries& test);
// Same targets, predicting the last observed value.
eval::RegressionErrors persistence_baseline(const StationSeries& test, int seq_len);

// UrbanEV-style CSV: timestamp, optional station_id, and one column per component.
std::vector<StationSeries> load_station_csv(const std::string& path, Component component);

}  // namespace ioev::forecast
