#include <algorithm>
#include <iostream>

#include <CLI11.hpp>

#include "common.hpp"
#include "ioev/core/csv.hpp"
#include "ioev/core/text.hpp"
#include "ioev/forecast/synth.hpp"

using namespace ioev;

namespace {

forecast::StationSeries pick_series(const std::string& path, forecast::Component c, const std::string& station) {
    auto all = forecast::load_station_csv(path, c);
    require(!all.empty(), ErrorCode::InvalidArgument, "no series in " + path);
    if (station.empty()) return all.front();
    for (auto& s : all)
        if (s.station_id == station) return s;
    fail(ErrorCode::InvalidArgument, "station '" + station + "' not in " + path);
}

forecast::StationSeries tail(const forecast::StationSeries& s, size_t count) {
    auto out = s;
    size_t from = s.values.size() - std::min(count, s.values.size());
    out.values.assign(s.values.begin() + from, s.values.end());
    out.timestamps.assign(s.timestamps.begin() + from, s.timestamps.end());
    return out;
}

nlohmann::json errors_json(const eval::RegressionErrors& e) {
    return {{"mae", e.mae}, {"mse", e.mse}, {"rmse", e.rmse}, {"n", e.n}};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-station charging demand and price forecasting"};
    app.require_subcommand(1);

    std::string data, out, station, component = "occupancy", cell = "lstm", model_path = "forecast-model.bin";
    forecast::ForecastConfig cfg;
    uint64_t seed = 0;
    size_t length = 480;
    int steps = 1;
    double test_fraction = 0.2;

    auto* synth = app.add_subcommand("synth", "Write a synthetic hourly station CSV");
    synth->add_option("--component", component, "occupancy|duration|volume|price");
    synth->add_option("--length", length, "Samples");
    synth->add_option("--seed", seed, "Generator seed");
    synth->add_option("--out", out, "CSV output path")->required();

    auto* fit = app.add_subcommand("fit", "Fit a one-step model to one station's history");
    fit->add_option("--data", data, "Station CSV (timestamp, station_id, component columns)")->required();
    fit->add_option("--component", component, "occupancy|duration|volume|price");
    fit->add_option("--station", station, "Station id; the first series when omitted");
    fit->add_option("--cell", cell, "lstm|gru");
    fit->add_option("--seq-len", cfg.seq_len, "Input window length");
    fit->add_option("--hidden", cfg.hidden_units, "Recurrent units per layer");
    fit->add_option("--epochs", cfg.epochs, "Maximum epochs");
    fit->add_option("--seed", seed, "Initialization seed");
    fit->add_option("--out", model_path, "Model output path");

    auto* predict = app.add_subcommand("predict", "Forecast from the end of a station's history");
    predict->add_option("--model", model_path, "Model path");
    predict->add_option("--data", data, "Station CSV")->required();
    predict->add_option("--station", station, "Station id; the model's station when omitted");
    predict->add_option("--steps", steps, "Recursive steps ahead")->check(CLI::PositiveNumber);

    auto* evaluate = app.add_subcommand("eval", "Rolling one-step errors on the tail of a history");
    evaluate->add_option("--model", model_path, "Model path");
    evaluate->add_option("--data", data, "Station CSV")->required();
    evaluate->add_option("--station", station, "Station id; the model's station when omitted");
    evaluate->add_option("--test-fraction", test_fraction, "Tail share scored")->check(CLI::Range(0.01, 1.0));

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        if (*synth) {
            auto c = forecast::parse_component(component);
            forecast::SeriesSynthOptions so;
            so.length = length;
            so.seed = seed;
            forecast::StationSeries s;
            if (c == forecast::Component::price) {
                s = forecast::synth_price_series(so);
            } else if (c == forecast::Component::occupancy) {
                s = forecast::synth_occupancy_series(so);
            } else {
                so.amplitude = c == forecast::Component::duration ? 3.0 : 40.0;
                so.offset = c == forecast::Component::duration ? 8.0 : 120.0;
                so.noise_std = so.amplitude * 0.1;
                s = forecast::synth_sinusoid(c, so);
            }
            CsvTable t{{"timestamp", "station_id", forecast::to_string(c)}, {}};
            for (size_t i = 0; i < s.values.size(); ++i)
                t.rows.push_back({std::to_string(s.timestamps[i]), "station-1", std::to_string(s.values[i])});
            write_file(out, format_csv(t));
        } else if (*fit) {
            cfg.cell = cell == "gru" ? nn::CellKind::gru : nn::CellKind::lstm;
            require(cell == "gru" || cell == "lstm", ErrorCode::InvalidArgument, "unknown cell '" + cell + "'");
            auto s = pick_series(data, forecast::parse_component(component), station);
            auto f = forecast::fit_forecaster(s, cfg, seed);
            f.save(model_path);
            std::cout << nlohmann::json{{"model", model_path},
                                        {"station_id", s.station_id},
                                        {"samples", s.values.size()},
                                        {"validation", errors_json(f.validation())}}
                             .dump(2)
                      << '\n';
        } else if (*predict) {
            auto f = forecast::Forecaster::load(model_path);
            auto s = pick_series(data, f.component(), station.empty() ? f.station_id() : station);
            auto w = forecast::SeriesWindow::from_series(s, s.values.size(), f.config().seq_len);
            std::cout << nlohmann::json{{"station_id", s.station_id},
                                        {"component", forecast::to_string(f.component())},
                                        {"as_of", s.timestamps.back()},
                                        {"forecast", f.forecast_recursive(w, steps)}}
                             .dump(2)
                      << '\n';
        } else {
            auto f = forecast::Forecaster::load(model_path);
            auto s = pick_series(data, f.component(), station.empty() ? f.station_id() : station);
            auto scored = static_cast<size_t>(test_fraction * static_cast<double>(s.values.size()));
            auto test = tail(s, scored + static_cast<size_t>(f.config().seq_len));
            std::cout << nlohmann::json{{"station_id", s.station_id},
                                        {"model", errors_json(forecast::evaluate_forecast(f, test))},
                                        {"persistence", errors_json(forecast::persistence_baseline(
                                                            test, f.config().seq_len))}}
                             .dump(2)
                      << '\n';
        }
    });
}
