#include <iostream>

#include <CLI11.hpp>

#include "common.hpp"
#include "ioev/battery/model.hpp"
#include "ioev/battery/synth.hpp"
#include "ioev/core/csv.hpp"
#include "ioev/core/text.hpp"
#include "ioev/eval/metrics.hpp"

using namespace ioev;

namespace {

CsvTable series_csv(const std::vector<battery::RawChargingSeries>& all) {
    CsvTable t;
    t.header = {"car_id", "timestamp", "volt_mean", "min_single_volt", "max_single_volt", "current",
                "max_temp",   "soc",       "label",     "capacity"};
    for (const auto& s : all) {
        for (size_t i = 0; i < s.frames.size(); ++i) {
            const auto& f = s.frames[i];
            t.rows.push_back({s.vehicle_id, std::to_string(s.timestamps[i]), std::to_string(f.v_mean),
                              std::to_string(f.v_min), std::to_string(f.v_max), std::to_string(f.current),
                              std::to_string(f.temperature), std::to_string(f.soc),
                              s.anomaly ? std::to_string(int(*s.anomaly)) : "",
                              s.capacity ? std::to_string(*s.capacity) : ""});
        }
    }
    return t;
}

battery::BatteryDataset labelled_windows(const std::vector<battery::RawChargingSeries>& series, size_t stride) {
    battery::BatteryDataset out;
    for (const auto& s : series) {
        require(s.anomaly && s.capacity, ErrorCode::SchemaMismatch,
                "vehicle " + s.vehicle_id + " lacks a label or capacity column");
        for (auto& w : battery::segment_windows(s, stride)) out.push_back({std::move(w), *s.anomaly, *s.capacity});
    }
    require(!out.empty(), ErrorCode::InvalidArgument, "no complete 128-frame window in the data");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Battery SoH/SoC multi-task model"};
    app.require_subcommand(1);

    std::string data, out, model_path = "battery-model.bin", arch = "lstm";
    size_t vehicles = 40, length = 256, stride = 64, windows = 300;
    int epochs = 40, hidden = 64;
    uint64_t seed = 0;
    double anomaly_fraction = 0.3;

    auto* synth = app.add_subcommand("synth", "Write a synthetic charging CSV");
    synth->add_option("--vehicles", vehicles, "Vehicle count");
    synth->add_option("--length", length, "Frames per vehicle")->check(CLI::Range(size_t{128}, size_t{1} << 20));
    synth->add_option("--anomaly-fraction", anomaly_fraction, "Share of degraded vehicles");
    synth->add_option("--seed", seed, "Generator seed");
    synth->add_option("--out", out, "CSV output path")->required();

    auto* train = app.add_subcommand("train", "Train centrally on a charging CSV or synthetic windows");
    train->add_option("--data", data, "Charging CSV; synthetic windows when omitted");
    train->add_option("--windows", windows, "Synthetic window count");
    train->add_option("--stride", stride, "Window stride over CSV series");
    train->add_option("--arch", arch, "lstm|bilstm|gru");
    train->add_option("--hidden", hidden, "Recurrent units per layer");
    train->add_option("--epochs", epochs, "Maximum epochs; the best validation epoch is kept");
    train->add_option("--seed", seed, "Initialization and shuffling seed");
    train->add_option("--out", model_path, "Model output path");

    auto* infer = app.add_subcommand("infer", "Diagnose every window of a charging CSV; one JSON line each");
    infer->add_option("--model", model_path, "Model path");
    infer->add_option("--data", data, "Charging CSV")->required();
    infer->add_option("--stride", stride, "Window stride");

    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        if (*synth) {
            nn::Rng rng(seed);
            std::bernoulli_distribution degraded(anomaly_fraction);
            std::vector<battery::RawChargingSeries> all;
            for (size_t v = 0; v < vehicles; ++v)
                all.push_back(battery::synth_series(degraded(rng), length, rng, "car-" + std::to_string(v + 1)));
            write_file(out, format_csv(series_csv(all)));
        } else if (*train) {
            auto dataset = data.empty() ? battery::synth_battery({windows, anomaly_fraction, seed})
                                        : labelled_windows(battery::load_charging_csv(data), stride);
            battery::MultiTaskModelConfig cfg;
            cfg.arch = battery::parse_arch(arch);
            cfg.hidden_units = hidden;
            cfg.seed = seed;
            cfg.validate();
            battery::MultiTaskModel m(cfg, battery::Normalization::fit(dataset));
            battery::fit_centralized(m, dataset, epochs, seed);
            m.save(model_path);

            std::vector<battery::TelemetryWindow> ws;
            eval::ConfusionCounts cc(2);
            std::vector<double> truth, pred;
            for (const auto& s : dataset) ws.push_back(s.window);
            auto d = m.infer_batch(ws);
            for (size_t i = 0; i < d.size(); ++i) {
                cc.add(dataset[i].anomaly, d[i].soh_label);
                truth.push_back(dataset[i].target);
                pred.push_back(d[i].soc_estimate);
            }
            auto cm = eval::classification_metrics(cc, 1);
            auto reg = eval::regression_metrics(truth, pred);
            std::cout << nlohmann::json{{"model", model_path},
                                        {"model_id", m.model_id()},
                                        {"windows", dataset.size()},
                                        {"train_accuracy", cm.accuracy},
                                        {"train_recall", cm.recall},
                                        {"train_target_mae", reg.mae}}
                             .dump(2)
                      << '\n';
        } else {
            auto m = std::make_shared<const battery::MultiTaskModel>(battery::MultiTaskModel::load(model_path));
            for (const auto& s : battery::load_charging_csv(data)) {
                for (const auto& w : battery::segment_windows(s, stride)) {
                    auto d = battery::infer_diagnosis(m, w);
                    std::cout << nlohmann::json{{"vehicle_id", w.vehicle_id()},
                                                {"window_start", w.window_start_index()},
                                                {"soh_anomaly_prob", d.soh_anomaly_prob},
                                                {"soh_label", d.soh_label},
                                                {"soc_estimate", d.soc_estimate}}
                                     .dump()
                              << '\n';
                }
            }
        }
    });
}
