#include "ioev/gateway/bootstrap.hpp"

#include "ioev/attribution/adapters.hpp"
#include "ioev/battery/synth.hpp"
#include "ioev/core/csv.hpp"
#include "ioev/core/text.hpp"
#include "ioev/forecast/synth.hpp"
#include "ioev/ids/synth.hpp"

namespace ioev::gateway {

namespace {

std::shared_ptr<const battery::MultiTaskModel> battery_model(const GatewayConfig& cfg,
                                                              const battery::BatteryDataset& synth) {
    if (!cfg.battery_model.empty())
        return std::make_shared<battery::MultiTaskModel>(battery::MultiTaskModel::load(cfg.battery_model));
    battery::MultiTaskModelConfig mc;
    mc.hidden_units = 16;
    mc.head_hidden = 16;
    mc.seed = cfg.seed;
    auto m = std::make_shared<battery::MultiTaskModel>(mc, battery::Normalization::fit(synth));
    battery::fit_centralized(*m, synth, 5, cfg.seed);
    return m;
}

CsvTable flow_table(const GatewayConfig& cfg) {
    if (!cfg.ids_background.empty()) return read_csv(cfg.ids_background);
    return ids::synth_flows({900, cfg.seed + 3});
}

}  // namespace

support::SeriesProvider synthetic_tariff(int start_hour, uint64_t seed) {
    forecast::SeriesSynthOptions o;
    o.length = 24 * 8;
    o.seed = seed;
    auto day = forecast::synth_price_series(o).values;
    return [day, start_hour](int slots) {
        std::vector<double> out;
        for (int t = 0; t < slots; ++t) out.push_back(day[static_cast<size_t>(start_hour + t) % day.size()]);
        return out;
    };
}

std::vector<support::StationCandidate> load_stations(const std::string& path) {
    std::vector<support::StationCandidate> out;
    try {
        auto j = nlohmann::json::parse(read_file(path));
        require(j.is_array(), ErrorCode::ParseError, "stations file must hold a JSON array");
        for (const auto& s : j) out.push_back({support::StationOption::from_json(s), nullptr});
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, "stations '" + path + "': " + e.what());
    }
    return out;
}

GatewayDeps build_deps(const GatewayConfig& cfg) {
    require(!cfg.intent_corpus.empty(), ErrorCode::InvalidArgument, "intent_corpus is required");
    require(!cfg.docs_dir.empty(), ErrorCode::InvalidArgument, "docs_dir is required");
    GatewayDeps d;

    auto corpus = intent::load_corpus(cfg.intent_corpus);
    d.intent = std::make_shared<intent::IntentGate>(intent::BaselineModel::train(corpus, cfg.seed));

    std::shared_ptr<const ssa::ChatClient> remote;
    if (!cfg.llm_base_url.empty()) {
        auto client = std::make_shared<ssa::RemoteChatClient>(
            ssa::RemoteChatConfig{cfg.llm_base_url, cfg.llm_model, cfg.llm_token_env});
        remote = client;
        d.psa.kind = support::PsaBackend::Kind::llm;
        d.psa.complete = [client](const std::string& system, const std::string& user) {
            return client->complete(system, user);
        };
    }

    auto battery_data = battery::synth_battery({40, 0.3, cfg.seed + 1});
    auto bmodel = battery_model(cfg, battery_data);
    d.fl_initial_weights = bmodel->weights();

    if (!cfg.ids_model.empty()) {
        d.detector = std::make_shared<ids::Detector>(ids::Detector::load(cfg.ids_model));
        d.flow_background = attribution::stratified_background(d.detector->preprocessor().apply(flow_table(cfg)), 40,
                                                               cfg.seed);
    } else {
        auto prep = ids::preprocess_flows(flow_table(cfg));
        ids::DetectorConfig dc;
        dc.gbdt.estimators = 40;
        d.detector = std::make_shared<ids::Detector>(ids::train_detector(prep.table, prep.preprocessor, dc, cfg.seed));
        d.flow_background = attribution::stratified_background(prep.table, 40, cfg.seed);
    }

    std::vector<ssa::ToolDescriptor> tools = {
        ssa::battery_tool(bmodel, attribution::battery_background(battery_data, 6, cfg.seed)),
        ssa::ids_tool(d.detector, d.flow_background)};
    auto registry = std::make_shared<ssa::ToolRegistry>(std::move(tools));
    auto store = std::make_shared<std::vector<ssa::DocumentChunk>>(ssa::load_document_store(cfg.docs_dir));
    d.ssa = std::make_shared<ssa::SafetySecurityAgent>(registry, store, ssa::SsaConfig{}, remote);

    if (!cfg.price_model.empty()) {
        require(!cfg.price_history.empty(), ErrorCode::InvalidArgument, "price_model needs price_history");
        auto model = std::make_shared<forecast::Forecaster>(forecast::Forecaster::load(cfg.price_model));
        auto series = forecast::load_station_csv(cfg.price_history, forecast::Component::price);
        require(!series.empty(), ErrorCode::InvalidArgument, "price_history holds no price series");
        const auto& s = series.front();
        auto window = forecast::SeriesWindow::from_series(s, s.values.size(), model->config().seq_len);
        d.prices = support::forecaster_provider(model, window);
    } else {
        d.prices = synthetic_tariff(cfg.horizon_start_hour, cfg.seed);
    }
    if (!cfg.stations_file.empty()) d.stations = load_stations(cfg.stations_file);
    return d;
}

}  // namespace ioev::gateway
