#include "ioev/forecast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "ioev/core/csv.hpp"
#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"
#include "ioev/nn/checkpoint.hpp"
#include "ioev/nn/layers.hpp"
#include "ioev/nn/optim.hpp"

namespace ioev::forecast {

namespace {
constexpr const char* kCheckpointKind = "ioev.forecast";
}

std::string to_string(Component c) {
    switch (c) {
        case Component::occupancy: return "occupancy";
        case Component::duration: return "duration";
        case Component::volume: return "volume";
        case Component::price: return "price";
    }
    return "?";
}

Component parse_component(const std::string& s) {
    std::string l = to_lower(s);
    if (l == "occupancy") return Component::occupancy;
    if (l == "duration") return Component::duration;
    if (l == "volume") return Component::volume;
    if (l == "price" || l == "e-price" || l == "s-price") return Component::price;
    fail(ErrorCode::InvalidArgument, "unknown component '" + s + "'");
}

void SeriesWindow::validate(int seq_len) const {
    require(static_cast<int>(values.size()) == seq_len, ErrorCode::InvalidArgument,
            "window has " + std::to_string(values.size()) + " values, model expects " + std::to_string(seq_len));
    require(timestamps.empty() || timestamps.size() == values.size(), ErrorCode::InvalidArgument,
            "window timestamps do not match its values");
    for (size_t i = 1; i < timestamps.size(); ++i)
        require(timestamps[i] > timestamps[i - 1], ErrorCode::InvalidArgument, "window timestamps must increase");
    for (double v : values) require(std::isfinite(v), ErrorCode::InvalidArgument, "window has non-finite values");
}

SeriesWindow SeriesWindow::from_series(const StationSeries& s, size_t end, int seq_len) {
    require(seq_len >= 1 && end >= static_cast<size_t>(seq_len) && end <= s.values.size(), ErrorCode::HistoryTooShort,
            "not enough history before index " + std::to_string(end));
    SeriesWindow w;
    w.component = s.component;
    w.station_id = s.station_id;
    w.values.assign(s.values.begin() + static_cast<long>(end - seq_len), s.values.begin() + static_cast<long>(end));
    if (s.timestamps.size() == s.values.size())
        w.timestamps.assign(s.timestamps.begin() + static_cast<long>(end - seq_len),
                            s.timestamps.begin() + static_cast<long>(end));
    return w;
}

void ForecastConfig::validate() const {
    require(seq_len == 3 || seq_len == 6 || seq_len == 9 || seq_len == 12, ErrorCode::InvalidArgument,
            "seq_len must be one of 3, 6, 9, 12");
    require(horizon == 1, ErrorCode::InvalidArgument, "only one-step horizons are supported");
    require(num_layers >= 1 && hidden_units >= 1 && epochs >= 1 && batch_size >= 1 && patience >= 1,
            ErrorCode::InvalidArgument, "sizes must be positive");
    require(learning_rate > 0.0, ErrorCode::InvalidArgument, "learning_rate must be positive");
    require(validation_fraction >= 0.0 && validation_fraction < 1.0, ErrorCode::InvalidArgument,
            "validation_fraction must be in [0, 1)");
}

nlohmann::json ForecastConfig::to_json() const {
    return {{"cell", cell == nn::CellKind::gru ? "gru" : "lstm"},
            {"num_layers", num_layers},
            {"hidden_units", hidden_units},
            {"seq_len", seq_len},
            {"horizon", horizon},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"learning_rate", learning_rate},
            {"validation_fraction", validation_fraction},
            {"patience", patience}};
}

ForecastConfig ForecastConfig::from_json(const nlohmann::json& j) {
    ForecastConfig c;
    c.cell = j.value("cell", "lstm") == "gru" ? nn::CellKind::gru : nn::CellKind::lstm;
    c.num_layers = j.value("num_layers", c.num_layers);
    c.hidden_units = j.value("hidden_units", c.hidden_units);
    c.seq_len = j.value("seq_len", c.seq_len);
    c.horizon = j.value("horizon", c.horizon);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.patience = j.value("patience", c.patience);
    c.validate();
    return c;
}

double clamp_forecast(Component c, double raw) { return c == Component::occupancy ? std::clamp(raw, 0.0, 1.0) : raw; }

struct Forecaster::Network {
    nn::RecurrentStack encoder;
    nn::Dense head;
    nn::ParamSet params;

    Network(const ForecastConfig& cfg, uint64_t seed) {
        nn::Rng rng(seed);
        nn::RecurrentStack::Options o;
        o.cell = cfg.cell;
        o.num_layers = cfg.num_layers;
        o.hidden = cfg.hidden_units;
        encoder = nn::RecurrentStack("encoder", 1, o, rng);
        head = nn::Dense("head", encoder.summary_dim(), 1, rng);
        encoder.collect(params);
        head.collect(params);
    }
};

Forecaster::Forecaster(ForecastConfig cfg, Component component, std::string station_id, double mean, double scale,
                       uint64_t seed)
    : cfg_(cfg), component_(component), station_id_(std::move(station_id)), mean_(mean), scale_(scale) {
    cfg_.validate();
    require(scale_ > 0.0 && std::isfinite(scale_) && std::isfinite(mean_), ErrorCode::InvalidArgument,
            "invalid normalization");
    net_ = std::make_unique<Network>(cfg_, seed);
}

Forecaster::Forecaster(Forecaster&&) noexcept = default;
Forecaster& Forecaster::operator=(Forecaster&&) noexcept = default;
Forecaster::~Forecaster() = default;

namespace {

nn::Sequence to_sequence(const std::vector<std::vector<double>>& windows, const std::vector<size_t>& idx, double mean,
                         double scale) {
    const size_t L = windows[idx.front()].size();
    nn::Sequence seq(L, nn::Matrix(1, static_cast<Eigen::Index>(idx.size())));
    for (size_t b = 0; b < idx.size(); ++b)
        for (size_t t = 0; t < L; ++t) seq[t](0, static_cast<Eigen::Index>(b)) = (windows[idx[b]][t] - mean) / scale;
    return seq;
}

}  // namespace

std::vector<double> Forecaster::predict_raw(const std::vector<std::vector<double>>& windows) const {
    if (windows.empty()) return {};
    for (const auto& w : windows)
        require(static_cast<int>(w.size()) == cfg_.seq_len, ErrorCode::InvalidArgument,
                "window length differs from seq_len");
    std::vector<size_t> idx(windows.size());
    std::iota(idx.begin(), idx.end(), 0);
    nn::Matrix z = net_->head.forward(net_->encoder.encode(to_sequence(windows, idx, mean_, scale_), nullptr, nullptr));
    std::vector<double> out(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) out[i] = z(0, static_cast<Eigen::Index>(i)) * scale_ + mean_;
    return out;
}

Forecast Forecaster::forecast_next(const SeriesWindow& w) const {
    require(w.component == component_, ErrorCode::ComponentMismatch,
            "forecaster predicts " + to_string(component_) + ", window holds " + to_string(w.component));
    w.validate(cfg_.seq_len);
    Forecast f;
    f.component = component_;
    f.station_id = w.station_id.empty() ? station_id_ : w.station_id;
    f.as_of = w.timestamps.empty() ? 0.0 : w.timestamps.back();
    f.point_estimate = clamp_forecast(component_, predict_raw({w.values}).front());
    return f;
}

std::vector<double> Forecaster::forecast_recursive(const SeriesWindow& w, int steps) const {
    require(steps >= 1, ErrorCode::InvalidArgument, "steps must be positive");
    SeriesWindow cur = w;
    std::vector<double> out;
    for (int s = 0; s < steps; ++s) {
        double next = forecast_next(cur).point_estimate;
        out.push_back(next);
        cur.values.erase(cur.values.begin());
        cur.values.push_back(next);
        if (!cur.timestamps.empty()) {
            double dt = cur.timestamps.size() >= 2 ? cur.timestamps.back() - cur.timestamps[cur.timestamps.size() - 2] : 1.0;
            cur.timestamps.erase(cur.timestamps.begin());
            cur.timestamps.push_back(cur.timestamps.back() + dt);
        }
    }
    return out;
}

std::string Forecaster::serialize() const {
    nlohmann::json cfg = {{"forecast", cfg_.to_json()},
                          {"component", to_string(component_)},
                          {"station_id", station_id_},
                          {"mean", mean_},
                          {"scale", scale_},
                          {"validation", {{"mae", validation_.mae}, {"rmse", validation_.rmse}, {"n", validation_.n}}}};
    return nn::encode_checkpoint(kCheckpointKind, cfg, net_->params);
}

Forecaster Forecaster::deserialize(const std::string& bytes) {
    nn::Checkpoint ck = nn::decode_checkpoint(bytes);
    require(ck.kind == kCheckpointKind, ErrorCode::ParseError, "checkpoint kind '" + ck.kind + "' is not a forecaster");
    const auto& c = ck.config;
    Forecaster f(ForecastConfig::from_json(c.at("forecast")), parse_component(c.at("component").get<std::string>()),
                 c.at("station_id").get<std::string>(), c.at("mean").get<double>(), c.at("scale").get<double>(), 0);
    nn::restore_params(ck, f.net_->params);
    if (c.contains("validation")) {
        f.validation_.mae = c["validation"].value("mae", 0.0);
        f.validation_.rmse = c["validation"].value("rmse", 0.0);
        f.validation_.mse = f.validation_.rmse * f.validation_.rmse;
        f.validation_.n = c["validation"].value("n", size_t{0});
    }
    return f;
}

void Forecaster::save(const std::string& path) const { write_file(path, serialize()); }
Forecaster Forecaster::load(const std::string& path) { return deserialize(read_file(path)); }

Forecaster fit_forecaster(const StationSeries& history, const ForecastConfig& cfg, uint64_t seed) {
    cfg.validate();
    const size_t L = static_cast<size_t>(cfg.seq_len);
    require(history.values.size() >= L + 1, ErrorCode::HistoryTooShort,
            "history has " + std::to_string(history.values.size()) + " values, needs at least " +
                std::to_string(L + 1));
    for (double v : history.values) require(std::isfinite(v), ErrorCode::InvalidArgument, "history has non-finite values");

    const double n = static_cast<double>(history.values.size());
    double mean = std::accumulate(history.values.begin(), history.values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : history.values) var += (v - mean) * (v - mean);
    double scale = std::sqrt(var / n);
    if (scale < 1e-12) scale = 1.0;

    Forecaster f(cfg, history.component, history.station_id, mean, scale, seed);
    std::vector<std::vector<double>> windows;
    std::vector<double> targets;
    for (size_t t = L; t < history.values.size(); ++t) {
        windows.emplace_back(history.values.begin() + static_cast<long>(t - L), history.values.begin() + static_cast<long>(t));
        targets.push_back(history.values[t]);
    }
    const size_t total = windows.size();
    size_t n_val = total >= 5 ? static_cast<size_t>(cfg.validation_fraction * total) : 0;
    std::vector<size_t> train(total - n_val), val;
    std::iota(train.begin(), train.end(), 0);
    for (size_t i = total - n_val; i < total; ++i) val.push_back(i);
    if (val.empty()) val = train;

    auto val_errors = [&] {
        std::vector<std::vector<double>> w;
        std::vector<double> y;
        for (size_t i : val) {
            w.push_back(windows[i]);
            y.push_back(targets[i]);
        }
        return eval::regression_metrics(y, f.predict_raw(w));
    };

    nn::Rng rng(seed ^ 0xa0761d6478bd642fULL);
    nn::Adam::Options ao;
    ao.learning_rate = cfg.learning_rate;
    nn::Adam adam(f.net_->params, ao);
    std::vector<double> best = f.net_->params.flatten();
    double best_mse = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        for (size_t start = 0; start < train.size(); start += static_cast<size_t>(cfg.batch_size)) {
            std::vector<size_t> idx(train.begin() + static_cast<long>(start),
                                    train.begin() + static_cast<long>(std::min(train.size(), start + cfg.batch_size)));
            nn::RecurrentStack::Cache cache;
            nn::Matrix s = f.net_->encoder.encode(to_sequence(windows, idx, mean, scale), &cache, nullptr);
            nn::Matrix z = f.net_->head.forward(s);
            nn::Matrix dz(1, z.cols());
            for (Eigen::Index b = 0; b < z.cols(); ++b)
                dz(0, b) = 2.0 * (z(0, b) - (targets[idx[b]] - mean) / scale) / static_cast<double>(idx.size());
            f.net_->params.zero_grad();
            f.net_->encoder.backward(cache, f.net_->head.backward(s, dz));
            adam.step();
        }
        double mse = val_errors().mse;
        if (mse < best_mse) {
            best_mse = mse;
            best = f.net_->params.flatten();
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    f.net_->params.assign(best);
    f.validation_ = val_errors();
    return f;
}

eval::RegressionErrors evaluate_forecast(const Forecaster& f, const StationSeries& test) {
    const size_t L = static_cast<size_t>(f.config().seq_len);
    require(test.values.size() >= L + 1, ErrorCode::HistoryTooShort, "test series shorter than seq_len + 1");
    std::vector<std::vector<double>> windows;
    std::vector<double> targets;
    for (size_t t = L; t < test.values.size(); ++t) {
        windows.emplace_back(test.values.begin() + static_cast<long>(t - L), test.values.begin() + static_cast<long>(t));
        targets.push_back(test.values[t]);
    }
    std::vector<double> pred = f.predict_raw(windows);
    for (double& p : pred) p = clamp_forecast(f.component(), p);
    return eval::regression_metrics(targets, pred);
}

eval::RegressionErrors persistence_baseline(const StationSeries& test, int seq_len) {
    const size_t L = static_cast<size_t>(seq_len);
    require(L >= 1 && test.values.size() >= L + 1, ErrorCode::HistoryTooShort, "test series shorter than seq_len + 1");
    std::vector<double> targets, pred;
    for (size_t t = L; t < test.values.size(); ++t) {
        targets.push_back(test.values[t]);
        pred.push_back(test.values[t - 1]);
    }
    return eval::regression_metrics(targets, pred);
}

std::vector<StationSeries> load_station_csv(const std::string& path, Component component) {
    CsvTable t = read_csv(path);
    auto c_time = t.column("timestamp");
    auto c_station = t.column("station_id");
    auto c_value = t.column(to_string(component));
    require(c_time && c_value, ErrorCode::SchemaMismatch,
            "station CSV needs timestamp and " + to_string(component) + " columns");
    std::map<std::string, std::vector<std::pair<double, double>>> by_station;
    for (const auto& row : t.rows) {
        try {
            double ts = std::stod(row.at(*c_time));
            double v = std::stod(row.at(*c_value));
            by_station[c_station ? row.at(*c_station) : std::string("station")].emplace_back(ts, v);
        } catch (const std::exception&) {
            fail(ErrorCode::ParseError, "non-numeric timestamp or value in " + path);
        }
    }
    std::vector<StationSeries> out;
    for (auto& [id, pts] : by_station) {
        std::stable_sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        StationSeries s;
        s.station_id = id;
        s.component = component;
        for (const auto& [ts, v] : pts) {
            s.timestamps.push_back(ts);
            s.values.push_back(v);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ioev::forecast
