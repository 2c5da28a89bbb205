#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "ioev/forecast/forecaster.hpp"
#include "ioev/forecast/synth.hpp"
#include "support.hpp"

using namespace ioev;
using namespace ioev::forecast;

namespace {

std::pair<StationSeries, StationSeries> split_at(const StationSeries& s, size_t cut) {
    StationSeries a = s, b = s;
    a.values.resize(cut);
    a.timestamps.resize(cut);
    b.values.erase(b.values.begin(), b.values.begin() + static_cast<long>(cut));
    b.timestamps.erase(b.timestamps.begin(), b.timestamps.begin() + static_cast<long>(cut));
    return {a, b};
}

StationSeries constant_series(Component c, double v, size_t n) {
    StationSeries s;
    s.component = c;
    s.station_id = "st-1";
    for (size_t i = 0; i < n; ++i) {
        s.values.push_back(v);
        s.timestamps.push_back(3600.0 * i);
    }
    return s;
}

ForecastConfig quick() {
    ForecastConfig c;
    c.epochs = 60;
    return c;
}

}  // namespace

TEST_CASE("constant series forecast the constant") {
    auto s = constant_series(Component::occupancy, 0.5, 60);
    auto f = fit_forecaster(s, quick(), 1);
    auto fc = f.forecast_next(SeriesWindow::from_series(s, 60, 6));
    CHECK(std::abs(fc.point_estimate - 0.5) <= 1e-2);
    CHECK(fc.component == Component::occupancy);
    CHECK(fc.as_of == s.timestamps.back());

    auto v = constant_series(Component::volume, 42.0, 40);
    auto fv = fit_forecaster(v, quick(), 2);
    CHECK(std::abs(fv.forecast_next(SeriesWindow::from_series(v, 40, 6)).point_estimate - 42.0) <= 1e-2);
}

TEST_CASE("noiseless sinusoid is learned to within 5% of amplitude") {
    SeriesSynthOptions o;
    o.length = 600;
    o.amplitude = 2.0;
    auto [train, test] = split_at(synth_sinusoid(Component::volume, o), 480);
    auto f = fit_forecaster(train, ForecastConfig{}, 3);
    auto e = evaluate_forecast(f, test);
    CHECK(e.rmse <= 0.05 * o.amplitude);
    CHECK(e.rmse < persistence_baseline(test, 6).rmse);
    CHECK(f.validation().rmse <= 0.05 * o.amplitude);
}

TEST_CASE("noisy series beats persistence") {
    SeriesSynthOptions o;
    o.length = 600;
    o.noise_std = 0.3;
    o.seed = 4;
    auto [train, test] = split_at(synth_sinusoid(Component::volume, o), 480);
    auto f = fit_forecaster(train, quick(), 4);
    CHECK(evaluate_forecast(f, test).rmse < persistence_baseline(test, 6).rmse);
}

TEST_CASE("every supported sequence length trains") {
    SeriesSynthOptions o;
    o.length = 200;
    auto s = synth_occupancy_series(o);
    for (int L : {3, 6, 9, 12}) {
        ForecastConfig c = quick();
        c.seq_len = L;
        auto f = fit_forecaster(s, c, 5);
        auto fc = f.forecast_next(SeriesWindow::from_series(s, 200, L));
        CHECK(std::isfinite(fc.point_estimate));
        CHECK(fc.point_estimate >= 0.0);
        CHECK(fc.point_estimate <= 1.0);
    }
    ForecastConfig bad;
    bad.seq_len = 5;
    CHECK_ERROR_CODE(fit_forecaster(s, bad, 1), ErrorCode::InvalidArgument);
}

TEST_CASE("preconditions and component checks") {
    auto s = constant_series(Component::price, 0.3, 6);
    CHECK_ERROR_CODE(fit_forecaster(s, quick(), 1), ErrorCode::HistoryTooShort);
    s = constant_series(Component::price, 0.3, 20);
    auto f = fit_forecaster(s, quick(), 1);
    auto occ = SeriesWindow::from_series(constant_series(Component::occupancy, 0.5, 6), 6, 6);
    CHECK_ERROR_CODE(f.forecast_next(occ), ErrorCode::ComponentMismatch);
    auto w = SeriesWindow::from_series(s, 20, 6);
    w.timestamps[3] = w.timestamps[2];
    CHECK_ERROR_CODE(f.forecast_next(w), ErrorCode::InvalidArgument);
    w = SeriesWindow::from_series(s, 20, 6);
    w.values.pop_back();
    w.timestamps.pop_back();
    CHECK_ERROR_CODE(f.forecast_next(w), ErrorCode::InvalidArgument);
}

TEST_CASE("occupancy forecasts are clamped") {
    CHECK(clamp_forecast(Component::occupancy, 1.2) == 1.0);
    CHECK(clamp_forecast(Component::occupancy, -0.1) == 0.0);
    CHECK(clamp_forecast(Component::volume, 1.2) == 1.2);
    // forecast_next is the clamped raw prediction, even for out-of-range inputs.
    SeriesSynthOptions o;
    o.length = 80;
    auto s = synth_occupancy_series(o);
    auto f = fit_forecaster(s, quick(), 7);
    SeriesWindow w = SeriesWindow::from_series(s, 80, 6);
    for (double level : {-3.0, 0.0, 0.5, 1.0, 4.0}) {
        std::fill(w.values.begin(), w.values.end(), level);
        double raw = f.predict_raw({w.values}).front();
        CHECK(f.forecast_next(w).point_estimate == std::clamp(raw, 0.0, 1.0));
    }
}

TEST_CASE("evaluation arithmetic and baseline") {
    auto zero = constant_series(Component::volume, 0.0, 20);
    auto f = fit_forecaster(zero, quick(), 1);
    StationSeries t = zero;
    t.values = {0, 0, 0, 0, 0, 0, 3, 4};
    t.timestamps.resize(8);
    auto e = evaluate_forecast(f, t);
    CHECK(e.mae == doctest::Approx(3.5).epsilon(1e-3));
    CHECK(e.rmse == doctest::Approx(std::sqrt(12.5)).epsilon(1e-3));
    CHECK(e.rmse >= e.mae);

    SeriesSynthOptions o;
    o.length = 20000;
    o.noise_std = 0.7;
    o.seed = 8;
    auto walk = synth_random_walk(Component::price, o);
    auto p = persistence_baseline(walk, 6);
    CHECK(p.rmse == doctest::Approx(0.7).epsilon(0.03));
    CHECK(p.mae == doctest::Approx(0.7 * std::sqrt(2.0 / 3.141592653589793)).epsilon(0.03));
}

TEST_CASE("predictions never look ahead") {
    SeriesSynthOptions o;
    o.length = 120;
    o.noise_std = 0.1;
    auto s = synth_sinusoid(Component::duration, o);
    auto f = fit_forecaster(s, quick(), 9);
    const size_t t = 70;
    double before = f.forecast_next(SeriesWindow::from_series(s, t, 6)).point_estimate;
    StationSeries shuffled = s;
    std::mt19937_64 rng(1);
    std::shuffle(shuffled.values.begin() + t, shuffled.values.end(), rng);
    CHECK(f.forecast_next(SeriesWindow::from_series(shuffled, t, 6)).point_estimate == before);
}

TEST_CASE("fit is deterministic and checkpoints round trip") {
    SeriesSynthOptions o;
    o.length = 100;
    auto s = synth_price_series(o);
    auto a = fit_forecaster(s, quick(), 11);
    auto b = fit_forecaster(s, quick(), 11);
    auto w = SeriesWindow::from_series(s, 100, 6);
    CHECK(a.forecast_next(w).point_estimate == b.forecast_next(w).point_estimate);

    auto back = Forecaster::deserialize(a.serialize());
    CHECK(back.forecast_next(w).point_estimate == a.forecast_next(w).point_estimate);
    CHECK(back.component() == Component::price);
    CHECK(back.validation().rmse == a.validation().rmse);

    auto steps = a.forecast_recursive(w, 4);
    CHECK(steps.size() == 4);
    CHECK(steps[0] == a.forecast_next(w).point_estimate);
}

TEST_CASE("synthetic series") {
    SeriesSynthOptions o;
    o.amplitude = 1.0;
    o.noise_std = 0.05;
    auto s = synth_sinusoid(Component::volume, o);
    for (double v : s.values) CHECK(std::abs(v) <= 1.0 + 6 * 0.05);
    auto occ = synth_occupancy_series(o);
    for (double v : occ.values) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    auto price = synth_price_series(o);
    CHECK(*std::max_element(price.values.begin(), price.values.begin() + 24) >
          *std::min_element(price.values.begin(), price.values.begin() + 24) + 0.05);
}

TEST_CASE("station CSV loader") {
    auto path = (std::filesystem::temp_directory_path() / "ioev_station.csv").string();
    {
        std::ofstream out(path);
        out << "timestamp,station_id,occupancy,volume\n3,b,0.5,10\n1,a,0.2,5\n2,a,0.3,6\n1,b,0.4,9\n";
    }
    auto series = load_station_csv(path, Component::volume);
    std::filesystem::remove(path);
    REQUIRE(series.size() == 2);
    CHECK(series[0].station_id == "a");
    CHECK(series[0].values == std::vector<double>{5, 6});
    CHECK(series[1].values == std::vector<double>{9, 10});
}
