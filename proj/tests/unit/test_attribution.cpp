#include <chrono>
#include <cmath>
#include <random>

#include "ioev/attribution/adapters.hpp"
#include "ioev/attribution/shapley.hpp"
#include "ioev/battery/synth.hpp"
#include "ioev/ids/synth.hpp"
#include "support.hpp"

using namespace ioev;
using namespace ioev::attribution;

namespace {

BatchModelFn pointwise(std::function<double(const Row&)> g) {
    return [g](const std::vector<Row>& rows) {
        std::vector<double> y;
        for (const auto& r : rows) y.push_back(g(r));
        return y;
    };
}

BackgroundSet random_background(size_t rows, size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    BackgroundSet bg;
    for (size_t i = 0; i < rows; ++i) {
        Row r(dim);
        for (double& v : r) v = z(rng);
        bg.rows.push_back(r);
    }
    return bg;
}

Row random_row(size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 2.0);
    Row r(dim);
    for (double& v : r) v = z(rng);
    return r;
}

// A fixed nonlinear function with interactions among all inputs.
double wiggly(const Row& r) {
    double s = 0.0;
    for (size_t i = 0; i < r.size(); ++i) s += std::sin(r[i] * (1.0 + 0.3 * i)) * r[(i + 1) % r.size()];
    return s + std::tanh(r[0] * r.back());
}

}  // namespace

TEST_CASE("linear models have the closed-form attribution") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        size_t dim = 1 + trial % 10;
        Row w(dim);
        for (double& v : w) v = z(rng);
        double b0 = z(rng);
        auto f = pointwise([&](const Row& r) {
            double s = b0;
            for (size_t i = 0; i < dim; ++i) s += w[i] * r[i];
            return s;
        });
        auto bg = random_background(1 + trial % 7, dim, rng);
        Row x = random_row(dim, rng);
        auto a = shapley_attribution(f, x, bg);
        for (size_t i = 0; i < dim; ++i) {
            double mean = 0.0;
            for (const auto& r : bg.rows) mean += r[i];
            mean /= bg.rows.size();
            CHECK(std::abs(a.items[i].phi - w[i] * (x[i] - mean)) <= 1e-9);
        }
        CHECK(a.efficiency_gap() <= 1e-9);
    }
}

TEST_CASE("small closed examples") {
    BackgroundSet zero{{{0.0, 0.0}}};
    auto prod = shapley_attribution(pointwise([](const Row& r) { return r[0] * r[1]; }), {1.0, 1.0}, zero);
    CHECK(prod.items[0].phi == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(prod.items[1].phi == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(prod.base_value == 0.0);
    CHECK(prod.prediction == 1.0);

    std::mt19937_64 rng(2);
    auto konst = shapley_attribution(pointwise([](const Row&) { return 4.2; }), random_row(5, rng),
                                     random_background(4, 5, rng));
    for (const auto& it : konst.items) CHECK(it.phi == 0.0);
    CHECK(konst.base_value == konst.prediction);
}

TEST_CASE("axioms hold in exact mode") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        size_t dim = 2 + trial % 9;
        auto bg = random_background(1 + trial % 5, dim, rng);
        Row x = random_row(dim, rng);

        auto a = shapley_attribution(pointwise(wiggly), x, bg);
        CHECK(a.efficiency_gap() <= 1e-9);

        // Dummy: the last input is never read.
        auto ignore_last = pointwise([&](const Row& r) { return wiggly(Row(r.begin(), r.end() - 1)); });
        if (dim > 2) CHECK(shapley_attribution(ignore_last, x, bg).items.back().phi == 0.0);

        // Linearity.
        auto g = pointwise([](const Row& r) { return r[0] * r[0] - std::cos(r[1]); });
        auto sum = pointwise([&](const Row& r) { return wiggly(r) + r[0] * r[0] - std::cos(r[1]); });
        auto ag = shapley_attribution(g, x, bg);
        auto as = shapley_attribution(sum, x, bg);
        for (size_t i = 0; i < dim; ++i) CHECK(std::abs(as.items[i].phi - a.items[i].phi - ag.items[i].phi) <= 1e-9);
    }
}

TEST_CASE("symmetric players receive equal attribution") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        auto bg = random_background(3, 4, rng);
        for (auto& r : bg.rows) r[1] = r[0];
        Row x = random_row(4, rng);
        x[1] = x[0];
        auto f = pointwise([](const Row& r) { return std::exp(0.3 * r[0] * r[1]) + r[0] + r[1] + r[2] * r[3] * r[0] * r[1]; });
        auto a = shapley_attribution(f, x, bg);
        CHECK(std::abs(a.items[0].phi - a.items[1].phi) <= 1e-12);
    }
}

TEST_CASE("errors") {
    BackgroundSet bg{{Row(13, 0.0)}};
    CHECK_ERROR_CODE(shapley_attribution(pointwise(wiggly), Row(13, 1.0), bg), ErrorCode::TooManyFeaturesForExact);
    CHECK_ERROR_CODE(shapley_attribution(pointwise(wiggly), Row(3, 1.0), BackgroundSet{}), ErrorCode::EmptyBackground);
    ShapleyOptions o;
    o.mode = ShapleyMode::sampled;
    o.budget = 5;
    CHECK_ERROR_CODE(shapley_attribution(pointwise(wiggly), Row(3, 1.0), BackgroundSet{{Row(3, 0.0)}}, o),
                     ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(shapley_attribution(pointwise(wiggly), Row(3, 1.0), BackgroundSet{{Row(2, 0.0)}}),
                     ErrorCode::ShapeMismatch);
}

TEST_CASE("sampled mode is efficient and close to exact") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        size_t dim = 4 + trial % 5;
        auto bg = random_background(4, dim, rng);
        Row x = random_row(dim, rng);
        auto exact = shapley_attribution(pointwise(wiggly), x, bg);
        ShapleyOptions o;
        o.mode = ShapleyMode::sampled;
        o.budget = 400;
        o.seed = trial;
        auto est = shapley_attribution(pointwise(wiggly), x, bg, o);
        REQUIRE(est.mc_error.has_value());
        CHECK(est.efficiency_gap() <= 1e-9);
        CHECK(est.base_value == doctest::Approx(exact.base_value).epsilon(1e-12));
        for (size_t i = 0; i < dim; ++i) CHECK(std::abs(est.items[i].phi - exact.items[i].phi) <= 5.0 * *est.mc_error + 1e-9);
    }
    // Additive models have a constant marginal contribution, so sampling is exact.
    auto bg = random_background(3, 6, rng);
    Row x = random_row(6, rng);
    auto add = pointwise([](const Row& r) { return r[0] + 2 * r[1] - r[5]; });
    ShapleyOptions o;
    o.mode = ShapleyMode::sampled;
    auto est = shapley_attribution(add, x, bg, o);
    auto exact = shapley_attribution(add, x, bg);
    CHECK(*est.mc_error <= 1e-12);
    for (size_t i = 0; i < 6; ++i) CHECK(est.items[i].phi == doctest::Approx(exact.items[i].phi).epsilon(1e-12));
}

TEST_CASE("grouped players") {
    std::mt19937_64 rng(6);
    auto bg = random_background(3, 6, rng);
    Row x = random_row(6, rng);
    ShapleyOptions singles;
    for (size_t c = 0; c < 6; ++c) singles.groups.push_back({"g" + std::to_string(c), {c}});
    auto a = shapley_attribution(pointwise(wiggly), x, bg);
    auto b = shapley_attribution(pointwise(wiggly), x, bg, singles);
    for (size_t i = 0; i < 6; ++i) CHECK(a.items[i].phi == doctest::Approx(b.items[i].phi).epsilon(1e-14));

    ShapleyOptions pairs;
    pairs.groups = {{"a", {0, 1}}, {"b", {2, 3}}, {"c", {4, 5}}};
    auto p = shapley_attribution(pointwise(wiggly), x, bg, pairs);
    REQUIRE(p.items.size() == 3);
    CHECK(p.items[0].value == doctest::Approx((x[0] + x[1]) / 2));
    CHECK(p.efficiency_gap() <= 1e-9);

    pairs.groups = {{"a", {0, 1}}, {"b", {1}}};
    CHECK_ERROR_CODE(shapley_attribution(pointwise(wiggly), x, bg, pairs), ErrorCode::InvalidArgument);
}

TEST_CASE("waterfall ordering and remainder") {
    Attribution a;
    a.base_value = 1.0;
    a.items = {{"a", 0.0, 2.0}, {"b", 0.0, -3.0}, {"c", 0.0, 0.1}};
    a.prediction = a.base_value + a.sum_phi();
    auto w = waterfall_data(a, 2);
    REQUIRE(w.bars.size() == 2);
    CHECK(w.bars[0].feature == "b");
    CHECK(w.bars[1].feature == "a");
    CHECK(w.remainder == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(waterfall_data(a, 3).remainder == 0.0);
    auto all = waterfall_data(a, 10);
    CHECK(all.bars.size() == 3);
    CHECK(all.remainder == 0.0);
    CHECK_ERROR_CODE(waterfall_data(a, 0), ErrorCode::InvalidArgument);
    double total = w.base_value + w.remainder;
    for (const auto& b : w.bars) total += b.contribution;
    CHECK(total == doctest::Approx(w.prediction).epsilon(1e-12));
}

TEST_CASE("attribution JSON round trip") {
    Attribution a;
    a.base_value = 0.25;
    a.prediction = 0.9;
    a.items = {{"bidirectional_duration_ms", 12000.0, 0.5}, {"bidirectional_packets", 300.0, 0.15}};
    a.mc_error = 0.01;
    auto j = a.to_json();
    CHECK(j.at("items").at(0).at("name") == "bidirectional_duration_ms");
    auto b = Attribution::from_json(j);
    CHECK(b.to_json() == j);
}

TEST_CASE("flow explanation targets the predicted class") {
    auto prep = ids::preprocess_flows(ids::synth_flows({1500, 2}));
    ids::DetectorConfig cfg;
    cfg.gbdt.estimators = 60;
    auto det = ids::train_detector(prep.table, prep.preprocessor, cfg, 1);
    auto bg = stratified_background(prep.table, 100, 1);
    CHECK(bg.rows.size() <= 100);
    CHECK(bg.rows.size() >= 95);
    auto dos = ids::cluster_center(ids::AttackClass::dos, det.feature_names());
    auto e = explain_flow(det, dos, bg);
    CHECK(e.prediction.label == ids::AttackClass::dos);
    CHECK(e.attribution.prediction == doctest::Approx(e.prediction.probabilities[2]).epsilon(1e-12));
    CHECK(e.attribution.efficiency_gap() <= 1e-6);
    CHECK(e.attribution.items.size() == det.feature_names().size());
    CHECK(e.attribution.items[0].name == det.feature_names()[0]);
}

TEST_CASE("battery explanation uses channel players") {
    auto data = battery::synth_battery({30, 0.3, 3});
    battery::MultiTaskModelConfig cfg;
    cfg.hidden_units = 16;
    battery::MultiTaskModel m(cfg, battery::Normalization::fit(data));
    auto bg = battery_background(data, 8, 1);
    auto a = explain_battery(m, data[0].window, bg);
    REQUIRE(a.items.size() == battery::kNumChannels);
    CHECK(a.items[4].name == std::string("temperature"));
    CHECK(a.efficiency_gap() <= 1e-9);
    CHECK(a.prediction == doctest::Approx(m.infer(data[0].window).soh_anomaly_prob).epsilon(1e-12));
}
