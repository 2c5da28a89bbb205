#include <cmath>
#include <filesystem>
#include <random>

#include "ioev/battery/model.hpp"
#include "ioev/battery/synth.hpp"
#include "ioev/core/text.hpp"
#include "ioev/fl/federated.hpp"
#include "support.hpp"

using namespace ioev;
using namespace ioev::battery;

namespace {

RawChargingSeries series_of_length(size_t len) {
    nn::Rng rng(5);
    return synth_series(false, len, rng, "v");
}

MultiTaskModelConfig tiny_config(Arch arch) {
    MultiTaskModelConfig c;
    c.arch = arch;
    c.hidden_units = 4;
    c.head_hidden = 3;
    c.dropout = 0.0;
    c.seed = 7;
    return c;
}

std::vector<nn::Matrix> random_sequences(size_t n, Eigen::Index steps, nn::Rng& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<nn::Matrix> out;
    for (size_t i = 0; i < n; ++i) {
        nn::Matrix m(steps, static_cast<Eigen::Index>(kNumChannels));
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = nd(rng);
        out.push_back(m);
    }
    return out;
}

}  // namespace

TEST_CASE("segment_windows examples") {
    CHECK(segment_windows(series_of_length(128), 1).size() == 1);
    CHECK(segment_windows(series_of_length(130), 1).size() == 3);
    CHECK_ERROR_CODE(segment_windows(series_of_length(127), 1), ErrorCode::SeriesTooShort);
    for (size_t len : {128u, 129u, 200u, 301u, 517u})
        for (size_t stride : {1u, 3u, 16u, 64u, 200u}) {
            auto ws = segment_windows(series_of_length(len), stride);
            CHECK(ws.size() == (len - 128) / stride + 1);
            CHECK(ws.back().window_start_index() == static_cast<long>((ws.size() - 1) * stride));
        }
}

TEST_CASE("window invariants are enforced at construction") {
    auto s = series_of_length(128);
    auto frames = s.frames;
    frames[17].soc = 101.0;
    CHECK_ERROR_CODE(TelemetryWindow(frames, "v"), ErrorCode::InvalidArgument);
    frames = s.frames;
    frames[3].v_min = frames[3].v_mean + 0.01;
    CHECK_ERROR_CODE(TelemetryWindow(frames, "v"), ErrorCode::InvalidArgument);
    frames = s.frames;
    frames.pop_back();
    CHECK_ERROR_CODE(TelemetryWindow(frames, "v"), ErrorCode::InvalidArgument);
    TelemetryWindow w(s.frames, "v");
    auto back = TelemetryWindow::from_flat(w.flatten(), "v");
    CHECK(back.flatten() == w.flatten());
}

TEST_CASE("multi_task_loss examples") {
    HeadOutputs pred{{std::exp(-0.5)}, {1.5}};
    HeadTargets target{{1.0}, {1.0}};
    CHECK(multi_task_loss(pred, target, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(multi_task_loss(pred, target, 0.0) == doctest::Approx(0.5).epsilon(1e-12));

    HeadOutputs perfect{{1.0, 0.0}, {0.3, -2.0}};
    HeadTargets exact{{1.0, 0.0}, {0.3, -2.0}};
    double l = multi_task_loss(perfect, exact, 1.0);
    CHECK(l > 0.0);
    CHECK(l < 2e-7);

    HeadOutputs short_pred{{0.5}, {0.0}};
    CHECK_ERROR_CODE(multi_task_loss(short_pred, exact, 1.0), ErrorCode::ShapeMismatch);
}

TEST_CASE("forward emits one probability and one scalar per window") {
    auto data = synth_battery({6, 0.5, 2});
    MultiTaskModel m(MultiTaskModelConfig{}, Normalization::fit(data));
    nn::Rng rng(1);
    auto seqs = random_sequences(3, 128, rng);
    auto shorter = random_sequences(2, 9, rng);
    seqs.insert(seqs.end(), shorter.begin(), shorter.end());
    auto out = m.forward(seqs);
    REQUIRE(out.prob.size() == 5);
    REQUIRE(out.reg.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(out.prob[i] >= 0.0);
        CHECK(out.prob[i] <= 1.0);
        CHECK(std::isfinite(out.reg[i]));
    }
    // Batching must not change per-sequence outputs.
    auto single = m.forward(std::span<const nn::Matrix>(&seqs[3], 1));
    CHECK(single.prob[0] == doctest::Approx(out.prob[3]).epsilon(1e-12));

    auto d = m.infer(data[0].window);
    CHECK(d.soh_label == (d.soh_anomaly_prob >= m.config().soh_threshold));
    CHECK(d.model_id == m.model_id());
    CHECK_ERROR_CODE(infer_diagnosis(nullptr, data[0].window), ErrorCode::ModelNotLoaded);
}

TEST_CASE("analytic gradients match central differences") {
    for (Arch arch : {Arch::lstm, Arch::bilstm, Arch::gru}) {
        CAPTURE(to_string(arch));
        MultiTaskModel m(tiny_config(arch), Normalization{});
        nn::Rng rng(21);
        auto seqs = random_sequences(3, 5, rng);
        HeadTargets t{{1.0, 0.0, 1.0}, {0.4, -1.1, 2.0}};
        m.zero_gradients();
        m.accumulate_gradients(seqs, t, nullptr);
        std::vector<double> grad = m.gradients();
        std::vector<double> w = m.weights();
        const double h = 1e-5;
        double worst = 0.0;
        for (size_t i = 0; i < w.size(); ++i) {
            auto wp = w, wm = w;
            wp[i] += h;
            wm[i] -= h;
            m.set_weights(wp);
            double lp = multi_task_loss(m.forward(seqs), t, 1.0);
            m.set_weights(wm);
            double lm = multi_task_loss(m.forward(seqs), t, 1.0);
            double num = (lp - lm) / (2 * h);
            double rel = std::abs(num - grad[i]) / std::max(1e-6, std::abs(num) + std::abs(grad[i]));
            worst = std::max(worst, rel);
        }
        CHECK(worst <= 1e-4);
        m.set_weights(w);
    }
}

TEST_CASE("proximal term and local objective") {
    auto data = synth_battery({12, 0.5, 4});
    MultiTaskModel m(tiny_config(Arch::gru), Normalization::fit(data));
    auto w = m.weights();
    CHECK(proximal_term(w, w, 0.2) == 0.0);
    auto shifted = w;
    shifted[0] += 2.0;
    CHECK(proximal_term(shifted, w, 0.5) == doctest::Approx(1.0));

    MultiTaskModelConfig cfg = m.config();
    cfg.mu_prox = 0.0;
    std::vector<nn::Matrix> seqs;
    for (const auto& s : data) seqs.push_back(window_matrix(s.window));
    double plain = multi_task_loss(m.forward(seqs), targets_for(m, data), cfg.lambda_reg);
    CHECK(local_objective(m, data, shifted, cfg) == doctest::Approx(plain).epsilon(1e-12));
    cfg.mu_prox = 0.5;
    CHECK(local_objective(m, data, shifted, cfg) == doctest::Approx(plain + 1.0).epsilon(1e-12));
}

TEST_CASE("train_local examples") {
    auto shard = synth_battery({40, 0.3, 8});
    MultiTaskModel m(MultiTaskModelConfig{}, Normalization::fit(shard));
    auto global = m.weights();

    SUBCASE("huge proximal weight pins the local model") {
        MultiTaskModelConfig cfg = m.config();
        cfg.mu_prox = 1e6;
        auto r = train_local(m, shard, global, cfg);
        CHECK(fl::l2_norm(r.update.weight_delta) <= 1e-3);
        CHECK(r.update.num_samples == shard.size());
        cfg.mu_prox = 0.0;
        auto free = train_local(m, shard, global, cfg);
        CHECK(fl::l2_norm(free.update.weight_delta) > 10 * fl::l2_norm(r.update.weight_delta));
    }
    SUBCASE("identical shards and seed give identical updates") {
        auto a = train_local(m, shard, global, m.config(), "x", 3);
        auto b = train_local(m, synth_battery({40, 0.3, 8}), global, m.config(), "x", 3);
        CHECK(fl::encode_update(a.update) == fl::encode_update(b.update));
    }
    SUBCASE("empty shard") {
        CHECK_ERROR_CODE(train_local(m, BatteryDataset{}, global, m.config()), ErrorCode::EmptyShard);
    }
    SUBCASE("patience stops training once validation stalls") {
        MultiTaskModelConfig cfg = tiny_config(Arch::gru);
        cfg.learning_rate = 1e-12;
        cfg.local_epochs = 30;
        cfg.patience = 2;
        MultiTaskModel t(cfg, Normalization::fit(shard));
        auto r = train_local(t, shard, t.weights(), cfg);
        CHECK(r.stopped_early);
        CHECK(r.epochs_run < 30);
    }
}

TEST_CASE("single-client round equals direct local training") {
    auto shard = synth_battery({20, 0.3, 9});
    MultiTaskModelConfig cfg = tiny_config(Arch::lstm);
    cfg.mu_prox = 0.0;
    auto ref = std::make_shared<const MultiTaskModel>(cfg, Normalization::fit(shard));
    std::vector<std::shared_ptr<fl::FederatedClient>> clients = {std::make_shared<BatteryClient>("solo", ref, shard, cfg)};
    fl::RoundState s;
    s.global_weights = ref->weights();
    fl::DPConfig dp;
    dp.clip_norm = std::numeric_limits<double>::infinity();
    auto next = fl::run_round(clients, s, dp);
    auto direct = train_local(*ref, shard, s.global_weights, cfg, "solo", 0);
    for (size_t i = 0; i < next.global_weights.size(); ++i)
        CHECK(next.global_weights[i] == s.global_weights[i] + direct.update.weight_delta[i]);
}

TEST_CASE("raising the threshold never adds positives") {
    auto data = synth_battery({60, 0.3, 10});
    MultiTaskModel m(MultiTaskModelConfig{}, Normalization::fit(data));
    std::vector<TelemetryWindow> ws;
    for (const auto& s : data) ws.push_back(s.window);
    auto diag = m.infer_batch(ws);
    size_t prev = diag.size() + 1;
    for (double th = 0.0; th <= 1.0; th += 0.01) {
        size_t pos = 0;
        for (const auto& d : diag) pos += d.soh_anomaly_prob >= th;
        CHECK(pos <= prev);
        prev = pos;
    }
}

TEST_CASE("trained model separates the generator's regimes") {
    auto train = synth_battery({300, 0.3, 1});
    auto test = synth_battery({200, 0.3, 2});
    MultiTaskModelConfig cfg;
    cfg.arch = Arch::gru;
    MultiTaskModel m(cfg, Normalization::fit(train));
    fit_centralized(m, train, 12, 1);

    CHECK_FALSE(m.infer(constant_window(false)).soh_label);
    CHECK(m.infer(constant_window(true)).soh_label);
    size_t correct = 0;
    for (const auto& s : test) correct += m.infer(s.window).soh_label == s.anomaly;
    CHECK(static_cast<double>(correct) / test.size() >= 0.95);

    SUBCASE("checkpoint round trip") {
        auto path = (std::filesystem::temp_directory_path() / "ioev_battery_test.ckpt").string();
        m.save(path);
        MultiTaskModel back = MultiTaskModel::load(path);
        std::filesystem::remove(path);
        CHECK(back.model_id() == m.model_id());
        CHECK(back.weights() == m.weights());
        auto a = m.infer(test[0].window), b = back.infer(test[0].window);
        CHECK(a.soh_anomaly_prob == b.soh_anomaly_prob);
        CHECK(a.soc_estimate == b.soc_estimate);
        CHECK(back.config().to_json() == m.config().to_json());
        CHECK_ERROR_CODE(MultiTaskModel::deserialize("garbage"), ErrorCode::ParseError);
    }
}

TEST_CASE("config defaults") {
    MultiTaskModelConfig c;
    CHECK(c.num_layers == 2);
    CHECK(c.hidden_units == 64);
    CHECK(c.head_hidden == 32);
    CHECK(c.dropout == 0.3);
    CHECK(c.learning_rate == 0.001);
    CHECK(c.batch_size == 8);
    CHECK(c.rounds == 20);
    CHECK(c.mu_prox == 0.2);
    CHECK(c.patience == 10);
    CHECK(c.lambda_reg == 1.0);
    c.mu_prox = -1.0;
    CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidArgument);
    c.mu_prox = 0.0;
    c.lambda_reg = 0.0;
    CHECK_ERROR_CODE(c.validate(), ErrorCode::InvalidArgument);
}

TEST_CASE("synthetic generator") {
    auto a = synth_battery({50, 0.3, 77});
    auto b = synth_battery({50, 0.3, 77});
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].window.flatten() == b[i].window.flatten());
        CHECK(a[i].target == b[i].target);
    }
    auto big = synth_battery({10000, 0.3, 5});
    size_t pos = 0;
    for (const auto& s : big) pos += s.anomaly;
    CHECK(std::abs(static_cast<double>(pos) / big.size() - 0.3) <= 0.02);
}

TEST_CASE("charging CSV loader") {
    std::string csv =
        "car_id,timestamp,volt_mean,min_single_volt,max_single_volt,current,max_temp,soc,label,capacity\n"
        "b,20,3.70,3.69,3.71,30,25,50,1,120\n"
        "a,10,3.60,3.59,3.61,30,25,40,0,150\n"
        "b,10,3.65,3.64,3.66,30,25,49,1,120\n";
    auto series = series_from_csv(parse_csv(csv));
    REQUIRE(series.size() == 2);
    CHECK(series[0].vehicle_id == "a");
    CHECK(series[1].frames.size() == 2);
    CHECK(series[1].frames[0].v_mean == 3.65);
    CHECK(series[1].anomaly == true);
    CHECK(series[1].capacity == 120.0);
    CHECK_ERROR_CODE(series_from_csv(parse_csv("car_id,soc\nx,1\n")), ErrorCode::SchemaMismatch);
}
