#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "ioev/fl/federated.hpp"
#include "support.hpp"

using namespace ioev;
using namespace ioev::fl;

namespace {

ModelUpdate make_update(std::vector<double> d, uint64_t n = 1, std::string id = "c") {
    ModelUpdate u;
    u.weight_delta = std::move(d);
    u.num_samples = n;
    u.client_id = std::move(id);
    return u;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

class FixedClient : public FederatedClient {
public:
    FixedClient(std::string id, std::vector<double> delta, uint64_t n = 1) : id_(std::move(id)), delta_(std::move(delta)), n_(n) {}
    std::string id() const override { return id_; }
    ModelUpdate train(std::span<const double>, int round) override {
        calls++;
        ModelUpdate u = make_update(delta_, n_, id_);
        u.round = round;
        return u;
    }
    std::atomic<int> calls{0};

private:
    std::string id_;
    std::vector<double> delta_;
    uint64_t n_;
};

class ThrowingClient : public FederatedClient {
public:
    std::string id() const override { return "broken"; }
    ModelUpdate train(std::span<const double>, int) override { throw std::runtime_error("disk full"); }
};

class SlowClient : public FederatedClient {
public:
    std::string id() const override { return "slow"; }
    ModelUpdate train(std::span<const double> g, int) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        return make_update(std::vector<double>(g.size(), 100.0));
    }
};

}  // namespace

TEST_CASE("clip_update scales long updates onto the ball") {
    auto u = make_update({6.0, 8.0});  // norm 10
    auto c = clip_update(u, 2.0);
    CHECK(l2_norm(c.weight_delta) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(c.weight_delta[0] == doctest::Approx(6.0 / 5.0));
    CHECK(c.weight_delta[1] == doctest::Approx(8.0 / 5.0));

    auto small = make_update({0.6, 0.8});
    CHECK(clip_update(small, 2.0).weight_delta == small.weight_delta);

    auto zero = make_update({0.0, 0.0, 0.0});
    CHECK(clip_update(zero, 1.0).weight_delta == zero.weight_delta);
    CHECK_ERROR_CODE(clip_update(u, 0.0), ErrorCode::InvalidArgument);
}

TEST_CASE("clipping is idempotent and preserves direction") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 3.0);
    for (int k = 0; k < 200; ++k) {
        std::vector<double> d(7);
        for (double& v : d) v = nd(rng);
        auto once = clip_update(make_update(d), 1.5);
        auto twice = clip_update(once, 1.5);
        CHECK(l2_norm(once.weight_delta) <= 1.5 + 1e-12);
        for (size_t i = 0; i < d.size(); ++i) {
            CHECK(twice.weight_delta[i] == doctest::Approx(once.weight_delta[i]).epsilon(1e-14));
            CHECK(once.weight_delta[i] * d[i] >= 0.0);
        }
    }
}

TEST_CASE("aggregate examples") {
    RoundState r;
    r.global_weights = {1.0, -2.0, 0.5};
    DPConfig dp;
    dp.clip_norm = 10.0;

    SUBCASE("opposite deltas cancel") {
        r.received = {make_update({0.3, 0.1, -0.2}, 5, "a"), make_update({-0.3, -0.1, 0.2}, 5, "b")};
        auto g = aggregate(r, dp);
        for (size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(r.global_weights[i]).epsilon(1e-15));
    }
    SUBCASE("single client within clip adds its delta") {
        r.received = {make_update({0.3, 0.1, -0.2})};
        auto g = aggregate(r, dp);
        CHECK(g[0] == doctest::Approx(1.3));
        CHECK(g[1] == doctest::Approx(-1.9));
        CHECK(g[2] == doctest::Approx(0.3));
    }
    SUBCASE("errors") {
        CHECK_ERROR_CODE(aggregate(r, dp), ErrorCode::EmptyRound);
        r.received = {make_update({0.1, 0.2})};
        CHECK_ERROR_CODE(aggregate(r, dp), ErrorCode::DimensionMismatch);
    }
}

TEST_CASE("sigma zero with infinite clip is exact FedAvg") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd(0.0, 5.0);
    std::uniform_int_distribution<int> ns(1, 500);
    for (int trial = 0; trial < 50; ++trial) {
        RoundState r;
        const size_t dim = 16;
        r.global_weights.resize(dim);
        for (double& v : r.global_weights) v = nd(rng);
        const int clients = 1 + trial % 6;
        for (int c = 0; c < clients; ++c) {
            std::vector<double> d(dim);
            for (double& v : d) v = nd(rng);
            r.received.push_back(make_update(d, static_cast<uint64_t>(ns(rng))));
        }
        DPConfig dp;
        dp.clip_norm = kInf;
        auto got = aggregate(r, dp);
        // Independent oracle: numerator / denominator form.
        for (size_t i = 0; i < dim; ++i) {
            long double num = 0.0L, den = 0.0L;
            for (const auto& u : r.received) {
                num += static_cast<long double>(u.num_samples) * u.weight_delta[i];
                den += static_cast<long double>(u.num_samples);
            }
            double expected = r.global_weights[i] + static_cast<double>(num / den);
            CHECK(std::abs(got[i] - expected) <= 1e-12);
        }
    }
}

TEST_CASE("noise standard deviation matches sigma over client count") {
    RoundState r;
    r.global_weights = {0.0, 0.0};
    r.received = {make_update({0.1, -0.1}), make_update({0.3, 0.1})};
    DPConfig dp;
    dp.noise_sigma = 0.1;
    const int reps = 10000;
    double sum = 0.0, sq = 0.0;
    for (int k = 0; k < reps; ++k) {
        dp.seed = static_cast<uint64_t>(k) * 7919 + 1;
        auto g = aggregate(r, dp);
        double noise = g[0] - 0.2;
        sum += noise;
        sq += noise * noise;
    }
    double mean = sum / reps;
    double sd = std::sqrt(sq / reps - mean * mean);
    CHECK(std::abs(sd - 0.05) <= 0.05 * 0.05);
    CHECK(std::abs(mean) < 0.005);
}

TEST_CASE("fixed dp seed reproduces aggregated weights") {
    RoundState r;
    r.global_weights = {1.0, 2.0, 3.0};
    r.received = {make_update({0.5, 0.5, 0.5})};
    r.round_index = 4;
    DPConfig dp;
    dp.noise_sigma = 0.3;
    dp.seed = 42;
    CHECK(aggregate(r, dp) == aggregate(r, dp));
    DPConfig other = dp;
    other.seed = 43;
    CHECK(aggregate(r, dp) != aggregate(r, other));
}

TEST_CASE("run_round examples") {
    RoundState s;
    s.global_weights = {0.0, 0.0};
    DPConfig dp;

    SUBCASE("no clients") {
        std::vector<std::shared_ptr<FederatedClient>> none;
        CHECK_ERROR_CODE(run_round(none, s, dp), ErrorCode::EmptyRound);
    }
    SUBCASE("identical clients give that client's clipped delta") {
        std::vector<std::shared_ptr<FederatedClient>> clients;
        for (int i = 0; i < 3; ++i) clients.push_back(std::make_shared<FixedClient>("c" + std::to_string(i), std::vector<double>{3.0, 4.0}));
        auto next = run_round(clients, s, dp);
        auto clipped = clip_update(make_update({3.0, 4.0}), dp.clip_norm);
        CHECK(next.round_index == 1);
        CHECK(next.status == RoundStatus::aggregated);
        CHECK(next.received.size() == 3);
        CHECK(next.global_weights[0] == doctest::Approx(clipped.weight_delta[0]).epsilon(1e-15));
        CHECK(next.global_weights[1] == doctest::Approx(clipped.weight_delta[1]).epsilon(1e-15));
    }
    SUBCASE("failures are recorded and survivors aggregated") {
        std::vector<std::shared_ptr<FederatedClient>> clients = {
            std::make_shared<FixedClient>("ok", std::vector<double>{0.2, 0.0}), std::make_shared<ThrowingClient>(),
            std::make_shared<FixedClient>("bad-dim", std::vector<double>{0.2})};
        for (bool concurrent : {true, false}) {
            RoundOptions o;
            o.concurrent = concurrent;
            auto next = run_round(clients, s, dp, o);
            CHECK(next.received.size() == 1);
            REQUIRE(next.failures.size() == 2);
            CHECK(next.failures[0].client_id == "broken");
            CHECK(next.global_weights[0] == doctest::Approx(0.2));
        }
    }
    SUBCASE("late clients are dropped") {
        std::vector<std::shared_ptr<FederatedClient>> clients = {
            std::make_shared<FixedClient>("fast", std::vector<double>{0.1, 0.1}), std::make_shared<SlowClient>()};
        RoundOptions o;
        o.client_timeout = std::chrono::milliseconds(50);
        auto next = run_round(clients, s, dp, o);
        REQUIRE(next.failures.size() == 1);
        CHECK(next.failures[0].reason == "timeout");
        CHECK(next.global_weights[0] == doctest::Approx(0.1));
        std::this_thread::sleep_for(std::chrono::milliseconds(500));
    }
    SUBCASE("all clients failing") {
        std::vector<std::shared_ptr<FederatedClient>> clients = {std::make_shared<ThrowingClient>()};
        CHECK_ERROR_CODE(run_round(clients, s, dp), ErrorCode::EmptyRound);
    }
}

TEST_CASE("update wire format round trips") {
    ModelUpdate u = make_update({1.5, -0.25, 1e-300, 3.0}, 17, "tok-abc");
    u.round = 9;
    ModelUpdate back = decode_update(encode_update(u));
    CHECK(back.weight_delta == u.weight_delta);
    CHECK(back.num_samples == 17);
    CHECK(back.client_id == "tok-abc");
    CHECK(back.round == 9);

    auto [round, w] = decode_weights(encode_weights(3, u.weight_delta));
    CHECK(round == 3);
    CHECK(w == u.weight_delta);

    std::string bytes = encode_update(u);
    CHECK_ERROR_CODE(decode_update(bytes.substr(0, bytes.size() - 3)), ErrorCode::ParseError);
    CHECK_ERROR_CODE(decode_update(bytes + "x"), ErrorCode::ParseError);
    CHECK_ERROR_CODE(decode_update("\x05\x00\x00\x00{bad}"), ErrorCode::ParseError);
}

TEST_CASE("ModelUpdate validation") {
    CHECK_ERROR_CODE(make_update({1.0}, 0).validate(), ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(make_update({std::nan("")}).validate(), ErrorCode::InvalidArgument);
    DPConfig dp;
    dp.clip_norm = -1.0;
    CHECK_ERROR_CODE(dp.validate(), ErrorCode::InvalidArgument);
}
