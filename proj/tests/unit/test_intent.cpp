#include <doctest.h>

#include <httplib.h>

#include <set>
#include <thread>

#include "ioev/intent/intent.hpp"
#include "support.hpp"

using namespace ioev;
using namespace ioev::intent;

namespace {

const LabeledQueryCorpus& corpus() {
    static const LabeledQueryCorpus c = load_corpus(data_path("intent_corpus.jsonl"));
    return c;
}

// Independent annotation rule used to label the bundled corpus.
IntentLabel keyword_oracle(const std::string& text) {
    static const std::set<std::string> security = {
        "attack", "intrusion", "suspicious", "scanning", "security", "malicious", "hacked", "reconnaissance",
        "compromised", "intruder", "dos", "denial", "cyber", "flooded", "threats", "network"};
    bool battery = false;
    for (const auto& seg : tokenize(text)) {
        for (const auto& tok : seg) {
            if (security.count(tok)) return IntentLabel::evcs_security;
            if (tok == "battery") battery = true;
        }
    }
    return battery ? IntentLabel::battery_diagnostics : IntentLabel::user_support;
}

}  // namespace

TEST_CASE("bundled corpus is balanced and agrees with the keyword oracle") {
    REQUIRE(corpus().size() == 60);
    std::array<int, 3> counts{};
    for (const auto& q : corpus()) {
        ++counts[static_cast<size_t>(q.label)];
        CHECK_MESSAGE(keyword_oracle(q.text) == q.label, q.text);
    }
    CHECK(counts == std::array<int, 3>{20, 20, 20});
}

TEST_CASE("classify_intent examples") {
    auto model = BaselineModel::train(corpus(), 1);
    IntentGate gate(model);
    CHECK(gate.classify(QueryText("Is my battery degrading faster than normal?")).label ==
          IntentLabel::battery_diagnostics);
    CHECK_ERROR_CODE(QueryText(""), ErrorCode::EmptyQuery);
    CHECK_ERROR_CODE(QueryText("   \t "), ErrorCode::EmptyQuery);
    const std::string cheap = "Charge my car cheaply before 8am";
    CHECK(keyword_oracle(cheap) == IntentLabel::user_support);
    auto r = gate.classify(QueryText(cheap));
    CHECK(r.label == IntentLabel::user_support);
    CHECK(r.confidence > 0.0);
    CHECK(r.confidence <= 1.0);
    CHECK(r.backend == BackendKind::baseline);
}

TEST_CASE("query length invariant counts characters, not bytes") {
    CHECK_NOTHROW(QueryText{std::string(4096, 'a')});
    CHECK_ERROR_CODE(QueryText(std::string(4097, 'a')), ErrorCode::InvalidArgument);
    std::string accented;
    for (int i = 0; i < 4000; ++i) accented += "\xC3\xA9";  // é, 2 bytes each
    CHECK_NOTHROW(QueryText{accented});
}

TEST_CASE("train_baseline examples") {
    auto model = BaselineModel::train(corpus(), 1);
    auto cc = evaluate_intents(model, corpus());
    auto m = eval::classification_metrics(cc, std::nullopt);
    CHECK(m.accuracy == 1.0);

    LabeledQueryCorpus only_support;
    for (const auto& q : corpus())
        if (q.label == IntentLabel::user_support) only_support.push_back(q);
    CHECK_ERROR_CODE(BaselineModel::train(only_support, 1), ErrorCode::ClassMissing);

    LabeledQueryCorpus doubled = corpus();
    doubled.insert(doubled.end(), corpus().begin(), corpus().end());
    CHECK(BaselineModel::train(doubled, 1).to_json().dump() == model.to_json().dump());
}

TEST_CASE("evaluate_intents examples") {
    auto model = BaselineModel::train(corpus(), 1);
    LabeledQueryCorpus thirty;
    for (int c = 0; c < 3; ++c) {
        int taken = 0;
        for (const auto& q : corpus())
            if (static_cast<int>(q.label) == c && taken < 10) {
                thirty.push_back(q);
                ++taken;
            }
    }
    auto cc = evaluate_intents(model, thirty);
    CHECK(cc.total() == 30);
    uint64_t diag = 0;
    for (int c = 0; c < 3; ++c) diag += cc.at(c, c);
    CHECK(diag == 30);

    // A model whose bias always favours class 0.
    auto always_zero = BaselineModel::from_json({{"format", "ioev.intent.baseline"},
                                                 {"version", 1},
                                                 {"seed", 0},
                                                 {"vocab", {"u:zzz"}},
                                                 {"weights", {{0.0, 0.0, 0.0}}},
                                                 {"bias", {1.0, 0.0, 0.0}}});
    auto cz = evaluate_intents(always_zero, thirty);
    CHECK(cz.at(0, 0) + cz.at(1, 0) + cz.at(2, 0) == 30);

    auto [train, test] = split_corpus(corpus(), 5, 3);
    REQUIRE(test.size() == 15);
    auto held = BaselineModel::train(train, 3);
    auto ch = evaluate_intents(held, test);
    // Manual tally.
    std::array<std::array<uint64_t, 3>, 3> tally{};
    for (const auto& q : test) {
        auto p = held.probabilities(q.text);
        int best = 0;
        for (int c = 1; c < 3; ++c)
            if (p[c] > p[best]) best = c;
        ++tally[static_cast<size_t>(q.label)][static_cast<size_t>(best)];
    }
    for (int t = 0; t < 3; ++t)
        for (int p = 0; p < 3; ++p) CHECK(ch.at(t, p) == tally[t][p]);
    CHECK(ch.total() == 15);
}

TEST_CASE("held-out accuracy is stable across split seeds") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto [train, test] = split_corpus(corpus(), 5, seed);
        auto model = BaselineModel::train(train, seed);
        auto m = eval::classification_metrics(evaluate_intents(model, test), std::nullopt);
        CHECK_MESSAGE(m.accuracy >= 0.95, "seed " << seed);
    }
}

TEST_CASE("baseline classification is deterministic") {
    auto a = BaselineModel::train(corpus(), 9);
    auto b = BaselineModel::train(corpus(), 9);
    for (const auto& q : corpus()) {
        auto ra = a.classify(QueryText(q.text));
        auto rb = b.classify(QueryText(q.text));
        CHECK(ra.label == rb.label);
        CHECK(ra.confidence == rb.confidence);
    }
}

TEST_CASE("appending a strong class keyword never lowers that class's score") {
    auto model = BaselineModel::train(corpus(), 1);
    const std::array<std::pair<IntentLabel, const char*>, 3> strong = {{{IntentLabel::user_support, "cheap"},
                                                                         {IntentLabel::evcs_security, "attack"},
                                                                         {IntentLabel::battery_diagnostics, "battery"}}};
    for (auto [label, kw] : strong) {
        // The keyword's weight for its class dominates the other classes.
        for (int c = 0; c < 3; ++c) {
            if (c != static_cast<int>(label))
                CHECK(model.weight(std::string("u:") + kw, label) >= model.weight(std::string("u:") + kw, static_cast<IntentLabel>(c)));
        }
        for (const auto& q : corpus()) {
            auto before = model.probabilities(q.text);
            auto after = model.probabilities(q.text + ". " + kw);
            CHECK(after[static_cast<size_t>(label)] >= before[static_cast<size_t>(label)]);
        }
    }
}

TEST_CASE("ties resolve to the lowest label") {
    auto r = result_from_scores({0.2, 0.4, 0.4}, BackendKind::transformer);
    CHECK(r.label == IntentLabel::evcs_security);
    auto u = result_from_scores({1.0, 1.0, 1.0}, BackendKind::baseline);
    CHECK(u.label == IntentLabel::user_support);
    CHECK(u.confidence == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("system events with a preset label bypass classification") {
    IntentGate gate(BaselineModel::train(corpus(), 1));
    QueryText alert("anomaly alert from station 7", QuerySource::system_event, "s1", IntentLabel::evcs_security);
    auto r = gate.classify(alert);
    CHECK(r.bypassed);
    CHECK(r.label == IntentLabel::evcs_security);
    CHECK(r.confidence == 1.0);
}

TEST_CASE("transformer backend") {
    IntentGate unconfigured(BaselineModel::train(corpus(), 1));
    CHECK_ERROR_CODE(unconfigured.classify(QueryText("hello there"), BackendKind::transformer),
                     ErrorCode::BackendUnavailable);

    httplib::Server server;
    server.Post("/classify", [](const httplib::Request& req, httplib::Response& res) {
        auto j = nlohmann::json::parse(req.body);
        bool battery = j["text"].get<std::string>().find("battery") != std::string::npos;
        nlohmann::json out = {{"scores", battery ? std::vector<double>{0.1, 0.1, 0.8} : std::vector<double>{0.7, 0.2, 0.1}}};
        res.set_content(out.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    IntentGate gate(BaselineModel::train(corpus(), 1),
                    TransformerEndpoint{"http://127.0.0.1:" + std::to_string(port), 2});
    auto r = gate.classify(QueryText("check my battery"), BackendKind::transformer);
    CHECK(r.label == IntentLabel::battery_diagnostics);
    CHECK(r.confidence == doctest::Approx(0.8));
    CHECK(r.backend == BackendKind::transformer);
    server.stop();
    th.join();

    IntentGate dead(BaselineModel::train(corpus(), 1), TransformerEndpoint{"http://127.0.0.1:1", 1});
    CHECK_ERROR_CODE(dead.classify(QueryText("check my battery"), BackendKind::transformer),
                     ErrorCode::BackendUnavailable);
}

TEST_CASE("model JSON round trip preserves predictions") {
    auto model = BaselineModel::train(corpus(), 4);
    auto copy = BaselineModel::from_json(nlohmann::json::parse(model.to_json().dump()));
    for (const auto& q : corpus()) CHECK(copy.probabilities(q.text) == model.probabilities(q.text));
}
