#include <thread>

#include "ioev/battery/synth.hpp"
#include "ioev/core/text.hpp"
#include "ioev/ids/synth.hpp"
#include "ioev/ssa/agent.hpp"
#include "support.hpp"

// after Eigen: OpenSSL headers define macros that clash with its internals
#include <httplib.h>

using namespace ioev;
using namespace ioev::ssa;

namespace {

std::vector<DocumentChunk> toy_store() {
    return {make_chunk("d1", "apple banana apple"), make_chunk("d2", "banana cherry"),
            make_chunk("d3", "cherry cherry cherry date")};
}

attribution::Attribution many_items(size_t n) {
    attribution::Attribution a;
    a.base_value = 0.2;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double phi = (i % 2 ? -1.0 : 1.0) * 0.01 * static_cast<double>(n - i);
        a.items.push_back({"feat_" + std::string(1, static_cast<char>('a' + i)), static_cast<double>(i), phi});
        total += phi;
    }
    a.prediction = a.base_value + total;
    return a;
}

Findings dos_findings() {
    Findings f;
    f.attack = ids::AttackPrediction{ids::AttackClass::dos, {0.01, 0.02, 0.97}};
    return f;
}

attribution::Attribution dos_attribution() {
    attribution::Attribution a;
    a.base_value = 0.25;
    a.items = {{"bidirectional_packets", 300.0, 0.2},
               {"bidirectional_duration_ms", 9000.0, 0.45},
               {"bidirectional_mean_ps", 90.0, 0.07}};
    a.prediction = 0.25 + 0.2 + 0.45 + 0.07;
    return a;
}

struct Fixture {
    std::shared_ptr<const battery::MultiTaskModel> battery_model;
    std::shared_ptr<const ids::Detector> detector;
    battery::BatteryDataset battery_data;
    std::shared_ptr<const ToolRegistry> registry;

    Fixture() {
        battery_data = battery::synth_battery({20, 0.3, 4});
        battery::MultiTaskModelConfig bc;
        bc.hidden_units = 8;
        bc.head_hidden = 8;
        battery_model = std::make_shared<battery::MultiTaskModel>(bc, battery::Normalization::fit(battery_data));

        auto prep = ids::preprocess_flows(ids::synth_flows({900, 3}));
        ids::DetectorConfig dc;
        dc.gbdt.estimators = 40;
        detector = std::make_shared<ids::Detector>(ids::train_detector(prep.table, prep.preprocessor, dc, 1));

        std::vector<ToolDescriptor> tools = {
            battery_tool(battery_model, attribution::battery_background(battery_data, 6, 1)),
            ids_tool(detector, attribution::stratified_background(prep.table, 40, 1))};
        registry = std::make_shared<ToolRegistry>(std::move(tools));
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

intent::IntentResult intent_of(intent::IntentLabel l) { return {l, 1.0, intent::BackendKind::baseline, false}; }

}  // namespace

TEST_CASE("lexical terms lower-case and keep underscores") {
    auto t = lexical_terms("High SYN-count on bidirectional_syn_packets, 40C!");
    std::vector<std::string> expected = {"high", "syn", "count", "on", "bidirectional_syn_packets", "40c"};
    CHECK(t == expected);
}

TEST_CASE("documents parse front-matter") {
    auto c = parse_document("x", "---\ntitle: A note\nsource: repo\n---\nBody text here.\n");
    CHECK(c.doc_id == "x");
    CHECK(c.text == "Body text here.");
    CHECK(c.metadata.at("title") == "A note");
    CHECK(c.metadata.at("source") == "repo");
    CHECK(parse_document("y", "plain body").text == "plain body");
    CHECK_ERROR_CODE(parse_document("z", "---\ntitle: x\nbody"), ErrorCode::ParseError);
    CHECK_ERROR_CODE(make_chunk("e", "   "), ErrorCode::InvalidArgument);
}

TEST_CASE("bundled document store loads") {
    auto store = load_document_store(data_path("docs"));
    REQUIRE(store.size() >= 8);
    for (const auto& c : store) {
        CHECK(!c.text.empty());
        CHECK(c.metadata.count("title") == 1);
    }
    CHECK(std::is_sorted(store.begin(), store.end(),
                         [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; }));
    auto top = retrieve_context("SYN flood denial of service", store, 1);
    CHECK(top[0].chunk->doc_id == "ocpp_dos_flooding");
    CHECK_ERROR_CODE(load_document_store(data_path("no_such_dir")), ErrorCode::IoError);
}

TEST_CASE("bm25 matches hand-computed scores") {
    // N=3, avgdl=3; idf(apple)=ln(1+2.5/1.5), idf(cherry)=ln(1+1.5/2.5)
    // d1: idf(apple)*2*2.2/(2+1.2)
    // d2: idf(cherry)*2.2/(1+1.2*(0.25+0.75*2/3))
    // d3: idf(cherry)*3*2.2/(3+1.2*(0.25+0.75*4/3))
    auto store = toy_store();
    auto s = bm25_scores("apple cherry", store);
    CHECK(s[0] == doctest::Approx(1.3486402228911236).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.5442147286003255).epsilon(1e-12));
    CHECK(s[2] == doctest::Approx(0.6893386562270789).epsilon(1e-12));
    auto r = retrieve_context("apple cherry", store, 3);
    CHECK(r[0].chunk->doc_id == "d1");
    CHECK(r[1].chunk->doc_id == "d3");
    CHECK(r[2].chunk->doc_id == "d2");
    // repeated query terms count once
    CHECK(bm25_scores("apple apple cherry", store) == s);
}

TEST_CASE("retrieval examples") {
    auto store = toy_store();
    CHECK(retrieve_context("banana cherry", store, 1)[0].chunk->doc_id == "d2");
    auto all = retrieve_context("banana", store, 10);
    CHECK(all.size() == 3);
    CHECK(all[0].score >= all[1].score);
    CHECK(all[1].score >= all[2].score);
    std::vector<DocumentChunk> twins = {make_chunk("b", "same words"), make_chunk("a", "same words")};
    auto t = retrieve_context("same", twins, 2);
    CHECK(t[0].chunk->doc_id == "a");
    CHECK(t[1].chunk->doc_id == "b");
    CHECK_ERROR_CODE(retrieve_context("x", {}, 1), ErrorCode::EmptyStore);
    CHECK_ERROR_CODE(retrieve_context("x", store, 0), ErrorCode::InvalidArgument);
}

TEST_CASE("registry requires one tool per diagnostic intent") {
    auto noop = [](const Payload&) { return ToolOutput{}; };
    ToolDescriptor a{"a", {intent::IntentLabel::evcs_security}, "", noop};
    ToolDescriptor b{"b", {intent::IntentLabel::battery_diagnostics}, "", noop};
    ToolDescriptor c{"c", {intent::IntentLabel::battery_diagnostics}, "", noop};
    ToolDescriptor z{"z", {intent::IntentLabel::user_support}, "", noop};
    CHECK_NOTHROW(ToolRegistry({a, b}));
    CHECK_ERROR_CODE(ToolRegistry({a, b, c}), ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(ToolRegistry({a}), ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(ToolRegistry({a, b, z}), ErrorCode::InvalidArgument);
    ToolRegistry reg({a, b});
    CHECK(reg.tool_for(intent::IntentLabel::evcs_security).name == "a");
    CHECK(reg.tool_for(intent::IntentLabel::battery_diagnostics).name == "b");
}

TEST_CASE("routing invokes the battery tool for label 2") {
    const auto& fx = fixture();
    Payload p = fx.battery_data[0].window;
    auto out = route_and_invoke(*fx.registry, intent_of(intent::IntentLabel::battery_diagnostics), p);
    REQUIRE(out.findings.battery.has_value());
    CHECK(!out.findings.attack.has_value());
    CHECK(out.findings.battery->model_id == fx.battery_model->model_id());
    CHECK(out.attribution.items.size() == battery::kNumChannels);
    CHECK(out.attribution.efficiency_gap() <= 1e-9);
    CHECK(out.attribution.prediction == doctest::Approx(out.findings.battery->soh_anomaly_prob).epsilon(1e-12));
}

TEST_CASE("routing invokes the detector for label 1") {
    const auto& fx = fixture();
    Payload p = ids::cluster_center(ids::AttackClass::dos, fx.detector->feature_names());
    auto out = route_and_invoke(*fx.registry, intent_of(intent::IntentLabel::evcs_security), p);
    REQUIRE(out.findings.attack.has_value());
    CHECK(out.findings.attack->label == ids::AttackClass::dos);
    CHECK(out.attribution.efficiency_gap() <= 1e-6);
}

TEST_CASE("routing errors") {
    const auto& fx = fixture();
    Payload window = fx.battery_data[0].window;
    Payload flow = ids::cluster_center(ids::AttackClass::dos, fx.detector->feature_names());
    CHECK_ERROR_CODE(route_and_invoke(*fx.registry, intent_of(intent::IntentLabel::user_support), window),
                     ErrorCode::NoToolForIntent);
    CHECK_ERROR_CODE(route_and_invoke(*fx.registry, intent_of(intent::IntentLabel::evcs_security), window),
                     ErrorCode::PayloadSchemaMismatch);
    CHECK_ERROR_CODE(route_and_invoke(*fx.registry, intent_of(intent::IntentLabel::battery_diagnostics), flow),
                     ErrorCode::PayloadSchemaMismatch);
    auto bad = std::get<ids::FlowRecord>(flow);
    bad.names.pop_back();
    bad.values.pop_back();
    CHECK_ERROR_CODE(route_and_invoke(*fx.registry, intent_of(intent::IntentLabel::evcs_security), Payload(bad)),
                     ErrorCode::PayloadSchemaMismatch);
}

TEST_CASE("prompt carries the role framing verbatim") {
    auto p = build_prompt(dos_findings(), dos_attribution(), {}, Audience::driver);
    CHECK(contains(p.text, role_framing(Audience::driver)));
    CHECK(!contains(p.text, role_framing(Audience::operator_role)));
    CHECK(contains(p.text, "phi=+0.4500"));
    CHECK(contains(p.text, "verdict: dos"));
}

TEST_CASE("prompt embeds exactly top_k attributions plus a remainder note") {
    PromptConfig cfg;
    cfg.top_k = 5;
    auto a = many_items(20);
    auto p = build_prompt(dos_findings(), a, {}, Audience::operator_role, cfg);
    size_t lines = 0;
    for (const auto& l : split(p.text, '\n')) lines += contains(l, " phi=") ? 1 : 0;
    CHECK(lines == 5);
    CHECK(contains(p.text, "(15 further features contribute"));
    // largest |phi| first
    CHECK(contains(p.text, "1. feat_a = 0 phi=+0.2000"));
    CHECK(contains(p.text, "2. feat_b = 1 phi=-0.1900"));
}

TEST_CASE("prompt is deterministic and respects the budget") {
    auto store = load_document_store(data_path("docs"));
    auto chunks = retrieve_context("dos flood syn packets", store, 4);
    PromptConfig cfg;
    cfg.token_budget = 250;
    auto p1 = build_prompt(dos_findings(), dos_attribution(), chunks, Audience::operator_role, cfg);
    auto p2 = build_prompt(dos_findings(), dos_attribution(), chunks, Audience::operator_role, cfg);
    CHECK(p1.text == p2.text);
    CHECK(count_tokens(p1.text) <= cfg.token_budget);
    CHECK(!p1.citations.empty());
    CHECK(p1.citations[0] == chunks[0].chunk->doc_id);

    auto bare = build_prompt(dos_findings(), dos_attribution(), {}, Audience::operator_role, cfg);
    size_t fixed = count_tokens(bare.text) + 1;
    cfg.token_budget = fixed + 10;
    auto tight = build_prompt(dos_findings(), dos_attribution(), chunks, Audience::operator_role, cfg);
    CHECK(count_tokens(tight.text) <= cfg.token_budget);
    CHECK(contains(tight.text, "[...]"));
    CHECK(tight.citations.size() == 1);

    cfg.token_budget = fixed - 1;
    auto none = build_prompt(dos_findings(), dos_attribution(), chunks, Audience::operator_role, cfg);
    CHECK(none.citations.empty());
    cfg.token_budget = 20;
    CHECK_ERROR_CODE(build_prompt(dos_findings(), dos_attribution(), chunks, Audience::operator_role, cfg),
                     ErrorCode::BudgetTooSmall);
}

TEST_CASE("template summary names the top feature") {
    auto p = build_prompt(dos_findings(), dos_attribution(), {}, Audience::operator_role);
    auto r = compose_explanation(p);
    CHECK(r.backend == ResponseBackend::template_backend);
    CHECK(!r.degraded);
    CHECK(contains(r.summary, "bidirectional_duration_ms"));
    CHECK(contains(r.summary, "dos"));
    REQUIRE(r.findings.attack.has_value());
    CHECK(r.findings.attack->label == ids::AttackClass::dos);
}

TEST_CASE("template summary only names top-k features") {
    auto a = many_items(20);
    for (size_t top_k : {1u, 2u, 5u}) {
        PromptConfig cfg;
        cfg.top_k = top_k;
        for (auto aud : {Audience::driver, Audience::operator_role}) {
            auto r = compose_explanation(build_prompt(dos_findings(), a, {}, aud, cfg));
            auto terms = lexical_terms(r.summary);
            for (size_t i = 0; i < a.items.size(); ++i) {
                bool named = std::find(terms.begin(), terms.end(), a.items[i].name) != terms.end();
                if (named) CHECK(i < top_k);
            }
        }
    }
}

TEST_CASE("audiences differ in framing but share findings") {
    auto d = compose_explanation(build_prompt(dos_findings(), dos_attribution(), {}, Audience::driver));
    auto o = compose_explanation(build_prompt(dos_findings(), dos_attribution(), {}, Audience::operator_role));
    CHECK(d.summary != o.summary);
    CHECK(d.findings.to_json() == o.findings.to_json());
    CHECK(d.attribution.to_json() == o.attribution.to_json());
    CHECK(d.to_json().at("audience") == "driver");
    CHECK(o.to_json().at("audience") == "operator");
}

TEST_CASE("unreachable remote falls back to the template") {
    RemoteChatClient remote({"http://127.0.0.1:1", "m", "IOEV_TEST_UNSET_TOKEN", 1});
    auto p = build_prompt(dos_findings(), dos_attribution(), {}, Audience::driver);
    auto r = compose_explanation(p, &remote);
    CHECK(r.degraded);
    CHECK(r.backend == ResponseBackend::template_backend);
    CHECK(r.summary == template_summary(p));
    RemoteChatClient unconfigured({"", "m"});
    CHECK(compose_explanation(p, &unconfigured).degraded);
}

TEST_CASE("remote backend sends temperature 0 and wraps the reply") {
    httplib::Server srv;
    nlohmann::json seen;
    std::string auth;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        auth = req.get_header_value("Authorization");
        nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", "remote text"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    int port = srv.bind_to_any_port("127.0.0.1");
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    ::setenv("IOEV_TEST_LLM_TOKEN", "secret", 1);
    RemoteChatClient remote({"http://127.0.0.1:" + std::to_string(port) + "/v1", "test-model", "IOEV_TEST_LLM_TOKEN", 5});
    auto p = build_prompt(dos_findings(), dos_attribution(), {}, Audience::operator_role);
    auto r = compose_explanation(p, &remote);
    srv.stop();
    t.join();

    CHECK(r.backend == ResponseBackend::remote_llm);
    CHECK(!r.degraded);
    CHECK(r.summary == "remote text");
    CHECK(r.findings.to_json() == dos_findings().to_json());
    CHECK(seen.at("temperature") == 0);
    CHECK(seen.at("model") == "test-model");
    CHECK(seen.at("messages").at(1).at("content") == p.text);
    CHECK(auth == "Bearer secret");
}

TEST_CASE("token overlap scorer") {
    TokenOverlapScorer s;
    CHECK(s.score("a b c", "a b c") == doctest::Approx(1.0));
    CHECK(s.score("a b", "c d") == 0.0);
    // overlap 1, precision 1/2, recall 1/4
    CHECK(s.score("a x", "a b c d") == doctest::Approx(2.0 * 0.5 * 0.25 / 0.75).epsilon(1e-12));
    CHECK(s.score("", "a") == 0.0);
}

TEST_CASE("agent template path is deterministic end to end") {
    const auto& fx = fixture();
    auto store = std::make_shared<const std::vector<DocumentChunk>>(load_document_store(data_path("docs")));
    SafetySecurityAgent agent(fx.registry, store);
    Payload flow = ids::cluster_center(ids::AttackClass::dos, fx.detector->feature_names());
    auto a = agent.handle(intent_of(intent::IntentLabel::evcs_security), flow, "is station 4 under attack?",
                          Audience::operator_role);
    auto b = agent.handle(intent_of(intent::IntentLabel::evcs_security), flow, "is station 4 under attack?",
                          Audience::operator_role);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(!a.citations.empty());
    CHECK(a.findings.attack->label == ids::AttackClass::dos);

    Payload window = fx.battery_data[1].window;
    auto c = agent.handle(intent_of(intent::IntentLabel::battery_diagnostics), window, "is my battery ok",
                          Audience::driver);
    REQUIRE(c.findings.battery.has_value());
    CHECK(contains(c.summary, "Battery health check"));
    CHECK_ERROR_CODE(agent.handle(intent_of(intent::IntentLabel::user_support), window, "x", Audience::driver),
                     ErrorCode::NoToolForIntent);
}
