#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/x509.h>

#include "ioev/core/csv.hpp"
#include "ioev/core/text.hpp"
#include "ioev/gateway/bootstrap.hpp"
#include "ioev/gateway/server.hpp"
#include "ioev/ids/synth.hpp"
#include "ioev/battery/synth.hpp"
#include "support.hpp"

// after Eigen: OpenSSL headers define macros that clash with its internals
#include <httplib.h>

using namespace ioev;
using namespace ioev::gateway;

namespace {

const char* kCheapRequest = "I want to charge my EV tomorrow on my way back home as cheaply as possible";
const char* kBatteryQuestion = "Why is my battery temperature rising so fast while charging?";

GatewayConfig base_config() {
    GatewayConfig c;
    c.intent_corpus = data_path("intent_corpus.jsonl");
    c.docs_dir = data_path("docs");
    c.stations_file = data_path("stations.json");
    c.retention.default_ttl_seconds = 600;
    c.retention.purge_interval_seconds = 60;
    c.seed = 7;
    return c;
}

const GatewayDeps& shared_deps() {
    static GatewayDeps d = build_deps(base_config());
    return d;
}

// A service on a manual clock whose store stays inspectable.
struct Harness {
    std::shared_ptr<double> clock = std::make_shared<double>(1000.0);
    MemoryStore* store = nullptr;
    std::shared_ptr<GatewayService> svc;

    explicit Harness(GatewayConfig cfg = base_config(), std::optional<std::vector<double>> fl_weights = std::nullopt) {
        GatewayDeps d = shared_deps();
        d.clock = [c = clock] { return *c; };
        if (fl_weights) d.fl_initial_weights = *fl_weights;
        auto s = std::make_unique<MemoryStore>();
        store = s.get();
        svc = std::make_shared<GatewayService>(std::move(cfg), std::move(d), std::move(s));
    }

    nlohmann::json record(const std::string& id) const { return nlohmann::json::parse(*store->get("session/" + id)); }
};

support::VehicleProfile profile() {
    support::VehicleProfile v;
    v.battery_capacity_kwh = 60;
    v.max_charge_rate_kw = 7.4;
    v.current_soc = 0.3;
    v.target_soc = 0.8;
    return v;
}

SessionRequest full_request() {
    SessionRequest r;
    r.vehicle = profile();
    r.calendar = std::vector<support::CalendarEvent>{{"Work", 8, 0}};
    return r;
}

// Flows in detector column order drawn from the generator, with their generating labels.
ids::FeatureTable generated_flows(size_t n, uint64_t seed, std::array<double, ids::kNumClasses> mix) {
    const auto& det = *shared_deps().detector;
    return det.preprocessor().apply(ids::synth_flows({n, seed, mix}));
}

std::vector<ids::FlowRecord> records(const ids::FeatureTable& t) {
    std::vector<ids::FlowRecord> out;
    for (const auto& row : t.rows) out.push_back({t.columns, row, std::nullopt});
    return out;
}

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("pseudonyms are deterministic per salt and unlinkable across salts") {
    CHECK(pseudonymize("vehicle-42", "salt-a") == pseudonymize("vehicle-42", "salt-a"));
    CHECK(pseudonymize("vehicle-42", "salt-a") != pseudonymize("vehicle-42", "salt-b"));
    CHECK(pseudonymize("vehicle-42", "salt-a") != pseudonymize("vehicle-43", "salt-a"));
    CHECK(pseudonymize("vehicle-42", "salt-a").size() == 64);
    CHECK(pseudonymize("vehicle-42", "salt-a").find("vehicle") == std::string::npos);
    CHECK_ERROR_CODE(pseudonymize("", "salt"), ErrorCode::InvalidArgument);
}

TEST_CASE("pseudonyms of 10k identifiers do not collide") {
    std::set<std::string> tokens;
    for (int i = 0; i < 10000; ++i) tokens.insert(pseudonymize("EV-" + std::to_string(i), "session-salt"));
    CHECK(tokens.size() == 10000);
}

TEST_CASE("retention policy validation") {
    RetentionPolicy p;
    CHECK_NOTHROW(p.validate());
    p.purge_interval_seconds = p.default_ttl_seconds + 1;
    CHECK_ERROR_CODE(p.validate(), ErrorCode::InvalidArgument);
    p.purge_interval_seconds = 0;
    CHECK_ERROR_CODE(p.validate(), ErrorCode::InvalidArgument);
}

TEST_CASE("sessions: creation, ttl bounds and view without values") {
    Harness h;
    auto s = h.svc->create_session(full_request());
    CHECK(s.session_id.size() == 32);
    CHECK(s.ttl_seconds == 600);
    auto view = h.svc->session_view(s.session_id);
    CHECK(view["ttl_remaining"].get<double>() == doctest::Approx(600));
    CHECK(view["inventory"].size() == 2);
    CHECK(view.dump().find("Work") == std::string::npos);

    SessionRequest too_long;
    too_long.ttl_seconds = 601;
    CHECK_ERROR_CODE(h.svc->create_session(too_long), ErrorCode::InvalidArgument);
    CHECK_ERROR_CODE(h.svc->session_view("feed"), ErrorCode::UnknownSession);
    CHECK_ERROR_CODE(SessionRequest::from_json({{"consent", {{"favourite_colour", true}}}}), ErrorCode::SchemaViolation);
    CHECK_ERROR_CODE(SessionRequest::from_json({{"calendar", {{{"title", "x"}, {"time", "25:00"}}}}}),
                     ErrorCode::SchemaViolation);
}

TEST_CASE("purge without consent removes all scoped data") {
    Harness h;
    auto s = h.svc->create_session(full_request());
    h.svc->handle_query({s.session_id, kCheapRequest});
    CHECK(h.record(s.session_id)["scoped_data"].contains(kTraceField));

    *h.clock += 601;
    auto report = h.svc->purge_expired(*h.clock);
    REQUIRE(report.purged.size() == 1);
    CHECK(report.purged[0] == s.session_id);
    auto rec = h.record(s.session_id);
    CHECK(rec["scoped_data"].empty());
    CHECK(rec["salt"].get<std::string>().empty());
    CHECK(rec.dump().find("Work") == std::string::npos);
    CHECK(rec.dump().find("cheaply") == std::string::npos);
}

TEST_CASE("purge keeps a consented vehicle profile and drops the calendar") {
    Harness h;
    auto req = full_request();
    req.consent[kVehicleField] = true;
    auto s = h.svc->create_session(req);
    *h.clock += 601;
    h.svc->purge_expired(*h.clock);
    auto data = h.record(s.session_id)["scoped_data"];
    CHECK(data.contains(kVehicleField));
    CHECK(data[kVehicleField] == profile().to_json());
    CHECK_FALSE(data.contains(kCalendarField));
}

TEST_CASE("consent does not retain fields outside the exempt list") {
    Harness h;
    auto req = full_request();
    req.consent[kCalendarField] = true;
    auto s = h.svc->create_session(req);
    *h.clock += 601;
    h.svc->purge_expired(*h.clock);
    CHECK(h.record(s.session_id)["scoped_data"].empty());
}

TEST_CASE("purge with nothing expired reports nothing") {
    Harness h;
    h.svc->create_session(full_request());
    *h.clock += 600;  // exactly at expiry: not yet past it
    CHECK(h.svc->purge_expired(*h.clock).purged.empty());
    CHECK(h.svc->purge_expired(*h.clock).to_json()["purged"].empty());
}

TEST_CASE("expired sessions refuse every operation") {
    Harness h;
    auto s = h.svc->create_session(full_request());
    *h.clock += 601;
    CHECK_ERROR_CODE(h.svc->handle_query({s.session_id, kCheapRequest}), ErrorCode::SessionExpired);
    CHECK_ERROR_CODE(h.svc->handle_query({s.session_id, kBatteryQuestion}), ErrorCode::SessionExpired);
    CHECK_ERROR_CODE(h.svc->session_view(s.session_id), ErrorCode::SessionExpired);
    CHECK_ERROR_CODE(h.svc->trace(s.session_id), ErrorCode::SessionExpired);
    CHECK_ERROR_CODE(h.svc->update_session(s.session_id, {}), ErrorCode::SessionExpired);
    CHECK_ERROR_CODE(h.svc->battery_telemetry(s.session_id, battery::constant_window(false)),
                     ErrorCode::SessionExpired);
}

TEST_CASE("raw inputs are kept only with consent and never served after purge") {
    Harness h;
    auto plain = h.svc->create_session(full_request());
    auto req = full_request();
    req.consent[kRawInputsField] = true;
    auto kept = h.svc->create_session(req);
    h.svc->handle_query({plain.session_id, kCheapRequest});
    h.svc->handle_query({kept.session_id, kCheapRequest});
    CHECK_FALSE(h.record(plain.session_id)["scoped_data"].contains(kRawInputsField));
    CHECK(h.record(kept.session_id)["scoped_data"][kRawInputsField].size() == 1);

    // Raw inputs of the unconsented session do not outlive it.
    *h.clock += 601;
    h.svc->purge_expired(*h.clock);
    CHECK(h.record(plain.session_id).dump().find("cheaply") == std::string::npos);
    CHECK(h.record(kept.session_id)["scoped_data"].contains(kRawInputsField));
    // No API path serves purged sessions.
    for (const auto& id : {plain.session_id, kept.session_id}) {
        CHECK_ERROR_CODE(h.svc->trace(id), ErrorCode::SessionExpired);
        CHECK_ERROR_CODE(h.svc->session_view(id), ErrorCode::SessionExpired);
    }
    for (const auto& a : h.svc->alerts()) CHECK(a.to_json().dump().find("cheaply") == std::string::npos);
}

TEST_CASE("scope isolation: requests only read their own session") {
    Harness h;
    std::vector<AccessRecord> seen;
    h.svc->set_access_hook([&](const AccessRecord& r) { seen.push_back(r); });
    auto a = h.svc->create_session(full_request());
    auto b = h.svc->create_session(full_request());
    h.svc->handle_query({a.session_id, kCheapRequest});
    h.svc->trace(a.session_id);
    h.svc->battery_telemetry(b.session_id, battery::constant_window(false));
    h.svc->handle_query({b.session_id, kBatteryQuestion});
    h.svc->trace(b.session_id);

    REQUIRE_FALSE(seen.empty());
    std::set<std::string> owners_for_a, owners_for_b;
    for (const auto& r : seen) {
        CHECK(r.allowed);
        CHECK(r.requester == r.owner);
        (r.requester == a.session_id ? owners_for_a : owners_for_b).insert(r.owner);
    }
    CHECK(owners_for_a == std::set<std::string>{a.session_id});
    CHECK(owners_for_b == std::set<std::string>{b.session_id});
    CHECK(h.svc->access_log().size() == seen.size());

    auto trace_a = h.svc->trace(a.session_id).dump();
    CHECK(trace_a.find("battery telemetry") == std::string::npos);
}

TEST_CASE("support query through the gateway matches a direct pipeline run") {
    Harness h;
    auto s = h.svc->create_session(full_request());
    auto r = h.svc->handle_query({s.session_id, kCheapRequest});
    CHECK(r.intent.label == intent::IntentLabel::user_support);
    CHECK(r.route == "support");
    REQUIRE(r.support);
    REQUIRE(r.support->plan);

    support::SessionContext ctx;
    ctx.vehicle = profile();
    ctx.calendar = {{"Work", 8, 0}};
    ctx.prices = shared_deps().prices;
    ctx.stations = shared_deps().stations;
    ctx.horizon_start_hour = base_config().horizon_start_hour;
    auto direct = support::pipeline_run(intent::QueryText(kCheapRequest), ctx);
    REQUIRE(direct.plan);
    CHECK(r.support->plan->to_json() == direct.plan->to_json());
    CHECK(r.support->narrative == direct.narrative);

    auto t = h.svc->trace(s.session_id);
    REQUIRE(t["turns"].size() == 1);
    CHECK(t["turns"][0]["route"] == "support");
    CHECK(t["turns"][0]["result"]["plan"] == direct.plan->to_json());
}

TEST_CASE("battery question in an active session returns a diagnosis") {
    Harness h;
    auto s = h.svc->create_session({});
    CHECK_ERROR_CODE(h.svc->handle_query({s.session_id, kBatteryQuestion}), ErrorCode::InvalidArgument);

    auto direct = h.svc->battery_telemetry(s.session_id, battery::constant_window(true));
    REQUIRE(direct.findings.battery);
    auto r = h.svc->handle_query({s.session_id, kBatteryQuestion});
    CHECK(r.intent.label == intent::IntentLabel::battery_diagnostics);
    CHECK(r.route == "ssa");
    REQUIRE(r.assistant);
    REQUIRE(r.assistant->findings.battery);
    CHECK(r.assistant->findings.battery->soh_anomaly_prob ==
          doctest::Approx(direct.findings.battery->soh_anomaly_prob));
    CHECK_FALSE(r.assistant->summary.empty());

    // The stored vehicle id is a pseudonym.
    auto w = battery::constant_window(true);
    battery::TelemetryWindow named(w.frames(), "VIN-123");
    h.svc->battery_telemetry(s.session_id, named);
    auto stored = h.record(s.session_id)["scoped_data"][kTelemetryField]["vehicle_id"].get<std::string>();
    CHECK(stored != "VIN-123");
    CHECK(stored == pseudonymize("VIN-123", h.record(s.session_id)["salt"].get<std::string>()));
}

TEST_CASE("benign flows raise no alerts") {
    Harness h;
    auto flows = generated_flows(60, 101, {1.0, 0.0, 0.0});
    auto created = h.svc->ingest_flows("station-1", records(flows));
    CHECK(created.empty());
    CHECK(h.svc->alerts().empty());
}

TEST_CASE("one dos flow among benign raises exactly one dos alert") {
    Harness h;
    auto benign = records(generated_flows(30, 102, {1.0, 0.0, 0.0}));
    auto dos = records(generated_flows(1, 103, {0.0, 0.0, 1.0}));
    benign.insert(benign.begin() + 12, dos.front());
    auto created = h.svc->ingest_flows("station-1", benign);
    REQUIRE(created.size() == 1);
    CHECK(created[0].verdict == ids::AttackClass::dos);
    CHECK(created[0].features == dos.front().values);
    CHECK(created[0].station_id != "station-1");
    CHECK(created[0].station_id.size() == 64);
    CHECK_FALSE(created[0].attribution.items.empty());
    CHECK(h.svc->alerts().size() == 1);
}

TEST_CASE("malformed batches are rejected without partial alerts") {
    Harness h;
    auto flows = records(generated_flows(10, 104, {0.0, 0.5, 0.5}));
    auto bad = flows;
    bad[7].names.pop_back();
    bad[7].values.pop_back();
    CHECK_ERROR_CODE(h.svc->ingest_flows("station-1", bad), ErrorCode::SchemaMismatch);
    bad = flows;
    bad[9].values[0] = std::nan("");
    CHECK_ERROR_CODE(h.svc->ingest_flows("station-1", bad), ErrorCode::SchemaMismatch);
    bad = flows;
    std::swap(bad[3].names[0], bad[3].names[1]);
    CHECK_ERROR_CODE(h.svc->ingest_flows("station-1", bad), ErrorCode::SchemaMismatch);
    CHECK(h.svc->alerts().empty());
}

TEST_CASE("alert verdicts reproduce on re-inference with the same detector") {
    Harness h;
    auto created = h.svc->ingest_flows("station-9", records(generated_flows(40, 105, {0.2, 0.4, 0.4})));
    REQUIRE_FALSE(created.empty());
    const auto& det = *shared_deps().detector;
    for (const auto& a : h.svc->alerts()) {
        CHECK(a.verdict != ids::AttackClass::benign);
        REQUIRE(a.detector_fingerprint == det.fingerprint());
        auto again = det.infer({a.feature_names, a.features, std::nullopt});
        CHECK(again.label == a.verdict);
        // Attribution is of the verdict probability and sums to it.
        double total = a.attribution.base_value;
        for (const auto& it : a.attribution.items) total += it.phi;
        CHECK(total == doctest::Approx(a.probabilities[static_cast<size_t>(a.verdict)]).epsilon(1e-6));
    }
    // Same station, same pseudonym.
    std::set<std::string> stations;
    for (const auto& a : created) stations.insert(a.station_id);
    CHECK(stations.size() == 1);
}

TEST_CASE("alerts can be acknowledged and filtered by status") {
    Harness h;
    auto created = h.svc->ingest_flows("station-1", records(generated_flows(2, 106, {0.0, 0.0, 1.0})));
    REQUIRE(created.size() == 2);
    auto acked = h.svc->acknowledge(created[0].alert_id);
    CHECK(acked.status == AlertStatus::acknowledged);
    CHECK(h.svc->alerts(AlertStatus::open).size() == 1);
    CHECK(h.svc->alerts(AlertStatus::acknowledged).size() == 1);
    CHECK(h.svc->alert(created[0].alert_id).status == AlertStatus::acknowledged);
    CHECK_ERROR_CODE(h.svc->acknowledge("00"), ErrorCode::UnknownAlert);
    CHECK_ERROR_CODE(parse_alert_status("closed"), ErrorCode::InvalidArgument);

    auto j = created[1].to_json();
    CHECK(j["schema"] == kAlertSchema);
    CHECK(j["waterfall"].is_object());
    auto back = AlertEvent::from_json(j);
    CHECK(back.alert_id == created[1].alert_id);
    CHECK(back.features == created[1].features);
}

TEST_CASE("security question analyses the latest open alert") {
    Harness h;
    auto s = h.svc->create_session({});
    QueryRequest q{s.session_id, "Is someone flooding the charging station with DoS traffic?",
                   ssa::Audience::operator_role, std::nullopt};
    CHECK_ERROR_CODE(h.svc->handle_query(q), ErrorCode::InvalidArgument);
    h.svc->ingest_flows("station-1", records(generated_flows(1, 107, {0.0, 0.0, 1.0})));
    auto r = h.svc->handle_query(q);
    CHECK(r.intent.label == intent::IntentLabel::evcs_security);
    REQUIRE(r.assistant);
    REQUIRE(r.assistant->findings.attack);
    CHECK(r.assistant->findings.attack->label == ids::AttackClass::dos);
}

TEST_CASE("fl: one client with sigma 0 yields global plus the clipped delta") {
    std::vector<double> w0 = {0.5, -1.0, 2.0, 0.0};
    Harness h(base_config(), w0);
    CHECK(h.svc->fl_fetch(0).second == w0);
    CHECK(h.svc->fl_fetch().first == 0);

    fl::ModelUpdate u{{3.0, 0.0, -4.0, 0.0}, 10, "client-a", 0};
    auto r = h.svc->fl_submit(u);
    CHECK(r.aggregated);
    auto [round, w1] = h.svc->fl_fetch();
    CHECK(round == 1);
    double scale = std::min(1.0, 1.0 / norm(u.weight_delta));  // clip_norm 1
    REQUIRE(w1.size() == w0.size());
    for (size_t i = 0; i < w0.size(); ++i) CHECK(w1[i] == doctest::Approx(w0[i] + scale * u.weight_delta[i]));
    CHECK(h.svc->fl_fetch(0).second == w0);

    // A delta inside the clip ball is applied unchanged.
    fl::ModelUpdate small{{0.1, 0.2, 0.0, -0.2}, 1, "client-a", 1};
    h.svc->fl_submit(small);
    auto w2 = h.svc->fl_fetch(2).second;
    for (size_t i = 0; i < w0.size(); ++i) CHECK(w2[i] == doctest::Approx(w1[i] + small.weight_delta[i]));
}

TEST_CASE("fl: errors and manual aggregation") {
    auto cfg = base_config();
    cfg.fl_min_clients = 2;
    Harness h(cfg, std::vector<double>{1.0, 1.0});
    CHECK_ERROR_CODE(h.svc->fl_submit({{1.0, 2.0, 3.0}, 1, "c", 0}), ErrorCode::DimensionMismatch);
    CHECK_ERROR_CODE(h.svc->fl_submit({{1.0, 2.0}, 1, "c", 4}), ErrorCode::UnknownRound);
    CHECK_ERROR_CODE(h.svc->fl_fetch(3), ErrorCode::UnknownRound);
    CHECK_ERROR_CODE(h.svc->fl_aggregate(), ErrorCode::EmptyRound);
    CHECK_FALSE(h.svc->fl_submit({{0.1, 0.0}, 1, "c", 0}).aggregated);
    CHECK(h.svc->fl_status()["received"] == 1);
    CHECK(h.svc->fl_aggregate() == 1);
    CHECK(h.svc->fl_fetch().second[0] == doctest::Approx(1.1));

    Harness empty(base_config(), std::vector<double>{});
    CHECK_ERROR_CODE(empty.svc->fl_submit({{1.0}, 1, "c", 0}), ErrorCode::BackendUnavailable);
}

TEST_CASE("fl initial weights come from the battery model") {
    Harness h;
    CHECK_FALSE(h.svc->fl_fetch(0).second.empty());
    CHECK(h.svc->fl_fetch(0).second == shared_deps().fl_initial_weights);
}

TEST_CASE("sqlite store persists sessions and alert salt across restarts") {
    auto path = std::filesystem::temp_directory_path() / "ioev_gateway_test.db";
    std::filesystem::remove(path);
    {
        SqliteStore db(path.string());
        db.put("a/1", "one");
        db.put("a/2", std::string("t\0o", 3));
        db.put("b/1", "three");
        db.put("a/1", "uno");
        CHECK(*db.get("a/1") == "uno");
        CHECK(db.get("a/2")->size() == 3);
        CHECK(db.keys("a/") == std::vector<std::string>{"a/1", "a/2"});
        db.erase("a/2");
        CHECK_FALSE(db.get("a/2"));
    }
    std::string id;
    std::string alert_station;
    {
        auto cfg = base_config();
        cfg.store_path = path.string();
        GatewayService svc(cfg, shared_deps());
        id = svc.create_session(full_request()).session_id;
        alert_station = svc.ingest_flows("station-1", records(generated_flows(1, 108, {0.0, 0.0, 1.0})))
                            .at(0)
                            .station_id;
    }
    auto cfg = base_config();
    cfg.store_path = path.string();
    GatewayService svc(cfg, shared_deps());
    CHECK(svc.session_view(id)["session_id"] == id);
    auto again = svc.ingest_flows("station-1", records(generated_flows(1, 109, {0.0, 0.0, 1.0})));
    CHECK(again.at(0).station_id == alert_station);
    CHECK(svc.alerts().size() == 2);
    std::filesystem::remove(path);
}

TEST_CASE("config: file then environment, with validation") {
    auto dir = std::filesystem::temp_directory_path();
    auto file = (dir / "ioev_gateway_config.json").string();
    write_file(file, R"({"port": 9000, "session_ttl_seconds": 120, "purge_interval_seconds": 30,
                         "intent_corpus": "corpus.jsonl", "tls": {"cert_file": "c.pem", "key_file": "k.pem"}})");
    std::map<std::string, std::string> env = {{"IOEV_PORT", "9100"}, {"IOEV_LLM_MODEL", "small"},
                                              {"IOEV_TLS_CLIENT_AUTH", "false"}};
    auto lookup = [&](const std::string& k) -> std::optional<std::string> {
        auto it = env.find(k);
        if (it == env.end()) return std::nullopt;
        return it->second;
    };
    auto c = load_config(file, lookup);
    CHECK(c.port == 9100);
    CHECK(c.retention.default_ttl_seconds == 120);
    CHECK(c.intent_corpus == "corpus.jsonl");
    CHECK(c.llm_model == "small");
    CHECK(c.tls.enabled());
    CHECK(GatewayConfig::from_json(c.to_json()).to_json() == c.to_json());

    env["IOEV_TLS_CLIENT_AUTH"] = "yes";
    CHECK_ERROR_CODE(load_config(file, lookup), ErrorCode::InvalidArgument);  // no client CA
    env["IOEV_TLS_CLIENT_CA"] = "ca.pem";
    CHECK(load_config(file, lookup).tls.client_auth);
    env["IOEV_PORT"] = "eighty";
    CHECK_ERROR_CODE(load_config(file, lookup), ErrorCode::ParseError);
    env.erase("IOEV_PORT");
    env["IOEV_PURGE_INTERVAL"] = "500";
    CHECK_ERROR_CODE(load_config(file, lookup), ErrorCode::InvalidArgument);  // longer than the ttl

    write_file(file, R"({"prot": 1})");
    CHECK_ERROR_CODE(load_config(file, lookup), ErrorCode::ParseError);
    GatewayConfig half;
    half.tls.cert_file = "c.pem";
    CHECK_ERROR_CODE(half.validate(), ErrorCode::InvalidArgument);
    std::filesystem::remove(file);
}

TEST_CASE("http status mapping") {
    CHECK(http_status(ErrorCode::SessionExpired) == 410);
    CHECK(http_status(ErrorCode::UnknownSession) == 404);
    CHECK(http_status(ErrorCode::SchemaMismatch) == 400);
    CHECK(http_status(ErrorCode::UnresolvableSlot) == 422);
    CHECK(http_status(ErrorCode::BackendUnavailable) == 503);
    support::PipelineError pe(support::Stage::ca, Error(ErrorCode::UnresolvableSlot, "slot x"));
    auto body = error_body(pe);
    CHECK(body["error"] == "UnresolvableSlot");
    CHECK(body["stage"] == "CA");
}

TEST_CASE("wire helpers round-trip telemetry and flows") {
    auto w = battery::constant_window(true);
    auto back = telemetry_from_json(telemetry_to_json(w));
    CHECK(back.flatten() == w.flatten());
    nlohmann::json frames = {{"vehicle_id", "v"}, {"frames", nlohmann::json::array()}};
    for (const auto& f : w.frames())
        frames["frames"].push_back({{"v_mean", f.v_mean}, {"v_min", f.v_min}, {"v_max", f.v_max},
                                    {"current", f.current}, {"temperature", f.temperature}, {"soc", f.soc}});
    CHECK(telemetry_from_json(frames).flatten() == w.flatten());
    CHECK_ERROR_CODE(telemetry_from_json({{"frames", {{{"v_mean", 1}}}}}), ErrorCode::SchemaViolation);

    auto flows = records(generated_flows(2, 110, {1.0, 0.0, 0.0}));
    nlohmann::json batch = {{"columns", flows[0].names}, {"rows", {flows[0].values, flows[1].values}}};
    auto parsed = flows_from_json(batch);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[1].values == flows[1].values);
    CHECK(flows_from_json({{"flows", {flow_to_json(flows[0])}}})[0].names == flows[0].names);
    CHECK_ERROR_CODE(flows_from_json({{"rows", 3}}), ErrorCode::SchemaMismatch);
}

TEST_CASE("http: sessions, queries, flows, alerts and federated rounds") {
    Harness h(base_config(), std::vector<double>{0.0, 0.0});
    GatewayServer server(h.svc);
    int port = server.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);
    auto post = [&](const std::string& path, const nlohmann::json& body) {
        return cli.Post(path, body.dump(), "application/json");
    };

    auto health = cli.Get("/v1/health");
    REQUIRE(health);
    CHECK(health->status == 200);

    auto created = post("/v1/sessions", {{"vehicle_profile", profile().to_json()},
                                         {"calendar", {{{"title", "Work"}, {"time", "08:00"}}}}});
    REQUIRE(created);
    REQUIRE(created->status == 201);
    auto sid = nlohmann::json::parse(created->body)["session_id"].get<std::string>();

    auto q = post("/v1/query", {{"session_id", sid}, {"text", kCheapRequest}});
    REQUIRE(q);
    CHECK(q->status == 200);
    auto qj = nlohmann::json::parse(q->body);
    CHECK(qj["schema"] == kQuerySchema);
    CHECK(qj["route"] == "support");
    CHECK(qj["result"]["plan"]["feasible"] == true);

    auto tel = nlohmann::json(telemetry_to_json(battery::constant_window(true)));
    tel["session_id"] = sid;
    auto t = post("/v1/telemetry/battery", tel);
    REQUIRE(t);
    CHECK(t->status == 200);
    CHECK(nlohmann::json::parse(t->body)["findings"].contains("battery"));

    auto tr = cli.Get("/v1/sessions/" + sid + "/trace");
    REQUIRE(tr);
    CHECK(nlohmann::json::parse(tr->body)["turns"].size() == 2);

    auto dos = records(generated_flows(1, 111, {0.0, 0.0, 1.0}));
    auto f = post("/v1/flows", {{"station_id", "cs-7"}, {"columns", dos[0].names}, {"rows", {dos[0].values}}});
    REQUIRE(f);
    CHECK(f->status == 200);
    auto alerts = nlohmann::json::parse(f->body)["alerts"];
    REQUIRE(alerts.size() == 1);
    auto aid = alerts[0]["alert_id"].get<std::string>();
    auto bad = post("/v1/flows", {{"station_id", "cs-7"}, {"columns", {"x"}}, {"rows", {{1.0}}}});
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(nlohmann::json::parse(bad->body)["error"] == "SchemaMismatch");

    auto ack = cli.Post("/v1/alerts/" + aid + "/ack", "", "application/json");
    REQUIRE(ack);
    CHECK(nlohmann::json::parse(ack->body)["status"] == "acknowledged");
    auto open = cli.Get("/v1/alerts?status=open");
    REQUIRE(open);
    CHECK(nlohmann::json::parse(open->body)["alerts"].empty());
    CHECK(cli.Get("/v1/alerts/ffff")->status == 404);

    auto up = post("/v1/fl/update", {{"weight_delta", {0.3, 0.4}}, {"round", 0}, {"client_id", "c1"}});
    REQUIRE(up);
    CHECK(up->status == 202);
    auto bin = fl::encode_update({{0.0, 0.1}, 1, "c2", 1});
    auto up2 = cli.Post("/v1/fl/update", bin, "application/octet-stream");
    REQUIRE(up2);
    CHECK(up2->status == 202);
    auto model = cli.Get("/v1/fl/model?round=1");
    REQUIRE(model);
    auto mj = nlohmann::json::parse(model->body);
    CHECK(mj["round"] == 1);
    CHECK(mj["weights"][0].get<double>() == doctest::Approx(0.3));
    CHECK(mj["weights"][1].get<double>() == doctest::Approx(0.4));
    auto latest = cli.Get("/v1/fl/model", {{"Accept", "application/octet-stream"}});
    REQUIRE(latest);
    auto [round, w] = fl::decode_weights(latest->body);
    CHECK(round == 2);
    CHECK(w[1] == doctest::Approx(0.5));
    CHECK(post("/v1/fl/update", {{"weight_delta", {1.0}}, {"round", 2}})->status == 400);
    CHECK(cli.Get("/v1/fl/model?round=9")->status == 404);

    *h.clock += 601;
    auto gone = post("/v1/query", {{"session_id", sid}, {"text", kCheapRequest}});
    REQUIRE(gone);
    CHECK(gone->status == 410);
    CHECK(nlohmann::json::parse(gone->body)["error"] == "SessionExpired");
    server.stop();
}

namespace {

// Self-signed certificate usable both as server identity and client CA.
void write_self_signed(const std::string& cert_path, const std::string& key_path) {
    EVP_PKEY* key = EVP_RSA_gen(2048);
    REQUIRE(key != nullptr);
    X509* x = X509_new();
    ASN1_INTEGER_set(X509_get_serialNumber(x), 1);
    X509_gmtime_adj(X509_getm_notBefore(x), 0);
    X509_gmtime_adj(X509_getm_notAfter(x), 3600);
    X509_set_pubkey(x, key);
    X509_NAME* name = X509_get_subject_name(x);
    X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC, reinterpret_cast<const unsigned char*>("localhost"), -1, -1, 0);
    X509_set_issuer_name(x, name);
    X509_sign(x, key, EVP_sha256());
    FILE* f = std::fopen(cert_path.c_str(), "wb");
    PEM_write_X509(f, x);
    std::fclose(f);
    f = std::fopen(key_path.c_str(), "wb");
    PEM_write_PrivateKey(f, key, nullptr, nullptr, 0, nullptr, nullptr);
    std::fclose(f);
    X509_free(x);
    EVP_PKEY_free(key);
}

}  // namespace

TEST_CASE("https with client authentication") {
    auto dir = std::filesystem::temp_directory_path();
    auto cert = (dir / "ioev_test_cert.pem").string();
    auto key = (dir / "ioev_test_key.pem").string();
    write_self_signed(cert, key);

    auto cfg = base_config();
    cfg.tls = {cert, key, cert, true};
    Harness h(cfg);
    GatewayServer server(h.svc);
    int port = server.start("127.0.0.1", 0);

    httplib::SSLClient anonymous("127.0.0.1", port);
    anonymous.enable_server_certificate_verification(false);
    CHECK_FALSE(anonymous.Get("/v1/health"));

    httplib::SSLClient client("localhost", port, cert, key);
    client.set_address_family(AF_INET);
    client.set_ca_cert_path(cert.c_str());
    auto r = client.Get("/v1/health");
    REQUIRE(r);
    CHECK(r->status == 200);

    httplib::Client plain("127.0.0.1", port);
    CHECK_FALSE(plain.Get("/v1/health"));
    server.stop();

    cfg.tls.key_file = (dir / "missing.pem").string();
    Harness broken(cfg);
    GatewayServer bad(broken.svc);
    CHECK_ERROR_CODE(bad.start("127.0.0.1", 0), ErrorCode::IoError);
    std::filesystem::remove(cert);
    std::filesystem::remove(key);
}

TEST_CASE("periodic purge runs while serving") {
    auto cfg = base_config();
    cfg.retention.default_ttl_seconds = 0.2;
    cfg.retention.purge_interval_seconds = 0.05;
    Harness h(cfg);
    auto s = h.svc->create_session(full_request());
    *h.clock += 1.0;
    GatewayServer server(h.svc);
    server.start("127.0.0.1", 0);
    bool purged = false;
    for (int i = 0; i < 100 && !purged; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        purged = h.record(s.session_id)["purged"].get<bool>();
    }
    server.stop();
    CHECK(purged);
    CHECK(h.record(s.session_id)["scoped_data"].empty());
}
