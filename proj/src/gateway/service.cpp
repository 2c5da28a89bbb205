#include "ioev/gateway/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ioev/attribution/adapters.hpp"
#include "ioev/core/error.hpp"
#include "ioev/gateway/privacy.hpp"

namespace ioev::gateway {

namespace {

constexpr size_t kAccessLogLimit = 10000;
constexpr size_t kWaterfallBars = 10;

const std::vector<std::string>& scoped_fields() {
    static const std::vector<std::string> f = {kCalendarField, kVehicleField, kRawInputsField, kTelemetryField,
                                               kTraceField};
    return f;
}

std::string session_key(const std::string& id) { return "session/" + id; }
std::string alert_key(const std::string& id) { return "alert/" + id; }

nlohmann::json calendar_to_json(const std::vector<support::CalendarEvent>& events) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : events) arr.push_back({{"title", e.title}, {"hour", e.hour}, {"minute", e.minute}});
    return arr;
}

// Accepts {"title", "hour", "minute"} or {"title", "time": "HH:MM"}.
std::vector<support::CalendarEvent> calendar_from_json(const nlohmann::json& arr) {
    std::vector<support::CalendarEvent> out;
    for (const auto& e : arr) {
        support::CalendarEvent ev;
        ev.title = e.at("title").get<std::string>();
        if (e.contains("time")) {
            auto t = e.at("time").get<std::string>();
            auto colon = t.find(':');
            require(colon != std::string::npos, ErrorCode::SchemaViolation, "calendar time must be HH:MM");
            ev.hour = std::stoi(t.substr(0, colon));
            ev.minute = std::stoi(t.substr(colon + 1));
        } else {
            ev.hour = e.at("hour").get<int>();
            ev.minute = e.value("minute", 0);
        }
        require(ev.hour >= 0 && ev.hour < 24 && ev.minute >= 0 && ev.minute < 60, ErrorCode::SchemaViolation,
                "calendar time out of range");
        out.push_back(std::move(ev));
    }
    return out;
}

int close_round(fl::RoundState& round, std::map<int, std::vector<double>>& history, const GatewayConfig& cfg) {
    fl::DPConfig dp;
    dp.clip_norm = cfg.fl_clip_norm;
    dp.noise_sigma = cfg.fl_noise_sigma;
    dp.seed = cfg.seed;
    auto next = fl::aggregate(round, dp);
    round.round_index += 1;
    round.global_weights = std::move(next);
    round.received.clear();
    round.status = fl::RoundStatus::open;
    history[round.round_index] = round.global_weights;
    return round.round_index;
}

}  // namespace

bool Session::consents(const std::string& field) const {
    auto it = consent.find(field);
    return it != consent.end() && it->second;
}

nlohmann::json Session::to_record() const {
    return {{"schema", kSessionSchema}, {"session_id", session_id}, {"created_at", created_at},
            {"ttl_seconds", ttl_seconds}, {"salt", salt},           {"scoped_data", scoped_data},
            {"consent", consent},         {"purged", purged}};
}

Session Session::from_record(const nlohmann::json& j) {
    try {
        Session s;
        s.session_id = j.at("session_id").get<std::string>();
        s.created_at = j.at("created_at").get<double>();
        s.ttl_seconds = j.at("ttl_seconds").get<double>();
        s.salt = j.at("salt").get<std::string>();
        s.scoped_data = j.at("scoped_data");
        s.consent = j.at("consent").get<std::map<std::string, bool>>();
        s.purged = j.at("purged").get<bool>();
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("corrupt session record: ") + e.what());
    }
}

SessionRequest SessionRequest::from_json(const nlohmann::json& j) {
    SessionRequest r;
    try {
        require(j.is_object(), ErrorCode::SchemaViolation, "session request must be an object");
        if (j.contains("ttl_seconds")) r.ttl_seconds = j.at("ttl_seconds").get<double>();
        if (j.contains("consent")) r.consent = j.at("consent").get<std::map<std::string, bool>>();
        if (j.contains(kVehicleField)) r.vehicle = support::VehicleProfile::from_json(j.at(kVehicleField));
        if (j.contains(kCalendarField)) r.calendar = calendar_from_json(j.at(kCalendarField));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaViolation, std::string("session request: ") + e.what());
    } catch (const std::logic_error& e) {  // stoi
        fail(ErrorCode::SchemaViolation, std::string("session request: ") + e.what());
    }
    for (const auto& [field, on] : r.consent) {
        (void)on;
        require(std::find(scoped_fields().begin(), scoped_fields().end(), field) != scoped_fields().end(),
                ErrorCode::SchemaViolation, "unknown consent field '" + field + "'");
    }
    return r;
}

std::string to_string(AlertStatus s) { return s == AlertStatus::open ? "open" : "acknowledged"; }

AlertStatus parse_alert_status(const std::string& s) {
    if (s == "open") return AlertStatus::open;
    if (s == "acknowledged") return AlertStatus::acknowledged;
    fail(ErrorCode::InvalidArgument, "unknown alert status '" + s + "'");
}

nlohmann::json AlertEvent::to_json() const {
    return {{"schema", kAlertSchema},
            {"alert_id", alert_id},
            {"station_id", station_id},
            {"verdict", ids::to_string(verdict)},
            {"probabilities", std::vector<double>(probabilities.begin(), probabilities.end())},
            {"attribution", attribution.to_json()},
            {"waterfall", attribution::waterfall_data(attribution, kWaterfallBars).to_json()},
            {"feature_names", feature_names},
            {"features", features},
            {"detector_fingerprint", detector_fingerprint},
            {"created_at", created_at},
            {"status", to_string(status)}};
}

AlertEvent AlertEvent::from_json(const nlohmann::json& j) {
    try {
        AlertEvent a;
        a.alert_id = j.at("alert_id").get<std::string>();
        a.station_id = j.at("station_id").get<std::string>();
        a.verdict = ids::parse_attack_label(j.at("verdict").get<std::string>());
        auto p = j.at("probabilities").get<std::vector<double>>();
        require(p.size() == a.probabilities.size(), ErrorCode::ParseError, "alert probabilities have the wrong size");
        std::copy(p.begin(), p.end(), a.probabilities.begin());
        a.attribution = attribution::Attribution::from_json(j.at("attribution"));
        a.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        a.features = j.at("features").get<std::vector<double>>();
        a.detector_fingerprint = j.at("detector_fingerprint").get<std::string>();
        a.created_at = j.at("created_at").get<double>();
        a.status = parse_alert_status(j.at("status").get<std::string>());
        return a;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("corrupt alert record: ") + e.what());
    }
}

nlohmann::json PurgeReport::to_json() const { return {{"purged", purged}}; }

nlohmann::json intent_to_json(const intent::IntentResult& r) {
    return {{"label", static_cast<int>(r.label)},
            {"name", intent::to_string(r.label)},
            {"confidence", r.confidence},
            {"backend", r.backend == intent::BackendKind::baseline ? "baseline" : "transformer"},
            {"bypassed", r.bypassed}};
}

nlohmann::json QueryResponse::to_json() const {
    nlohmann::json j = {{"schema", kQuerySchema}, {"session_id", session_id}, {"intent", intent_to_json(intent)},
                        {"route", route}};
    if (support) j["result"] = support->to_json();
    else if (assistant) j["result"] = assistant->to_json();
    else j["result"] = nullptr;
    return j;
}

GatewayService::GatewayService(GatewayConfig cfg, GatewayDeps deps, std::unique_ptr<KvStore> store)
    : cfg_(std::move(cfg)), deps_(std::move(deps)), store_(store ? std::move(store) : open_store(cfg_.store_path)) {
    cfg_.validate();
    if (auto salt = store_->get("meta/alert_salt")) {
        alert_salt_ = *salt;
    } else {
        alert_salt_ = random_hex(32);
        store_->put("meta/alert_salt", alert_salt_);
    }
    fl_round_.global_weights = deps_.fl_initial_weights;
    fl_history_[0] = deps_.fl_initial_weights;
}

double GatewayService::now() const {
    if (deps_.clock) return deps_.clock();
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

Session GatewayService::load_active(const std::string& id) const {
    auto rec = store_->get(session_key(id));
    if (!rec) fail(ErrorCode::UnknownSession, "unknown session");
    auto s = Session::from_record(nlohmann::json::parse(*rec));
    if (s.purged || s.expired(now())) fail(ErrorCode::SessionExpired, "session " + id + " has expired");
    return s;
}

void GatewayService::save(const Session& s) { store_->put(session_key(s.session_id), s.to_record().dump()); }

nlohmann::json GatewayService::read_scoped(const std::string& requester, const Session& owner,
                                           const std::string& field) const {
    AccessRecord rec{requester, owner.session_id, field, requester == owner.session_id};
    {
        std::lock_guard lock(audit_mu_);
        access_log_.push_back(rec);
        if (access_log_.size() > kAccessLogLimit) access_log_.pop_front();
        if (access_hook_) access_hook_(rec);
    }
    require(rec.allowed, ErrorCode::InvalidArgument, "scope violation: cross-session read refused");
    return owner.scoped_data.contains(field) ? owner.scoped_data.at(field) : nlohmann::json(nullptr);
}

void GatewayService::set_access_hook(std::function<void(const AccessRecord&)> hook) {
    std::lock_guard lock(audit_mu_);
    access_hook_ = std::move(hook);
}

std::vector<AccessRecord> GatewayService::access_log() const {
    std::lock_guard lock(audit_mu_);
    return {access_log_.begin(), access_log_.end()};
}

Session GatewayService::create_session(const SessionRequest& req) {
    Session s;
    s.ttl_seconds = req.ttl_seconds.value_or(cfg_.retention.default_ttl_seconds);
    require(s.ttl_seconds > 0.0 && s.ttl_seconds <= cfg_.retention.default_ttl_seconds, ErrorCode::InvalidArgument,
            "session ttl must be positive and within the retention policy");
    s.session_id = random_hex(16);
    s.salt = random_hex(32);
    s.created_at = now();
    s.consent = req.consent;
    if (req.vehicle) s.scoped_data[kVehicleField] = req.vehicle->to_json();
    if (req.calendar) s.scoped_data[kCalendarField] = calendar_to_json(*req.calendar);
    std::lock_guard lock(sessions_mu_);
    save(s);
    return s;
}

Session GatewayService::update_session(const std::string& id, const SessionRequest& req) {
    require(!req.ttl_seconds, ErrorCode::InvalidArgument, "session ttl cannot be changed");
    std::lock_guard lock(sessions_mu_);
    auto s = load_active(id);
    for (const auto& [field, on] : req.consent) s.consent[field] = on;
    if (req.vehicle) s.scoped_data[kVehicleField] = req.vehicle->to_json();
    if (req.calendar) s.scoped_data[kCalendarField] = calendar_to_json(*req.calendar);
    save(s);
    return s;
}

nlohmann::json GatewayService::session_view(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto s = load_active(id);
    nlohmann::json inventory = nlohmann::json::array();
    for (const auto& [field, value] : s.scoped_data.items()) {
        (void)value;
        inventory.push_back(
            {{"field", field}, {"retained_on_expiry", cfg_.retention.exempt(field) && s.consents(field)}});
    }
    return {{"schema", kSessionSchema},
            {"session_id", s.session_id},
            {"created_at", s.created_at},
            {"expires_at", s.expires_at()},
            {"ttl_seconds", s.ttl_seconds},
            {"ttl_remaining", std::max(0.0, s.expires_at() - now())},
            {"consent", s.consent},
            {"inventory", inventory},
            {"retention", cfg_.retention.to_json()}};
}

nlohmann::json GatewayService::trace(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto s = load_active(id);
    auto t = read_scoped(id, s, kTraceField);
    return {{"session_id", id}, {"turns", t.is_null() ? nlohmann::json::array() : t}};
}

support::SessionContext GatewayService::support_context(const std::string& requester, const Session& s) const {
    support::SessionContext ctx;
    if (auto v = read_scoped(requester, s, kVehicleField); !v.is_null())
        ctx.vehicle = support::VehicleProfile::from_json(v);
    if (auto c = read_scoped(requester, s, kCalendarField); !c.is_null()) ctx.calendar = calendar_from_json(c);
    ctx.prices = deps_.prices;
    ctx.stations = deps_.stations;
    ctx.horizon_start_hour = cfg_.horizon_start_hour;
    return ctx;
}

ssa::Payload GatewayService::payload_for(const std::string& requester, const Session& s,
                                         intent::IntentLabel label) const {
    if (label == intent::IntentLabel::battery_diagnostics) {
        auto t = read_scoped(requester, s, kTelemetryField);
        require(!t.is_null(), ErrorCode::InvalidArgument, "no battery telemetry in this session");
        return battery::TelemetryWindow::from_flat(t.at("flat").get<std::vector<double>>(),
                                                   t.at("vehicle_id").get<std::string>());
    }
    auto open = alerts(AlertStatus::open);
    require(!open.empty(), ErrorCode::InvalidArgument, "no flow to analyse: send one or wait for an alert");
    const auto& latest = open.back();
    return ids::FlowRecord{latest.feature_names, latest.features, std::nullopt};
}

void GatewayService::record_turn(const std::string& id, nlohmann::json entry, const nlohmann::json& raw) {
    std::lock_guard lock(sessions_mu_);
    auto s = load_active(id);  // a purge may have run while the request computed
    auto& turns = s.scoped_data[kTraceField];
    if (!turns.is_array()) turns = nlohmann::json::array();
    turns.push_back(std::move(entry));
    if (s.consents(kRawInputsField) && !raw.is_null()) {
        auto& kept = s.scoped_data[kRawInputsField];
        if (!kept.is_array()) kept = nlohmann::json::array();
        kept.push_back(raw);
    }
    save(s);
}

QueryResponse GatewayService::handle_query(const QueryRequest& req) {
    Session s;
    {
        std::lock_guard lock(sessions_mu_);
        s = load_active(req.session_id);
    }
    require(deps_.intent != nullptr, ErrorCode::BackendUnavailable, "intent gate is not configured");
    auto source = req.audience == ssa::Audience::operator_role ? intent::QuerySource::operator_role
                                                                : intent::QuerySource::driver;
    intent::QueryText q(req.text, source, req.session_id);

    QueryResponse r;
    r.session_id = req.session_id;
    r.intent = deps_.intent->classify(q, deps_.intent_backend);
    nlohmann::json entry = {{"at", now()}, {"query", req.text}, {"intent", intent_to_json(r.intent)}};
    nlohmann::json raw = {{"query", req.text}};

    if (r.intent.label == intent::IntentLabel::user_support) {
        r.route = "support";
        auto ctx = support_context(req.session_id, s);
        r.support = support::pipeline_run(q, ctx, {deps_.psa, nullptr});
        entry["result"] = r.support->to_json();
    } else {
        r.route = "ssa";
        require(deps_.ssa != nullptr, ErrorCode::BackendUnavailable, "safety agent is not configured");
        auto payload = req.payload ? *req.payload : payload_for(req.session_id, s, r.intent.label);
        r.assistant = deps_.ssa->handle(r.intent, payload, req.text, req.audience);
        entry["result"] = r.assistant->to_json();
    }
    entry["route"] = r.route;
    record_turn(req.session_id, std::move(entry), raw);
    return r;
}

ssa::AssistantResponse GatewayService::battery_telemetry(const std::string& session_id,
                                                         const battery::TelemetryWindow& w, ssa::Audience audience) {
    Session s;
    {
        std::lock_guard lock(sessions_mu_);
        s = load_active(session_id);
    }
    require(deps_.ssa != nullptr, ErrorCode::BackendUnavailable, "safety agent is not configured");
    std::string vehicle = pseudonymize(w.vehicle_id().empty() ? "unknown" : w.vehicle_id(), s.salt);
    battery::TelemetryWindow scoped(w.frames(), vehicle, w.window_start_index());
    intent::IntentResult ir{intent::IntentLabel::battery_diagnostics, 1.0, intent::BackendKind::baseline, true};
    auto resp = deps_.ssa->handle(ir, scoped, "battery telemetry diagnostics", audience);

    nlohmann::json stored = {{"vehicle_id", vehicle}, {"flat", scoped.flatten()}};
    {
        std::lock_guard lock(sessions_mu_);
        auto cur = load_active(session_id);
        cur.scoped_data[kTelemetryField] = stored;
        save(cur);
    }
    record_turn(session_id,
                {{"at", now()}, {"query", "battery telemetry"}, {"intent", intent_to_json(ir)}, {"route", "ssa"},
                 {"result", resp.to_json()}},
                {{"telemetry", stored}});
    return resp;
}

std::vector<AlertEvent> GatewayService::ingest_flows(const std::string& station_id,
                                                     const std::vector<ids::FlowRecord>& flows) {
    require(deps_.detector != nullptr, ErrorCode::BackendUnavailable, "intrusion detector is not configured");
    require(!station_id.empty(), ErrorCode::InvalidArgument, "station id is empty");
    const auto& names = deps_.detector->feature_names();
    for (size_t i = 0; i < flows.size(); ++i) {
        const auto& f = flows[i];
        require(f.names == names && f.values.size() == names.size(), ErrorCode::SchemaMismatch,
                "flow " + std::to_string(i) + " does not match the detector schema " + deps_.detector->fingerprint());
        require(std::all_of(f.values.begin(), f.values.end(), [](double v) { return std::isfinite(v); }),
                ErrorCode::SchemaMismatch, "flow " + std::to_string(i) + " has non-finite values");
    }
    std::string station = pseudonymize(station_id, alert_salt_);
    std::vector<AlertEvent> created;
    for (const auto& f : flows) {
        auto pred = deps_.detector->infer(f);
        if (pred.label == ids::AttackClass::benign) continue;
        auto ex = attribution::explain_flow(*deps_.detector, f, deps_.flow_background, deps_.flow_shapley);
        AlertEvent a;
        a.alert_id = random_hex(8);
        a.station_id = station;
        a.verdict = pred.label;
        a.probabilities = pred.probabilities;
        a.attribution = std::move(ex.attribution);
        a.feature_names = f.names;
        a.features = f.values;
        a.detector_fingerprint = deps_.detector->fingerprint();
        a.created_at = now();
        created.push_back(std::move(a));
    }
    std::lock_guard lock(alerts_mu_);
    for (const auto& a : created) store_->put(alert_key(a.alert_id), a.to_json().dump());
    return created;
}

std::vector<AlertEvent> GatewayService::alerts(std::optional<AlertStatus> status) const {
    std::vector<AlertEvent> out;
    {
        std::lock_guard lock(alerts_mu_);
        for (const auto& k : store_->keys("alert/")) {
            auto rec = store_->get(k);
            if (!rec) continue;
            auto a = AlertEvent::from_json(nlohmann::json::parse(*rec));
            if (!status || a.status == *status) out.push_back(std::move(a));
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const AlertEvent& x, const AlertEvent& y) {
        return x.created_at != y.created_at ? x.created_at < y.created_at : x.alert_id < y.alert_id;
    });
    return out;
}

AlertEvent GatewayService::alert(const std::string& id) const {
    std::lock_guard lock(alerts_mu_);
    auto rec = store_->get(alert_key(id));
    if (!rec) fail(ErrorCode::UnknownAlert, "unknown alert '" + id + "'");
    return AlertEvent::from_json(nlohmann::json::parse(*rec));
}

AlertEvent GatewayService::acknowledge(const std::string& id) {
    std::lock_guard lock(alerts_mu_);
    auto rec = store_->get(alert_key(id));
    if (!rec) fail(ErrorCode::UnknownAlert, "unknown alert '" + id + "'");
    auto a = AlertEvent::from_json(nlohmann::json::parse(*rec));
    a.status = AlertStatus::acknowledged;
    store_->put(alert_key(id), a.to_json().dump());
    return a;
}

PurgeReport GatewayService::purge_expired(double at) {
    PurgeReport report;
    std::lock_guard lock(sessions_mu_);
    for (const auto& k : store_->keys("session/")) {
        auto rec = store_->get(k);
        if (!rec) continue;
        auto s = Session::from_record(nlohmann::json::parse(*rec));
        if (s.purged || !s.expired(at)) continue;
        nlohmann::json kept = nlohmann::json::object();
        for (const auto& [field, value] : s.scoped_data.items())
            if (cfg_.retention.exempt(field) && s.consents(field)) kept[field] = value;
        s.scoped_data = std::move(kept);
        s.salt.clear();  // pseudonyms issued in the session can no longer be reproduced
        s.purged = true;
        save(s);
        report.purged.push_back(s.session_id);
    }
    return report;
}

GatewayService::FlSubmitResult GatewayService::fl_submit(const fl::ModelUpdate& update) {
    std::lock_guard lock(fl_mu_);
    require(!fl_round_.global_weights.empty(), ErrorCode::BackendUnavailable, "no federated model is configured");
    if (update.round != fl_round_.round_index)
        fail(ErrorCode::UnknownRound, "round " + std::to_string(update.round) + " is not open (open round is " +
                                          std::to_string(fl_round_.round_index) + ")");
    require(update.weight_delta.size() == fl_round_.global_weights.size(), ErrorCode::DimensionMismatch,
            "update has " + std::to_string(update.weight_delta.size()) + " weights, the global model has " +
                std::to_string(fl_round_.global_weights.size()));
    update.validate();
    fl_round_.received.push_back(update);
    FlSubmitResult r{update.round, false};
    if (fl_round_.received.size() >= cfg_.fl_min_clients) {
        close_round(fl_round_, fl_history_, cfg_);
        r.aggregated = true;
    }
    return r;
}

int GatewayService::fl_aggregate() {
    std::lock_guard lock(fl_mu_);
    require(!fl_round_.received.empty(), ErrorCode::EmptyRound, "no updates in the open round");
    return close_round(fl_round_, fl_history_, cfg_);
}

std::pair<int, std::vector<double>> GatewayService::fl_fetch(std::optional<int> round) const {
    std::lock_guard lock(fl_mu_);
    if (!round) return {fl_history_.rbegin()->first, fl_history_.rbegin()->second};
    auto it = fl_history_.find(*round);
    if (it == fl_history_.end()) fail(ErrorCode::UnknownRound, "no model for round " + std::to_string(*round));
    return {it->first, it->second};
}

nlohmann::json GatewayService::fl_status() const {
    std::lock_guard lock(fl_mu_);
    return {{"open_round", fl_round_.round_index},
            {"received", fl_round_.received.size()},
            {"min_clients", cfg_.fl_min_clients},
            {"dimension", fl_round_.global_weights.size()},
            {"latest_round", fl_history_.rbegin()->first}};
}

}  // namespace ioev::gateway
