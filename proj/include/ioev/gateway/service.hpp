#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/attribution/shapley.hpp"
#include "ioev/fl/federated.hpp"
#include "ioev/gateway/config.hpp"
#include "ioev/gateway/store.hpp"
#include "ioev/ids/detector.hpp"
#include "ioev/intent/intent.hpp"
#include "ioev/ssa/agent.hpp"
#include "ioev/support/pipeline.hpp"

namespace ioev::gateway {

inline constexpr const char* kSessionSchema = "ioev.session/1";
inline constexpr const char* kAlertSchema = "ioev.alert/1";
inline constexpr const char* kQuerySchema = "ioev.query/1";
inline constexpr const char* kModelSchema = "ioev.fl.model/1";

// Scoped session fields.
inline constexpr const char* kCalendarField = "calendar";
inline constexpr const char* kVehicleField = "vehicle_profile";
inline constexpr const char* kRawInputsField = "raw_inputs";
inline constexpr const char* kTelemetryField = "telemetry";
inline constexpr const char* kTraceField = "trace";

struct Session {
    std::string session_id;
    double created_at = 0.0;
    double ttl_seconds = 0.0;
    std::string salt;  // per-session pseudonymization key, never exported
    nlohmann::json scoped_data = nlohmann::json::object();
    std::map<std::string, bool> consent;
    bool purged = false;

    double expires_at() const { return created_at + ttl_seconds; }
    bool expired(double now) const { return expires_at() < now; }
    bool consents(const std::string& field) const;

    nlohmann::json to_record() const;  // full persisted form
    static Session from_record(const nlohmann::json& j);
};

struct SessionRequest {
    std::optional<double> ttl_seconds;
    std::map<std::string, bool> consent;
    std::optional<support::VehicleProfile> vehicle;
    std::optional<std::vector<support::CalendarEvent>> calendar;

    static SessionRequest from_json(const nlohmann::json& j);
};

enum class AlertStatus { open, acknowledged };
std::string to_string(AlertStatus s);
AlertStatus parse_alert_status(const std::string& s);

struct AlertEvent {
    std::string alert_id;
    std::string station_id;  // pseudonymized
    ids::AttackClass verdict = ids::AttackClass::dos;
    ids::Probabilities probabilities{};
    attribution::Attribution attribution;  // of the verdict probability
    std::vector<std::string> feature_names;
    std::vector<double> features;  // stored for re-inference
    std::string detector_fingerprint;
    double created_at = 0.0;
    AlertStatus status = AlertStatus::open;

    // Includes a waterfall of the top contributions for display.
    nlohmann::json to_json() const;
    static AlertEvent from_json(const nlohmann::json& j);
};

struct PurgeReport {
    std::vector<std::string> purged;
    nlohmann::json to_json() const;
};

// One read of session-scoped data.
struct AccessRecord {
    std::string requester;  // session the request was made for
    std::string owner;      // session whose data was read
    std::string field;
    bool allowed = true;
};

struct QueryRequest {
    std::string session_id;
    std::string text;
    ssa::Audience audience = ssa::Audience::driver;
    std::optional<ssa::Payload> payload;
};

struct QueryResponse {
    std::string session_id;
    intent::IntentResult intent;
    std::string route;  // "support" or "ssa"
    std::optional<support::PipelineResult> support;
    std::optional<ssa::AssistantResponse> assistant;

    nlohmann::json to_json() const;
};

nlohmann::json intent_to_json(const intent::IntentResult& r);

struct GatewayDeps {
    std::shared_ptr<const intent::IntentGate> intent;
    intent::BackendKind intent_backend = intent::BackendKind::baseline;
    std::shared_ptr<const ssa::SafetySecurityAgent> ssa;
    std::shared_ptr<const ids::Detector> detector;
    attribution::BackgroundSet flow_background;
    attribution::ShapleyOptions flow_shapley;
    support::SeriesProvider prices;
    std::vector<support::StationCandidate> stations;
    support::PsaBackend psa;
    std::vector<double> fl_initial_weights;
    std::function<double()> clock;  // seconds; system clock when empty
};

class GatewayService {
public:
    GatewayService(GatewayConfig cfg, GatewayDeps deps, std::unique_ptr<KvStore> store = nullptr);

    const GatewayConfig& config() const { return cfg_; }
    double now() const;

    Session create_session(const SessionRequest& req);
    // Replaces the given scoped fields and consent flags. SessionExpired/UnknownSession.
    Session update_session(const std::string& id, const SessionRequest& req);
    // TTL, consent and the names of the scoped fields held; no values.
    nlohmann::json session_view(const std::string& id) const;
    nlohmann::json trace(const std::string& id) const;

    // Intent gate, then the support pipeline (label 0) or the safety agent.
    QueryResponse handle_query(const QueryRequest& req);
    // Stores the window in the session and runs battery diagnostics on it.
    ssa::AssistantResponse battery_telemetry(const std::string& session_id, const battery::TelemetryWindow& w,
                                             ssa::Audience audience = ssa::Audience::driver);

    // All flows are schema-checked before any alert is created (SchemaMismatch).
    std::vector<AlertEvent> ingest_flows(const std::string& station_id, const std::vector<ids::FlowRecord>& flows);
    std::vector<AlertEvent> alerts(std::optional<AlertStatus> status = std::nullopt) const;
    AlertEvent alert(const std::string& id) const;
    AlertEvent acknowledge(const std::string& id);

    PurgeReport purge_expired(double now);
    PurgeReport purge_expired() { return purge_expired(now()); }

    struct FlSubmitResult {
        int round = 0;         // round the update was queued for
        bool aggregated = false;
    };
    FlSubmitResult fl_submit(const fl::ModelUpdate& update);
    // Closes the open round; InvalidArgument when no update arrived.
    int fl_aggregate();
    // Latest weights when round is absent; UnknownRound otherwise.
    std::pair<int, std::vector<double>> fl_fetch(std::optional<int> round = std::nullopt) const;
    nlohmann::json fl_status() const;

    void set_access_hook(std::function<void(const AccessRecord&)> hook);
    std::vector<AccessRecord> access_log() const;

private:
    Session load_active(const std::string& id) const;
    void save(const Session& s);
    nlohmann::json read_scoped(const std::string& requester, const Session& owner, const std::string& field) const;
    support::SessionContext support_context(const std::string& requester, const Session& s) const;
    void record_turn(const std::string& id, nlohmann::json entry, const nlohmann::json& raw);
    ssa::Payload payload_for(const std::string& requester, const Session& s, intent::IntentLabel label) const;

    GatewayConfig cfg_;
    GatewayDeps deps_;
    std::unique_ptr<KvStore> store_;
    std::string alert_salt_;

    // Guards session records so a purge never interleaves with a request's
    // read or write of the same record.
    mutable std::mutex sessions_mu_;
    mutable std::mutex alerts_mu_;
    mutable std::mutex fl_mu_;
    mutable std::mutex audit_mu_;

    fl::RoundState fl_round_;
    std::map<int, std::vector<double>> fl_history_;

    std::function<void(const AccessRecord&)> access_hook_;
    mutable std::deque<AccessRecord> access_log_;
};

}  // namespace ioev::gateway
