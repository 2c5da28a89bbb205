#include "ioev/gateway/config.hpp"

#include <cstdlib>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev::gateway {

void GatewayConfig::validate() const {
    require(port > 0 && port < 65536, ErrorCode::InvalidArgument, "port out of range");
    retention.validate();
    require(horizon_start_hour >= 0 && horizon_start_hour < 24, ErrorCode::InvalidArgument,
            "horizon start hour must be in [0, 24)");
    require(fl_min_clients >= 1, ErrorCode::InvalidArgument, "fl_min_clients must be at least 1");
    require(fl_clip_norm > 0.0 && fl_noise_sigma >= 0.0, ErrorCode::InvalidArgument, "invalid FL privacy settings");
    require(tls.enabled() == !tls.key_file.empty(), ErrorCode::InvalidArgument,
            "TLS needs both a certificate and a key");
    require(!tls.client_auth || (tls.enabled() && !tls.client_ca_file.empty()), ErrorCode::InvalidArgument,
            "client authentication needs TLS and a client CA file");
}

nlohmann::json GatewayConfig::to_json() const {
    return {{"host", host},
            {"port", port},
            {"session_ttl_seconds", retention.default_ttl_seconds},
            {"purge_interval_seconds", retention.purge_interval_seconds},
            {"consent_exempt", retention.consent_exempt},
            {"store_path", store_path},
            {"intent_corpus", intent_corpus},
            {"battery_model", battery_model},
            {"ids_model", ids_model},
            {"ids_background", ids_background},
            {"price_model", price_model},
            {"price_history", price_history},
            {"docs_dir", docs_dir},
            {"stations_file", stations_file},
            {"llm_base_url", llm_base_url},
            {"llm_model", llm_model},
            {"llm_token_env", llm_token_env},
            {"horizon_start_hour", horizon_start_hour},
            {"fl_min_clients", fl_min_clients},
            {"fl_clip_norm", fl_clip_norm},
            {"fl_noise_sigma", fl_noise_sigma},
            {"seed", seed},
            {"tls",
             {{"cert_file", tls.cert_file},
              {"key_file", tls.key_file},
              {"client_ca_file", tls.client_ca_file},
              {"client_auth", tls.client_auth}}}};
}

GatewayConfig GatewayConfig::from_json(const nlohmann::json& j) {
    GatewayConfig c;
    const auto known = c.to_json();
    try {
        for (const auto& [k, v] : j.items()) {
            require(known.contains(k), ErrorCode::ParseError, "unknown config key '" + k + "'");
            (void)v;
        }
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.retention.default_ttl_seconds = j.value("session_ttl_seconds", c.retention.default_ttl_seconds);
        c.retention.purge_interval_seconds = j.value("purge_interval_seconds", c.retention.purge_interval_seconds);
        c.retention.consent_exempt = j.value("consent_exempt", c.retention.consent_exempt);
        c.store_path = j.value("store_path", c.store_path);
        c.intent_corpus = j.value("intent_corpus", c.intent_corpus);
        c.battery_model = j.value("battery_model", c.battery_model);
        c.ids_model = j.value("ids_model", c.ids_model);
        c.ids_background = j.value("ids_background", c.ids_background);
        c.price_model = j.value("price_model", c.price_model);
        c.price_history = j.value("price_history", c.price_history);
        c.docs_dir = j.value("docs_dir", c.docs_dir);
        c.stations_file = j.value("stations_file", c.stations_file);
        c.llm_base_url = j.value("llm_base_url", c.llm_base_url);
        c.llm_model = j.value("llm_model", c.llm_model);
        c.llm_token_env = j.value("llm_token_env", c.llm_token_env);
        c.horizon_start_hour = j.value("horizon_start_hour", c.horizon_start_hour);
        c.fl_min_clients = j.value("fl_min_clients", c.fl_min_clients);
        c.fl_clip_norm = j.value("fl_clip_norm", c.fl_clip_norm);
        c.fl_noise_sigma = j.value("fl_noise_sigma", c.fl_noise_sigma);
        c.seed = j.value("seed", c.seed);
        if (j.contains("tls")) {
            const auto& t = j.at("tls");
            c.tls.cert_file = t.value("cert_file", "");
            c.tls.key_file = t.value("key_file", "");
            c.tls.client_ca_file = t.value("client_ca_file", "");
            c.tls.client_auth = t.value("client_auth", false);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("config: ") + e.what());
    }
    return c;
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    };
}

namespace {

double to_number(const std::string& name, const std::string& v) {
    try {
        size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    fail(ErrorCode::ParseError, name + " is not a number: '" + v + "'");
}

bool to_bool(const std::string& name, const std::string& v) {
    std::string s = to_lower(trim(v));
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off" || s.empty()) return false;
    fail(ErrorCode::ParseError, name + " is not a boolean: '" + v + "'");
}

}  // namespace

void apply_env(GatewayConfig& c, const EnvLookup& env) {
    auto str = [&](const char* name, std::string& field) {
        if (auto v = env(name)) field = *v;
    };
    str("IOEV_HOST", c.host);
    if (auto v = env("IOEV_PORT")) c.port = static_cast<int>(to_number("IOEV_PORT", *v));
    if (auto v = env("IOEV_SESSION_TTL")) c.retention.default_ttl_seconds = to_number("IOEV_SESSION_TTL", *v);
    if (auto v = env("IOEV_PURGE_INTERVAL"))
        c.retention.purge_interval_seconds = to_number("IOEV_PURGE_INTERVAL", *v);
    str("IOEV_STORE", c.store_path);
    str("IOEV_INTENT_CORPUS", c.intent_corpus);
    str("IOEV_BATTERY_MODEL", c.battery_model);
    str("IOEV_IDS_MODEL", c.ids_model);
    str("IOEV_IDS_BACKGROUND", c.ids_background);
    str("IOEV_PRICE_MODEL", c.price_model);
    str("IOEV_PRICE_HISTORY", c.price_history);
    str("IOEV_DOCS_DIR", c.docs_dir);
    str("IOEV_STATIONS", c.stations_file);
    str("IOEV_LLM_BASE_URL", c.llm_base_url);
    str("IOEV_LLM_MODEL", c.llm_model);
    str("IOEV_TLS_CERT", c.tls.cert_file);
    str("IOEV_TLS_KEY", c.tls.key_file);
    str("IOEV_TLS_CLIENT_CA", c.tls.client_ca_file);
    if (auto v = env("IOEV_TLS_CLIENT_AUTH")) c.tls.client_auth = to_bool("IOEV_TLS_CLIENT_AUTH", *v);
}

GatewayConfig load_config(const std::string& path, const EnvLookup& env) {
    GatewayConfig c;
    if (!path.empty()) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, "config '" + path + "': " + e.what());
        }
        c = GatewayConfig::from_json(j);
    }
    apply_env(c, env);
    c.validate();
    return c;
}

}  // namespace ioev::gateway
