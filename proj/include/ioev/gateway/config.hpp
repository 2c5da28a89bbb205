#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "ioev/gateway/privacy.hpp"

namespace ioev::gateway {

// Deploy-time TLS settings; the server uses OpenSSL through httplib.
struct TlsConfig {
    std::string cert_file;
    std::string key_file;
    std::string client_ca_file;  // required when client_auth is on
    bool client_auth = false;

    bool enabled() const { return !cert_file.empty(); }
};

struct GatewayConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    RetentionPolicy retention;
    std::string store_path;  // empty keeps state in memory
    // Artifacts. The corpus and docs are required; an empty model path falls
    // back to a small synthetic model trained at startup.
    std::string intent_corpus;
    std::string battery_model;
    std::string ids_model;
    std::string ids_background;  // labelled flow CSV for attribution baselines
    std::string price_model;
    std::string price_history;  // station CSV whose latest prices seed the forecaster
    std::string docs_dir;
    std::string stations_file;  // JSON array of station options
    // Optional remote chat backend for explanations and skeleton extraction.
    std::string llm_base_url;
    std::string llm_model;
    std::string llm_token_env = "IOEV_LLM_TOKEN";
    int horizon_start_hour = 18;
    // Federated rounds aggregate once this many updates arrived.
    size_t fl_min_clients = 1;
    double fl_clip_norm = 1.0;
    double fl_noise_sigma = 0.0;
    uint64_t seed = 0;
    TlsConfig tls;

    void validate() const;
    nlohmann::json to_json() const;
    // Missing keys keep their defaults; unknown keys are rejected (ParseError).
    static GatewayConfig from_json(const nlohmann::json& j);
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;
EnvLookup process_env();

// IOEV_HOST, IOEV_PORT, IOEV_SESSION_TTL, IOEV_PURGE_INTERVAL, IOEV_STORE,
// IOEV_INTENT_CORPUS, IOEV_BATTERY_MODEL, IOEV_IDS_MODEL, IOEV_IDS_BACKGROUND,
// IOEV_PRICE_MODEL, IOEV_PRICE_HISTORY, IOEV_DOCS_DIR, IOEV_STATIONS, IOEV_LLM_BASE_URL, IOEV_LLM_MODEL, IOEV_TLS_CERT, IOEV_TLS_KEY,
// IOEV_TLS_CLIENT_CA, IOEV_TLS_CLIENT_AUTH override the file.
void apply_env(GatewayConfig& cfg, const EnvLookup& env);

// File (optional, JSON) then environment, then validation.
GatewayConfig load_config(const std::string& path, const EnvLookup& env = process_env());

}  // namespace ioev::gateway
