#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/battery/telemetry.hpp"
#include "ioev/core/error.hpp"
#include "ioev/gateway/service.hpp"
#include "ioev/ids/flows.hpp"

namespace ioev::gateway {

// HTTP status for an error code.
int http_status(ErrorCode code);
// {"error": code, "message": ..., "stage": PSA|CA|SA when a pipeline stage failed}
nlohmann::json error_body(const Error& e);

// {"vehicle_id", "frames": [{v_mean, v_min, v_max, current, temperature, soc}]} or {"vehicle_id", "flat": [...]}
battery::TelemetryWindow telemetry_from_json(const nlohmann::json& j);
nlohmann::json telemetry_to_json(const battery::TelemetryWindow& w);
// {"columns": [...], "rows": [[...]]} or {"flows": [{"names"?, "values"}]}; names default to columns.
std::vector<ids::FlowRecord> flows_from_json(const nlohmann::json& j);
nlohmann::json flow_to_json(const ids::FlowRecord& f);

// HTTP+JSON front end over a GatewayService, with a periodic purge task.
class GatewayServer {
public:
    explicit GatewayServer(std::shared_ptr<GatewayService> service);
    ~GatewayServer();
    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    // Binds (port 0 picks a free port) and serves on background threads.
    // Returns the bound port; IoError when binding or TLS setup fails.
    int start(const std::string& host, int port);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ioev::gateway
