#include "ioev/gateway/server.hpp"

#include <atomic>
#include <condition_variable>
#include <thread>

#include "ioev/core/text.hpp"
#include "ioev/support/pipeline.hpp"

// after Eigen: OpenSSL headers define macros that clash with its internals
#include <httplib.h>

namespace ioev::gateway {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnknownSession:
        case ErrorCode::UnknownAlert:
        case ErrorCode::UnknownRound: return 404;
        case ErrorCode::SessionExpired: return 410;
        case ErrorCode::UnresolvableSlot:
        case ErrorCode::NoCatalogMatch:
        case ErrorCode::Infeasible:
        case ErrorCode::PayloadSchemaMismatch: return 422;
        case ErrorCode::BackendUnavailable:
        case ErrorCode::ModelNotLoaded:
        case ErrorCode::RemoteUnavailable: return 503;
        case ErrorCode::NoSolverRegistered:
        case ErrorCode::IoError: return 500;
        default: return 400;
    }
}

nlohmann::json error_body(const Error& e) {
    nlohmann::json j = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
    if (const auto* pe = dynamic_cast<const support::PipelineError*>(&e)) j["stage"] = support::to_string(pe->stage());
    return j;
}

battery::TelemetryWindow telemetry_from_json(const nlohmann::json& j) {
    try {
        std::string vehicle = j.value("vehicle_id", "");
        long start = j.value("window_start_index", 0L);
        if (j.contains("flat"))
            return battery::TelemetryWindow::from_flat(j.at("flat").get<std::vector<double>>(), vehicle, start);
        std::vector<battery::Frame> frames;
        for (const auto& f : j.at("frames")) {
            frames.push_back({f.at("v_mean").get<double>(), f.at("v_min").get<double>(), f.at("v_max").get<double>(),
                              f.at("current").get<double>(), f.at("temperature").get<double>(),
                              f.at("soc").get<double>()});
        }
        return battery::TelemetryWindow(std::move(frames), vehicle, start);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaViolation, std::string("telemetry: ") + e.what());
    }
}

nlohmann::json telemetry_to_json(const battery::TelemetryWindow& w) {
    return {{"vehicle_id", w.vehicle_id()}, {"window_start_index", w.window_start_index()}, {"flat", w.flatten()}};
}

std::vector<ids::FlowRecord> flows_from_json(const nlohmann::json& j) {
    std::vector<ids::FlowRecord> out;
    try {
        auto columns = j.value("columns", std::vector<std::string>{});
        if (j.contains("rows")) {
            for (const auto& r : j.at("rows")) out.push_back({columns, r.get<std::vector<double>>(), std::nullopt});
        } else {
            for (const auto& f : j.at("flows")) {
                auto names = f.contains("names") ? f.at("names").get<std::vector<std::string>>() : columns;
                out.push_back({std::move(names), f.at("values").get<std::vector<double>>(), std::nullopt});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::SchemaMismatch, std::string("flow batch: ") + e.what());
    }
    return out;
}

nlohmann::json flow_to_json(const ids::FlowRecord& f) { return {{"names", f.names}, {"values", f.values}}; }

namespace {

nlohmann::json parse_body(const httplib::Request& req) {
    try {
        return req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("request body is not JSON: ") + e.what());
    }
}

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

// Runs a handler, mapping library errors to JSON error responses.
httplib::Server::Handler guarded(std::function<void(const httplib::Request&, httplib::Response&)> fn) {
    return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_json(res, error_body(e), http_status(e.code()));
        } catch (const std::exception& e) {
            send_json(res, {{"error", "Internal"}, {"message", e.what()}}, 500);
        }
    };
}

std::string body_session(const nlohmann::json& body) {
    require(body.contains("session_id") && body.at("session_id").is_string(), ErrorCode::SchemaViolation,
            "session_id is required");
    return body.at("session_id").get<std::string>();
}

ssa::Audience body_audience(const nlohmann::json& body) {
    return body.contains("audience") ? ssa::parse_audience(body.at("audience").get<std::string>())
                                     : ssa::Audience::driver;
}

bool wants_binary(const httplib::Request& req) {
    return contains(req.get_header_value("Accept"), "application/octet-stream");
}

void register_routes(httplib::Server& srv, const std::shared_ptr<GatewayService>& svc) {
    srv.Get("/v1/health", guarded([](const httplib::Request&, httplib::Response& res) {
                send_json(res, {{"status", "ok"}});
            }));

    srv.Post("/v1/sessions", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                 auto s = svc->create_session(SessionRequest::from_json(parse_body(req)));
                 send_json(res, svc->session_view(s.session_id), 201);
             }));
    srv.Get(R"(/v1/sessions/([0-9a-f]+))", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, svc->session_view(req.matches[1]));
            }));
    srv.Post(R"(/v1/sessions/([0-9a-f]+))", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                 svc->update_session(req.matches[1], SessionRequest::from_json(parse_body(req)));
                 send_json(res, svc->session_view(req.matches[1]));
             }));
    srv.Get(R"(/v1/sessions/([0-9a-f]+)/trace)", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, svc->trace(req.matches[1]));
            }));

    srv.Post("/v1/query", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 QueryRequest q;
                 q.session_id = body_session(body);
                 require(body.contains("text") && body.at("text").is_string(), ErrorCode::SchemaViolation,
                         "text is required");
                 q.text = body.at("text").get<std::string>();
                 q.audience = body_audience(body);
                 if (body.contains("payload")) {
                     const auto& p = body.at("payload");
                     if (p.contains("telemetry")) q.payload = telemetry_from_json(p.at("telemetry"));
                     else if (p.contains("flow")) q.payload = flows_from_json({{"flows", {p.at("flow")}}}).front();
                 }
                 send_json(res, svc->handle_query(q).to_json());
             }));

    srv.Post("/v1/telemetry/battery", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 auto resp = svc->battery_telemetry(body_session(body), telemetry_from_json(body), body_audience(body));
                 send_json(res, resp.to_json());
             }));

    srv.Post("/v1/flows", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 require(body.contains("station_id"), ErrorCode::SchemaMismatch, "station_id is required");
                 auto created = svc->ingest_flows(body.at("station_id").get<std::string>(), flows_from_json(body));
                 nlohmann::json arr = nlohmann::json::array();
                 for (const auto& a : created) arr.push_back(a.to_json());
                 send_json(res, {{"alerts", arr}});
             }));
    srv.Get("/v1/alerts", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                std::optional<AlertStatus> status;
                if (req.has_param("status")) status = parse_alert_status(req.get_param_value("status"));
                nlohmann::json arr = nlohmann::json::array();
                for (const auto& a : svc->alerts(status)) arr.push_back(a.to_json());
                send_json(res, {{"alerts", arr}});
            }));
    srv.Get(R"(/v1/alerts/([0-9a-f]+))", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                send_json(res, svc->alert(req.matches[1]).to_json());
            }));
    srv.Post(R"(/v1/alerts/([0-9a-f]+)/ack)", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, svc->acknowledge(req.matches[1]).to_json());
             }));

    srv.Post("/v1/fl/update", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                 fl::ModelUpdate u;
                 if (req.get_header_value("Content-Type") == "application/octet-stream") {
                     u = fl::decode_update(req.body);
                 } else {
                     auto body = parse_body(req);
                     try {
                         u.weight_delta = body.at("weight_delta").get<std::vector<double>>();
                         u.num_samples = body.value("num_samples", uint64_t{1});
                         u.client_id = body.value("client_id", "");
                         u.round = body.value("round", 0);
                     } catch (const nlohmann::json::exception& e) {
                         fail(ErrorCode::SchemaViolation, std::string("model update: ") + e.what());
                     }
                 }
                 auto r = svc->fl_submit(u);
                 send_json(res, {{"round", r.round}, {"aggregated", r.aggregated}, {"status", svc->fl_status()}}, 202);
             }));
    srv.Post("/v1/fl/aggregate", guarded([svc](const httplib::Request&, httplib::Response& res) {
                 send_json(res, {{"round", svc->fl_aggregate()}});
             }));
    srv.Get("/v1/fl/model", guarded([svc](const httplib::Request& req, httplib::Response& res) {
                std::optional<int> round;
                if (req.has_param("round")) {
                    try {
                        round = std::stoi(req.get_param_value("round"));
                    } catch (const std::exception&) {
                        fail(ErrorCode::InvalidArgument, "round must be an integer");
                    }
                }
                auto [r, w] = svc->fl_fetch(round);
                if (wants_binary(req)) {
                    res.set_content(fl::encode_weights(r, w), "application/octet-stream");
                    return;
                }
                send_json(res, {{"schema", kModelSchema}, {"round", r}, {"weights", w}});
            }));
}

}  // namespace

struct GatewayServer::Impl {
    std::shared_ptr<GatewayService> service;
    std::unique_ptr<httplib::Server> server;
    std::thread listener;
    std::thread purger;
    std::mutex mu;
    std::condition_variable cv;
    bool stopping = false;
    std::atomic<bool> running{false};
};

GatewayServer::GatewayServer(std::shared_ptr<GatewayService> service) : impl_(std::make_unique<Impl>()) {
    require(service != nullptr, ErrorCode::InvalidArgument, "gateway server needs a service");
    impl_->service = std::move(service);
}

GatewayServer::~GatewayServer() { stop(); }

int GatewayServer::start(const std::string& host, int port) {
    require(!impl_->running, ErrorCode::InvalidArgument, "server already running");
    const auto& tls = impl_->service->config().tls;
    if (tls.enabled()) {
        auto ssl = std::make_unique<httplib::SSLServer>(
            tls.cert_file.c_str(), tls.key_file.c_str(), tls.client_auth ? tls.client_ca_file.c_str() : nullptr);
        require(ssl->is_valid(), ErrorCode::IoError, "TLS setup failed: check certificate, key and client CA paths");
        impl_->server = std::move(ssl);
    } else {
        impl_->server = std::make_unique<httplib::Server>();
    }
    register_routes(*impl_->server, impl_->service);

    int bound = port == 0 ? impl_->server->bind_to_any_port(host) : (impl_->server->bind_to_port(host, port) ? port : -1);
    require(bound > 0, ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
    impl_->stopping = false;
    impl_->running = true;
    impl_->listener = std::thread([this] { impl_->server->listen_after_bind(); });

    double interval = impl_->service->config().retention.purge_interval_seconds;
    impl_->purger = std::thread([this, interval] {
        std::unique_lock lock(impl_->mu);
        while (!impl_->stopping) {
            impl_->cv.wait_for(lock, std::chrono::duration<double>(interval), [this] { return impl_->stopping; });
            if (impl_->stopping) break;
            lock.unlock();
            try {
                impl_->service->purge_expired();
            } catch (const std::exception&) {
                // a failed purge is retried on the next tick
            }
            lock.lock();
        }
    });
    impl_->server->wait_until_ready();
    return bound;
}

void GatewayServer::stop() {
    if (!impl_->running.exchange(false)) return;
    {
        std::lock_guard lock(impl_->mu);
        impl_->stopping = true;
    }
    impl_->cv.notify_all();
    impl_->server->stop();
    if (impl_->listener.joinable()) impl_->listener.join();
    if (impl_->purger.joinable()) impl_->purger.join();
}

}  // namespace ioev::gateway
