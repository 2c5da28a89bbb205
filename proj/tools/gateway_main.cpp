#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "common.hpp"
#include "ioev/gateway/bootstrap.hpp"
#include "ioev/gateway/server.hpp"

using namespace ioev;

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Charging-operations gateway: HTTP+JSON front end over the analytics pipeline"};
    std::string config_path;
    bool print_config = false;
    app.add_option("--config", config_path, "JSON config file; IOEV_* environment variables override it");
    app.add_flag("--print-config", print_config, "Print the effective config and exit");
    CLI11_PARSE(app, argc, argv);

    return run_guarded([&] {
        auto cfg = gateway::load_config(config_path);
        if (print_config) {
            std::cout << cfg.to_json().dump(2) << '\n';
            return;
        }
        std::cerr << "loading models...\n";
        auto service = std::make_shared<gateway::GatewayService>(cfg, gateway::build_deps(cfg));
        gateway::GatewayServer server(service);
        int port = server.start(cfg.host, cfg.port);
        std::cerr << "listening on " << (cfg.tls.enabled() ? "https" : "http") << "://" << cfg.host << ':'
                  << port << '\n';
        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
        server.stop();
        std::cerr << "stopped\n";
    });
}
