#pragma once

#include "ioev/gateway/config.hpp"
#include "ioev/gateway/service.hpp"

namespace ioev::gateway {

// Loads the configured artifacts into service dependencies. Empty model paths
// fall back to small models trained on synthetic data with cfg.seed; attribution
// backgrounds come from synthetic data unless ids_background names a CSV.
GatewayDeps build_deps(const GatewayConfig& cfg);

// Day-ahead tariff from the synthetic price generator, starting at the given clock hour.
support::SeriesProvider synthetic_tariff(int start_hour, uint64_t seed);

std::vector<support::StationCandidate> load_stations(const std::string& path);

}  // namespace ioev::gateway
