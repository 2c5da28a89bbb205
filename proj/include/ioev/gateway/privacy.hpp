#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ioev::gateway {

// HMAC-SHA256 of the identifier keyed by the salt, hex encoded. Throws
// InvalidArgument on an empty identifier or salt.
std::string pseudonymize(const std::string& identifier, const std::string& salt);

// Hex string of n bytes from the OpenSSL CSPRNG.
std::string random_hex(size_t n);

struct RetentionPolicy {
    double default_ttl_seconds = 1800.0;
    double purge_interval_seconds = 60.0;
    // Scoped fields that survive expiry when the session consented to them.
    // Anything else is always discarded.
    std::vector<std::string> consent_exempt = {"vehicle_profile", "raw_inputs"};

    // Throws InvalidArgument unless 0 < purge_interval <= default_ttl.
    void validate() const;
    bool exempt(const std::string& field) const;
    nlohmann::json to_json() const;
};

}  // namespace ioev::gateway
