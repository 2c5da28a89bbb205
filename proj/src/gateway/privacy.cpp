#include "ioev/gateway/privacy.hpp"

#include <algorithm>
#include <cmath>

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev::gateway {

std::string pseudonymize(const std::string& identifier, const std::string& salt) {
    require(!identifier.empty(), ErrorCode::InvalidArgument, "identifier is empty");
    require(!salt.empty(), ErrorCode::InvalidArgument, "salt is empty");
    unsigned char mac[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!HMAC(EVP_sha256(), salt.data(), static_cast<int>(salt.size()),
              reinterpret_cast<const unsigned char*>(identifier.data()), identifier.size(), mac, &len))
        fail(ErrorCode::BackendUnavailable, "HMAC-SHA256 failed");
    return to_hex(std::string(reinterpret_cast<const char*>(mac), len));
}

std::string random_hex(size_t n) {
    std::string buf(n, '\0');
    if (RAND_bytes(reinterpret_cast<unsigned char*>(buf.data()), static_cast<int>(n)) != 1)
        fail(ErrorCode::BackendUnavailable, "random generator unavailable");
    return to_hex(buf);
}

void RetentionPolicy::validate() const {
    require(std::isfinite(default_ttl_seconds) && default_ttl_seconds > 0.0, ErrorCode::InvalidArgument,
            "session ttl must be positive");
    require(purge_interval_seconds > 0.0 && purge_interval_seconds <= default_ttl_seconds, ErrorCode::InvalidArgument,
            "purge interval must be positive and no longer than the session ttl");
}

bool RetentionPolicy::exempt(const std::string& field) const {
    return std::find(consent_exempt.begin(), consent_exempt.end(), field) != consent_exempt.end();
}

nlohmann::json RetentionPolicy::to_json() const {
    return {{"default_ttl_seconds", default_ttl_seconds},
            {"purge_interval_seconds", purge_interval_seconds},
            {"consent_exempt", consent_exempt}};
}

}  // namespace ioev::gateway
