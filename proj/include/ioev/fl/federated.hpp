#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ioev::fl {

struct ModelUpdate {
    std::vector<double> weight_delta;
    uint64_t num_samples = 1;
    std::string client_id;
    int round = 0;

    // Throws InvalidArgument unless every entry is finite and num_samples >= 1.
    void validate() const;
};

struct DPConfig {
    double clip_norm = 1.0;    // may be +infinity to disable clipping
    double noise_sigma = 0.0;  // 0 disables noise
    uint64_t seed = 0;

    void validate() const;
};

enum class RoundStatus { open, aggregated };

struct ClientFailure {
    std::string client_id;
    std::string reason;
};

struct RoundState {
    int round_index = 0;
    std::vector<double> global_weights;
    std::vector<ModelUpdate> received;
    RoundStatus status = RoundStatus::open;
    std::vector<ClientFailure> failures;
};

double l2_norm(std::span<const double> v);

ModelUpdate clip_update(const ModelUpdate& update, double clip_norm);

// New global weights: global + sample-weighted mean of clipped deltas
// + N(0, sigma^2 I) / n_clients. Noise is drawn from a generator seeded by
// (dp.seed, round_index), so a fixed seed reproduces the result.
std::vector<double> aggregate(const RoundState& round, const DPConfig& dp);

class FederatedClient {
public:
    virtual ~FederatedClient() = default;
    virtual std::string id() const = 0;
    virtual ModelUpdate train(std::span<const double> global_weights, int round) = 0;
};

struct RoundOptions {
    std::chrono::milliseconds client_timeout{std::chrono::minutes(10)};
    bool concurrent = true;
};

// Runs one synchronous round: every client trains against state.global_weights,
// failed or late clients are recorded and skipped, survivors are aggregated.
// Returns the aggregated state with round_index incremented.
RoundState run_round(std::span<const std::shared_ptr<FederatedClient>> clients, const RoundState& state,
                     const DPConfig& dp, const RoundOptions& opts = {});

// Wire format: u32 header length | JSON header | u64 count | count × f64 (LE).
std::string encode_update(const ModelUpdate& update);
ModelUpdate decode_update(const std::string& bytes);
std::string encode_weights(int round, std::span<const double> weights);
std::pair<int, std::vector<double>> decode_weights(const std::string& bytes);

}  // namespace ioev::fl
