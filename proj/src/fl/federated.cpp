#include "ioev/fl/federated.hpp"

#include <cmath>
#include <future>
#include <random>
#include <thread>

#include "ioev/core/bytes.hpp"
#include "ioev/core/error.hpp"

namespace ioev::fl {

void ModelUpdate::validate() const {
    require(num_samples >= 1, ErrorCode::InvalidArgument, "update must cover at least one sample");
    for (double v : weight_delta) require(std::isfinite(v), ErrorCode::InvalidArgument, "update has non-finite entries");
}

void DPConfig::validate() const {
    require(clip_norm > 0.0, ErrorCode::InvalidArgument, "clip_norm must be positive");
    require(noise_sigma >= 0.0 && std::isfinite(noise_sigma), ErrorCode::InvalidArgument,
            "noise_sigma must be a non-negative number");
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

ModelUpdate clip_update(const ModelUpdate& update, double clip_norm) {
    require(clip_norm > 0.0, ErrorCode::InvalidArgument, "clip_norm must be positive");
    ModelUpdate out = update;
    double norm = l2_norm(update.weight_delta);
    if (norm > clip_norm) {
        double scale = clip_norm / norm;
        for (double& v : out.weight_delta) v *= scale;
    }
    return out;
}

std::vector<double> aggregate(const RoundState& round, const DPConfig& dp) {
    dp.validate();
    require(!round.received.empty(), ErrorCode::EmptyRound, "no updates received for round " +
                                                                 std::to_string(round.round_index));
    const size_t dim = round.global_weights.size();
    double total_samples = 0.0;
    for (const auto& u : round.received) {
        require(u.weight_delta.size() == dim, ErrorCode::DimensionMismatch,
                "update from " + u.client_id + " has dimension " + std::to_string(u.weight_delta.size()) +
                    ", global model has " + std::to_string(dim));
        u.validate();
        total_samples += static_cast<double>(u.num_samples);
    }
    std::vector<double> mean(dim, 0.0);
    for (const auto& u : round.received) {
        ModelUpdate c = clip_update(u, dp.clip_norm);
        const double w = static_cast<double>(u.num_samples) / total_samples;
        for (size_t i = 0; i < dim; ++i) mean[i] += w * c.weight_delta[i];
    }
    std::vector<double> out = round.global_weights;
    const double n_clients = static_cast<double>(round.received.size());
    std::mt19937_64 rng(dp.seed ^ (0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(round.round_index + 1)));
    std::normal_distribution<double> noise(0.0, dp.noise_sigma > 0.0 ? dp.noise_sigma : 1.0);
    for (size_t i = 0; i < dim; ++i) {
        out[i] += mean[i];
        if (dp.noise_sigma > 0.0) out[i] += noise(rng) / n_clients;
    }
    return out;
}

RoundState run_round(std::span<const std::shared_ptr<FederatedClient>> clients, const RoundState& state,
                     const DPConfig& dp, const RoundOptions& opts) {
    require(!clients.empty(), ErrorCode::EmptyRound, "round has no clients");
    RoundState next = state;
    next.received.clear();
    next.failures.clear();
    next.status = RoundStatus::open;

    auto validate_one = [&](const std::string& id, ModelUpdate u) {
        try {
            require(u.weight_delta.size() == state.global_weights.size(), ErrorCode::DimensionMismatch,
                    "dimension mismatch");
            u.validate();
            u.round = state.round_index;
            if (u.client_id.empty()) u.client_id = id;
            next.received.push_back(std::move(u));
        } catch (const std::exception& e) {
            next.failures.push_back({id, e.what()});
        }
    };

    if (!opts.concurrent) {
        for (const auto& c : clients) {
            try {
                validate_one(c->id(), c->train(state.global_weights, state.round_index));
            } catch (const std::exception& e) {
                next.failures.push_back({c->id(), e.what()});
            }
        }
    } else {
        // Each client trains on a detached thread that owns its inputs, so a
        // straggler past the deadline can be abandoned without blocking the round.
        auto global = std::make_shared<const std::vector<double>>(state.global_weights);
        std::vector<std::future<ModelUpdate>> futures;
        for (const auto& c : clients) {
            auto promise = std::make_shared<std::promise<ModelUpdate>>();
            futures.push_back(promise->get_future());
            std::thread([client = c, global, promise, round = state.round_index] {
                try {
                    promise->set_value(client->train(*global, round));
                } catch (...) {
                    promise->set_exception(std::current_exception());
                }
            }).detach();
        }
        const auto deadline = std::chrono::steady_clock::now() + opts.client_timeout;
        for (size_t i = 0; i < clients.size(); ++i) {
            const std::string id = clients[i]->id();
            if (futures[i].wait_until(deadline) != std::future_status::ready) {
                next.failures.push_back({id, "timeout"});
                continue;
            }
            try {
                validate_one(id, futures[i].get());
            } catch (const std::exception& e) {
                next.failures.push_back({id, e.what()});
            }
        }
    }

    require(!next.received.empty(), ErrorCode::EmptyRound, "every client failed in round " +
                                                               std::to_string(state.round_index));
    next.global_weights = aggregate(next, dp);
    next.status = RoundStatus::aggregated;
    next.round_index = state.round_index + 1;
    return next;
}

std::string encode_update(const ModelUpdate& update) {
    nlohmann::json header = {{"client_id", update.client_id}, {"round", update.round}, {"num_samples", update.num_samples}};
    ByteWriter w;
    w.str(header.dump());
    w.u64(update.weight_delta.size());
    w.f64s(update.weight_delta);
    return w.take();
}

ModelUpdate decode_update(const std::string& bytes) {
    ByteReader r(bytes);
    ModelUpdate u;
    try {
        auto header = nlohmann::json::parse(r.str());
        u.client_id = header.at("client_id").get<std::string>();
        u.round = header.at("round").get<int>();
        u.num_samples = header.at("num_samples").get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("bad update header: ") + e.what());
    }
    uint64_t n = r.u64();
    u.weight_delta = r.f64s(static_cast<size_t>(n));
    require(r.remaining() == 0, ErrorCode::ParseError, "trailing bytes after update payload");
    return u;
}

std::string encode_weights(int round, std::span<const double> weights) {
    nlohmann::json header = {{"round", round}, {"dim", weights.size()}};
    ByteWriter w;
    w.str(header.dump());
    w.u64(weights.size());
    w.f64s(weights);
    return w.take();
}

std::pair<int, std::vector<double>> decode_weights(const std::string& bytes) {
    ByteReader r(bytes);
    int round = 0;
    try {
        round = nlohmann::json::parse(r.str()).at("round").get<int>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("bad weights header: ") + e.what());
    }
    uint64_t n = r.u64();
    auto w = r.f64s(static_cast<size_t>(n));
    return {round, std::move(w)};
}

}  // namespace ioev::fl
