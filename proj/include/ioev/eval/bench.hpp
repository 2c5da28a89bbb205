#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace ioev::eval {

inline constexpr const char* kBenchSchema = "ioev.bench/1";
inline constexpr size_t kLatencySamples = 1000;  // warm inferences per latency figure

enum class Suite { battery, ids, forecast, intent, solver };
std::string to_string(Suite s);
Suite parse_suite(const std::string& s);

struct BenchOptions {
    Suite suite = Suite::battery;
    uint64_t seed = 0;
    // Optional real dataset: charging CSV (battery), flow CSV (ids), station
    // CSV (forecast) or labelled JSON-lines corpus (intent). Rows that need it
    // are skipped with a notice when it is empty or missing.
    std::string dataset_path;
    bool quick = false;  // smaller synthetic sets and models
};

// Published result a real-data row is compared against.
struct Reference {
    std::string metric;
    double value = 0.0;
    double tolerance = 0.0;
    bool relative = false;  // tolerance as a fraction of value instead of absolute
    std::optional<bool> within;

    nlohmann::json to_json() const;
};

struct BenchRow {
    std::string model;
    std::string dataset;
    bool skipped = false;
    std::string notice;
    std::vector<std::pair<std::string, double>> metrics;  // in column order
    std::optional<double> inference_ms;                   // mean per sample
    std::optional<size_t> model_bytes;                    // serialized size
    std::vector<Reference> references;

    std::optional<double> metric(const std::string& name) const;
    // Latency excluded when with_latency is false, for determinism checks.
    nlohmann::json to_json(bool with_latency = true) const;
};

struct BenchReport {
    Suite suite = Suite::battery;
    uint64_t seed = 0;
    std::vector<BenchRow> rows;

    nlohmann::json to_json(bool with_latency = true) const;
    // Metrics as rows and models as columns, one table per dataset.
    std::string to_markdown() const;
};

BenchReport run_benchmark(const BenchOptions& opts);

// Mean milliseconds per call of fn(i) over kLatencySamples calls after a warm-up.
template <typename Fn>
double mean_latency_ms(Fn&& fn) {
    for (size_t i = 0; i < 20; ++i) fn(i);
    auto t0 = std::chrono::steady_clock::now();
    for (size_t i = 0; i < kLatencySamples; ++i) fn(i);
    std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
    return dt.count() / static_cast<double>(kLatencySamples);
}

}  // namespace ioev::eval
