#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ioev::attribution {

using Row = std::vector<double>;
// Evaluates the explained scalar output on a batch of rows.
using BatchModelFn = std::function<std::vector<double>(const std::vector<Row>& rows)>;

struct BackgroundSet {
    std::vector<Row> rows;
};

enum class ShapleyMode { exact, sampled };

// A player in the attribution game: a set of input columns replaced together.
struct FeatureGroup {
    std::string name;
    std::vector<size_t> columns;
};

inline constexpr size_t kMaxExactFeatures = 12;

struct ShapleyOptions {
    ShapleyMode mode = ShapleyMode::exact;
    size_t budget = 0;  // permutations in sampled mode; 0 means 2 * players
    uint64_t seed = 0;
    std::vector<std::string> names;   // one per column; defaults to x0, x1, ...
    std::vector<FeatureGroup> groups;  // empty: every column is its own player
    size_t max_rows_per_call = 8192;
};

struct AttributionItem {
    std::string name;
    double value = 0.0;  // input snapshot (group mean for multi-column players)
    double phi = 0.0;
};

struct Attribution {
    double base_value = 0.0;
    double prediction = 0.0;
    std::vector<AttributionItem> items;
    std::optional<double> mc_error;  // largest per-player standard error, sampled mode only

    double sum_phi() const;
    // |base + sum(phi) - prediction|
    double efficiency_gap() const;
    nlohmann::json to_json() const;
    static Attribution from_json(const nlohmann::json& j);
};

// Interventional Shapley values: v(S) is the mean model output over background
// rows with the columns of players in S taken from x. Exact mode enumerates
// every coalition (at most 12 players); sampled mode averages marginal
// contributions over random permutations, which keeps efficiency exact.
Attribution shapley_attribution(const BatchModelFn& f, const Row& x, const BackgroundSet& bg,
                                const ShapleyOptions& opts = {});

struct WaterfallBar {
    std::string feature;
    double value = 0.0;
    double contribution = 0.0;
};

struct Waterfall {
    double base_value = 0.0;
    double prediction = 0.0;
    std::vector<WaterfallBar> bars;  // |contribution| descending
    double remainder = 0.0;          // prediction - base - sum(bars)

    nlohmann::json to_json() const;
};

Waterfall waterfall_data(const Attribution& attr, size_t top_k);

}  // namespace ioev::attribution
