#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/core/csv.hpp"

namespace ioev::ids {

inline constexpr int kNumClasses = 3;

enum class AttackClass { benign = 0, recon = 1, dos = 2 };
std::string to_string(AttackClass c);
// Accepts 0/1/2, the enum names, and capture-style labels such as
// "Benign", "Recon-PortScan", "DoS-SYN-Flood", "DDoS".
AttackClass parse_attack_label(const std::string& label);

// One flow's features in a fixed column order.
struct FlowRecord {
    std::vector<std::string> names;
    std::vector<double> values;
    std::optional<AttackClass> label;
};

// Numeric feature table; labels[i] is set when the source had a label column.
struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;

    size_t size() const { return rows.size(); }
    FlowRecord record(size_t i) const;
    CsvTable to_csv(const std::string& label_column = "label") const;
};

enum class ScalerKind { zscore, minmax, none };
std::string to_string(ScalerKind s);
ScalerKind parse_scaler(const std::string& s);

// Glob patterns (*, ?) matched case-insensitively against whole column names.
const std::vector<std::string>& default_blocklist();

struct PreprocessConfig {
    std::vector<std::string> blocklist_patterns = default_blocklist();
    double corr_threshold = 0.95;
    ScalerKind scaler = ScalerKind::zscore;
    std::string label_column = "label";

    void validate() const;
};

struct DroppedColumn {
    std::string name;
    std::string reason;  // blocklist | non_numeric | constant | correlated:<kept column>
};

// Column selection learned from a training table. Applying it to another
// table picks the same columns in the same order.
struct FittedPreprocessor {
    std::vector<std::string> columns;
    ScalerKind scaler = ScalerKind::zscore;
    std::string label_column = "label";

    // Hex digest of the newline-joined column list.
    std::string fingerprint() const;
    // Throws SchemaMismatch if a retained column is absent or non-numeric.
    FeatureTable apply(const CsvTable& raw) const;

    nlohmann::json to_json() const;
    static FittedPreprocessor from_json(const nlohmann::json& j);
};

struct PreparedFlows {
    FeatureTable table;  // retained columns, unscaled
    FittedPreprocessor preprocessor;
    std::vector<DroppedColumn> dropped;
};

// Order of filters: blocklist, non-numeric (any cell not a finite number),
// constant, then pairwise |Pearson r| >= threshold dropping the later column
// of every such pair. Throws AllColumnsDropped when nothing survives.
PreparedFlows preprocess_flows(const CsvTable& raw, const PreprocessConfig& cfg = {});

bool glob_match(const std::string& pattern, const std::string& text);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Renames columns according to {"exporter_name": "canonical_name"}.
CsvTable apply_column_mapping(const CsvTable& raw, const nlohmann::json& mapping);

// Stratified split; returns (train, test).
std::pair<FeatureTable, FeatureTable> split_table(const FeatureTable& t, double test_fraction, uint64_t seed);

}  // namespace ioev::ids
