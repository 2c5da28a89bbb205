#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ioev::eval {

// Square matrix of counts indexed by (true class, predicted class).
class ConfusionCounts {
public:
    explicit ConfusionCounts(int num_classes);

    void add(int truth, int predicted, uint64_t count = 1);
    uint64_t at(int truth, int predicted) const;
    int num_classes() const { return k_; }
    uint64_t total() const;

    // Binary view for one class treated as positive.
    uint64_t tp(int positive) const;
    uint64_t fp(int positive) const;
    uint64_t fn(int positive) const;
    uint64_t tn(int positive) const;

    nlohmann::json to_json() const;

private:
    int k_;
    std::vector<uint64_t> cells_;
};

ConfusionCounts confusion_from(std::span<const int> truth, std::span<const int> predicted, int num_classes);

struct ClassificationMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // Zero-denominator cases resolved by convention (value 0), e.g. "precision[class=1]".
    std::vector<std::string> flags;
};

// positive_class set: binary metrics for that class. Otherwise macro-averaged over classes.
// Conventions: precision = 0 when TP+FP = 0, recall = 0 when TP+FN = 0, F1 = 0 when P+R = 0.
ClassificationMetrics classification_metrics(const ConfusionCounts& cc, std::optional<int> positive_class);

struct RegressionErrors {
    double mae = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
    size_t n = 0;
};

RegressionErrors regression_metrics(std::span<const double> truth, std::span<const double> predicted);

}  // namespace ioev::eval
