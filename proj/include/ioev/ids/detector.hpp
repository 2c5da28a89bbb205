#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/eval/metrics.hpp"
#include "ioev/ids/flows.hpp"
#include "ioev/nn/param.hpp"

namespace ioev::ids {

using Probabilities = std::array<double, kNumClasses>;

// Per-feature affine map fitted on training rows: x' = (x - offset) / scale.
struct ScalerStats {
    ScalerKind kind = ScalerKind::none;
    std::vector<double> offset;
    std::vector<double> scale;

    static ScalerStats fit(ScalerKind kind, const std::vector<std::vector<double>>& rows, size_t dim);
    // Rows become columns of the result: (features × n).
    nn::Matrix transform(const std::vector<std::vector<double>>& rows) const;
    nlohmann::json to_json() const;
    static ScalerStats from_json(const nlohmann::json& j);
};

// Anything that maps scaled feature columns (features × n) to class
// probabilities (3 × n).
class ClassifierBackend {
public:
    virtual ~ClassifierBackend() = default;
    virtual std::string kind() const = 0;
    virtual nn::Matrix predict_proba(const nn::Matrix& x) const = 0;
    virtual std::string serialize() const = 0;
};

struct GbdtParams {
    int estimators = 500;
    int max_depth = 5;
    double learning_rate = 0.07;
    double subsample = 0.65;
    double colsample = 0.67;
    double min_child_weight = 9.0;
    double lambda = 1.0;
    int max_bins = 64;
};

// Multi-class boosted trees on the softmax loss. Implementations are
// interchangeable through this interface.
class GradientBoostedTrees : public ClassifierBackend {
public:
    virtual void fit(const nn::Matrix& x, const std::vector<int>& labels, const std::vector<double>& weights,
                     const GbdtParams& params, uint64_t seed) = 0;
};

// Second-order boosting with quantile-binned split search.
std::unique_ptr<GradientBoostedTrees> make_histogram_gbdt();

enum class DetectorArch { mlp, lstm, gbdt };
std::string to_string(DetectorArch a);
DetectorArch parse_detector_arch(const std::string& s);

struct NeuralTrainParams {
    int epochs = 30;
    int batch_size = 64;
    double learning_rate = 1e-3;
};

struct DetectorConfig {
    DetectorArch arch = DetectorArch::gbdt;
    std::vector<int> mlp_hidden = {16, 128, 64};  // output layer of 3 appended
    std::vector<int> lstm_units = {100, 50};      // dense output of 3 appended
    GbdtParams gbdt;
    NeuralTrainParams neural;
    bool class_weights = true;  // inverse-frequency sample weights
    std::function<std::unique_ptr<GradientBoostedTrees>()> gbdt_factory = make_histogram_gbdt;

    nlohmann::json to_json() const;
};

struct AttackPrediction {
    AttackClass label = AttackClass::benign;
    Probabilities probabilities{};
};

// Lowest index wins ties.
AttackPrediction prediction_from(const Probabilities& p);

class Detector {
public:
    Detector(FittedPreprocessor preprocessor, ScalerStats scaler, std::shared_ptr<const ClassifierBackend> backend);

    const std::vector<std::string>& feature_names() const { return pre_.columns; }
    std::string fingerprint() const { return pre_.fingerprint(); }
    const FittedPreprocessor& preprocessor() const { return pre_; }
    std::string kind() const { return backend_->kind(); }

    // The record's names must equal feature_names() exactly; throws SchemaMismatch otherwise.
    AttackPrediction infer(const FlowRecord& f) const;
    // Unscaled rows in feature_names() order.
    std::vector<Probabilities> predict_proba_rows(const std::vector<std::vector<double>>& rows) const;
    std::vector<int> predict(const FeatureTable& t) const;

    std::string serialize() const;
    static Detector deserialize(const std::string& bytes);
    void save(const std::string& path) const;
    static Detector load(const std::string& path);

private:
    FittedPreprocessor pre_;
    ScalerStats scaler_;
    std::shared_ptr<const ClassifierBackend> backend_;
};

// Throws ClassMissing unless at least two classes are present, SchemaMismatch
// if the table columns differ from the preprocessor's.
Detector train_detector(const FeatureTable& train, const FittedPreprocessor& pre, const DetectorConfig& cfg,
                        uint64_t seed);

std::vector<double> inverse_frequency_weights(const std::vector<int>& labels, int num_classes);

struct DetectorEvaluation {
    eval::ConfusionCounts counts{kNumClasses};
    eval::ClassificationMetrics macro;
};

DetectorEvaluation evaluate_detector(const Detector& det, const FeatureTable& test);

}  // namespace ioev::ids
