#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/eval/metrics.hpp"

namespace ioev::intent {

enum class IntentLabel : int { user_support = 0, evcs_security = 1, battery_diagnostics = 2 };
inline constexpr int kNumIntents = 3;

enum class QuerySource { driver, operator_role, system_event };
enum class BackendKind { baseline, transformer };

std::string to_string(IntentLabel label);
std::string to_string(QuerySource source);
QuerySource parse_source(const std::string& s);

// Validated incoming query. System events may carry a pre-assigned label,
// in which case classification is bypassed.
class QueryText {
public:
    static constexpr size_t kMaxChars = 4096;

    QueryText(std::string text, QuerySource source = QuerySource::driver, std::string session_id = {},
              std::optional<IntentLabel> preset = std::nullopt);

    const std::string& text() const { return text_; }
    QuerySource source() const { return source_; }
    const std::string& session_id() const { return session_id_; }
    const std::optional<IntentLabel>& preset_label() const { return preset_; }

private:
    std::string text_;
    QuerySource source_;
    std::string session_id_;
    std::optional<IntentLabel> preset_;
};

struct IntentResult {
    IntentLabel label = IntentLabel::user_support;
    double confidence = 0.0;
    BackendKind backend = BackendKind::baseline;
    bool bypassed = false;  // label taken from system-event metadata
};

struct LabeledQuery {
    std::string text;
    IntentLabel label;
};
using LabeledQueryCorpus = std::vector<LabeledQuery>;

// JSON-lines, one {"text": ..., "label": 0|1|2} per line.
LabeledQueryCorpus load_corpus(const std::string& path);
LabeledQueryCorpus parse_corpus(const std::string& jsonl);

// Stratified split: test_per_class queries of each label go to the test side.
std::pair<LabeledQueryCorpus, LabeledQueryCorpus> split_corpus(const LabeledQueryCorpus& corpus, size_t test_per_class,
                                                               uint64_t seed);

// Lower-cased alphanumeric tokens grouped into segments; sentence punctuation
// ends a segment so bigrams never span it.
std::vector<std::vector<std::string>> tokenize(const std::string& text);
// Unigram ("u:tok") and within-segment bigram ("b:a_b") counts.
std::map<std::string, double> ngram_features(const std::string& text);

// Softmax-linear classifier over n-gram counts.
class BaselineModel {
public:
    struct TrainOptions {
        int iterations = 400;
        double learning_rate = 0.5;
        double l2 = 1e-3;
    };

    static BaselineModel train(const LabeledQueryCorpus& corpus, uint64_t seed, TrainOptions opts);
    static BaselineModel train(const LabeledQueryCorpus& corpus, uint64_t seed) { return train(corpus, seed, {}); }

    std::array<double, kNumIntents> logits(const std::string& text) const;
    std::array<double, kNumIntents> probabilities(const std::string& text) const;
    IntentResult classify(const QueryText& q) const;

    // Per-class weight of a single feature; zero for unknown features.
    double weight(const std::string& feature, IntentLabel label) const;

    nlohmann::json to_json() const;
    static BaselineModel from_json(const nlohmann::json& j);

    uint64_t seed() const { return seed_; }

private:
    std::map<std::string, size_t> vocab_;
    std::vector<std::array<double, kNumIntents>> weights_;
    std::array<double, kNumIntents> bias_{};
    uint64_t seed_ = 0;
};

// Remote transformer classifier: POST {base_url}/classify {"text": ...}
// answering {"scores": [s0, s1, s2]}.
struct TransformerEndpoint {
    std::string base_url;
    int timeout_seconds = 5;
};

class IntentGate {
public:
    explicit IntentGate(BaselineModel baseline, std::optional<TransformerEndpoint> transformer = std::nullopt);

    IntentResult classify(const QueryText& q, BackendKind backend = BackendKind::baseline) const;
    const BaselineModel& baseline() const { return baseline_; }

private:
    IntentResult classify_remote(const QueryText& q) const;

    BaselineModel baseline_;
    std::optional<TransformerEndpoint> transformer_;
};

// Scores from a backend normalized to a distribution; argmax with ties going to the lowest label.
IntentResult result_from_scores(const std::array<double, kNumIntents>& scores, BackendKind backend);

eval::ConfusionCounts evaluate_intents(const BaselineModel& model, const LabeledQueryCorpus& corpus);

}  // namespace ioev::intent
