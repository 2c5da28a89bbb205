#include "ioev/intent/intent.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <httplib.h>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev::intent {

std::string to_string(IntentLabel label) {
    switch (label) {
        case IntentLabel::user_support: return "user_support";
        case IntentLabel::evcs_security: return "evcs_security";
        case IntentLabel::battery_diagnostics: return "battery_diagnostics";
    }
    return "unknown";
}

std::string to_string(QuerySource source) {
    switch (source) {
        case QuerySource::driver: return "driver";
        case QuerySource::operator_role: return "operator";
        case QuerySource::system_event: return "system-event";
    }
    return "unknown";
}

QuerySource parse_source(const std::string& s) {
    if (s == "driver") return QuerySource::driver;
    if (s == "operator") return QuerySource::operator_role;
    if (s == "system-event") return QuerySource::system_event;
    fail(ErrorCode::InvalidArgument, "unknown query source '" + s + "'");
}

namespace {

size_t utf8_length(std::string_view s) {
    size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

IntentLabel label_from_int(int v) {
    require(v >= 0 && v < kNumIntents, ErrorCode::ParseError, "intent label out of range: " + std::to_string(v));
    return static_cast<IntentLabel>(v);
}

}  // namespace

QueryText::QueryText(std::string text, QuerySource source, std::string session_id, std::optional<IntentLabel> preset)
    : text_(std::move(text)), source_(source), session_id_(std::move(session_id)), preset_(preset) {
    if (trim(text_).empty()) fail(ErrorCode::EmptyQuery, "query text is empty");
    require(utf8_length(text_) <= kMaxChars, ErrorCode::InvalidArgument, "query exceeds 4096 characters");
}

LabeledQueryCorpus parse_corpus(const std::string& jsonl) {
    LabeledQueryCorpus out;
    std::istringstream in(jsonl);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::ParseError, "corpus line " + std::to_string(lineno) + ": " + e.what());
        }
        out.push_back({j.at("text").get<std::string>(), label_from_int(j.at("label").get<int>())});
    }
    return out;
}

LabeledQueryCorpus load_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

std::pair<LabeledQueryCorpus, LabeledQueryCorpus> split_corpus(const LabeledQueryCorpus& corpus, size_t test_per_class,
                                                               uint64_t seed) {
    std::mt19937_64 rng(seed);
    LabeledQueryCorpus train, test;
    for (int c = 0; c < kNumIntents; ++c) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < corpus.size(); ++i)
            if (static_cast<int>(corpus[i].label) == c) idx.push_back(i);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (size_t k = 0; k < idx.size(); ++k) (k < test_per_class ? test : train).push_back(corpus[idx[k]]);
    }
    return {train, test};
}

std::vector<std::vector<std::string>> tokenize(const std::string& text) {
    std::vector<std::vector<std::string>> segments(1);
    std::string tok;
    auto flush = [&] {
        if (!tok.empty()) segments.back().push_back(std::move(tok));
        tok.clear();
    };
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            tok.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '\'') {
            continue;
        } else if (c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':') {
            flush();
            if (!segments.back().empty()) segments.emplace_back();
        } else {
            flush();
        }
    }
    flush();
    if (segments.back().empty() && segments.size() > 1) segments.pop_back();
    return segments;
}

std::map<std::string, double> ngram_features(const std::string& text) {
    std::map<std::string, double> f;
    for (const auto& seg : tokenize(text)) {
        for (size_t i = 0; i < seg.size(); ++i) {
            f["u:" + seg[i]] += 1.0;
            if (i + 1 < seg.size()) f["b:" + seg[i] + "_" + seg[i + 1]] += 1.0;
        }
    }
    return f;
}

BaselineModel BaselineModel::train(const LabeledQueryCorpus& corpus, uint64_t seed, TrainOptions opts) {
    std::array<size_t, kNumIntents> per_class{};
    for (const auto& q : corpus) ++per_class[static_cast<size_t>(q.label)];
    for (int c = 0; c < kNumIntents; ++c) {
        require(per_class[static_cast<size_t>(c)] > 0, ErrorCode::ClassMissing,
                "corpus has no example of class " + std::to_string(c));
    }

    // Repeated (text, label) pairs carry no extra information; training on the
    // distinct set makes the model a function of the corpus support only.
    std::set<std::pair<std::string, int>> distinct;
    for (const auto& q : corpus) distinct.emplace(trim(q.text), static_cast<int>(q.label));

    BaselineModel model;
    model.seed_ = seed;
    std::vector<std::vector<std::pair<size_t, double>>> rows;
    std::vector<int> labels;
    std::vector<std::map<std::string, double>> feats;
    for (const auto& [text, label] : distinct) {
        feats.push_back(ngram_features(text));
        for (const auto& kv : feats.back()) model.vocab_.emplace(kv.first, 0);
        labels.push_back(label);
    }
    size_t index = 0;
    for (auto& kv : model.vocab_) kv.second = index++;
    for (const auto& f : feats) {
        std::vector<std::pair<size_t, double>> row;
        for (const auto& [name, value] : f) row.emplace_back(model.vocab_.at(name), value);
        rows.push_back(std::move(row));
    }

    const size_t V = model.vocab_.size();
    const double n = static_cast<double>(rows.size());
    model.weights_.assign(V, {});
    std::vector<std::array<double, kNumIntents>> grad(V);
    for (int it = 0; it < opts.iterations; ++it) {
        for (auto& g : grad) g.fill(0.0);
        std::array<double, kNumIntents> gbias{};
        for (size_t r = 0; r < rows.size(); ++r) {
            std::array<double, kNumIntents> z = model.bias_;
            for (auto [j, v] : rows[r])
                for (int c = 0; c < kNumIntents; ++c) z[c] += model.weights_[j][c] * v;
            double mx = *std::max_element(z.begin(), z.end());
            double sum = 0.0;
            for (auto& zc : z) sum += (zc = std::exp(zc - mx));
            for (int c = 0; c < kNumIntents; ++c) {
                double d = z[c] / sum - (labels[r] == c ? 1.0 : 0.0);
                gbias[c] += d / n;
                for (auto [j, v] : rows[r]) grad[j][c] += d * v / n;
            }
        }
        for (size_t j = 0; j < V; ++j)
            for (int c = 0; c < kNumIntents; ++c)
                model.weights_[j][c] -= opts.learning_rate * (grad[j][c] + opts.l2 * model.weights_[j][c]);
        for (int c = 0; c < kNumIntents; ++c) model.bias_[c] -= opts.learning_rate * gbias[c];
    }
    return model;
}

std::array<double, kNumIntents> BaselineModel::logits(const std::string& text) const {
    std::array<double, kNumIntents> z = bias_;
    for (const auto& [name, value] : ngram_features(text)) {
        auto it = vocab_.find(name);
        if (it == vocab_.end()) continue;
        for (int c = 0; c < kNumIntents; ++c) z[c] += weights_[it->second][c] * value;
    }
    return z;
}

std::array<double, kNumIntents> BaselineModel::probabilities(const std::string& text) const {
    auto z = logits(text);
    double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) sum += (v = std::exp(v - mx));
    for (auto& v : z) v /= sum;
    return z;
}

IntentResult result_from_scores(const std::array<double, kNumIntents>& scores, BackendKind backend) {
    std::array<double, kNumIntents> p = scores;
    bool non_negative = std::all_of(p.begin(), p.end(), [](double v) { return v >= 0.0 && std::isfinite(v); });
    double sum = 0.0;
    for (double v : p) sum += v;
    if (non_negative && sum > 0.0) {
        for (auto& v : p) v /= sum;
    } else {
        double mx = *std::max_element(p.begin(), p.end());
        sum = 0.0;
        for (auto& v : p) sum += (v = std::exp(v - mx));
        for (auto& v : p) v /= sum;
    }
    int best = 0;
    for (int c = 1; c < kNumIntents; ++c)
        if (p[c] > p[best]) best = c;
    return {static_cast<IntentLabel>(best), std::clamp(p[best], 0.0, 1.0), backend, false};
}

IntentResult BaselineModel::classify(const QueryText& q) const {
    require(!vocab_.empty(), ErrorCode::ModelNotLoaded, "baseline intent model is not trained");
    return result_from_scores(probabilities(q.text()), BackendKind::baseline);
}

double BaselineModel::weight(const std::string& feature, IntentLabel label) const {
    auto it = vocab_.find(feature);
    return it == vocab_.end() ? 0.0 : weights_[it->second][static_cast<size_t>(label)];
}

nlohmann::json BaselineModel::to_json() const {
    nlohmann::json vocab = nlohmann::json::array();
    nlohmann::json weights = nlohmann::json::array();
    for (const auto& [name, idx] : vocab_) {
        vocab.push_back(name);
        weights.push_back(weights_[idx]);
    }
    return {{"format", "ioev.intent.baseline"}, {"version", 1}, {"seed", seed_},
            {"vocab", vocab},                   {"weights", weights}, {"bias", bias_}};
}

BaselineModel BaselineModel::from_json(const nlohmann::json& j) {
    require(j.value("format", "") == "ioev.intent.baseline", ErrorCode::ParseError, "not a baseline intent model");
    BaselineModel m;
    m.seed_ = j.at("seed").get<uint64_t>();
    auto vocab = j.at("vocab").get<std::vector<std::string>>();
    auto weights = j.at("weights").get<std::vector<std::array<double, kNumIntents>>>();
    require(vocab.size() == weights.size(), ErrorCode::ParseError, "vocab/weight size mismatch");
    for (size_t i = 0; i < vocab.size(); ++i) m.vocab_.emplace(vocab[i], i);
    m.weights_ = std::move(weights);
    m.bias_ = j.at("bias").get<std::array<double, kNumIntents>>();
    return m;
}

IntentGate::IntentGate(BaselineModel baseline, std::optional<TransformerEndpoint> transformer)
    : baseline_(std::move(baseline)), transformer_(std::move(transformer)) {}

IntentResult IntentGate::classify(const QueryText& q, BackendKind backend) const {
    if (q.source() == QuerySource::system_event && q.preset_label()) {
        return {*q.preset_label(), 1.0, backend, true};
    }
    if (backend == BackendKind::transformer) return classify_remote(q);
    return baseline_.classify(q);
}

IntentResult IntentGate::classify_remote(const QueryText& q) const {
    if (!transformer_ || transformer_->base_url.empty()) {
        fail(ErrorCode::BackendUnavailable, "transformer endpoint is not configured");
    }
    httplib::Client client(transformer_->base_url);
    client.set_connection_timeout(transformer_->timeout_seconds);
    client.set_read_timeout(transformer_->timeout_seconds);
    nlohmann::json body = {{"text", q.text()}};
    auto res = client.Post("/classify", body.dump(), "application/json");
    if (!res || res->status != 200) {
        fail(ErrorCode::BackendUnavailable, "transformer endpoint did not answer");
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        auto scores = j.at("scores").get<std::array<double, kNumIntents>>();
        return result_from_scores(scores, BackendKind::transformer);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::BackendUnavailable, std::string("malformed transformer reply: ") + e.what());
    }
}

eval::ConfusionCounts evaluate_intents(const BaselineModel& model, const LabeledQueryCorpus& corpus) {
    eval::ConfusionCounts cc(kNumIntents);
    for (const auto& q : corpus) {
        auto r = model.classify(QueryText(q.text));
        cc.add(static_cast<int>(q.label), static_cast<int>(r.label));
    }
    return cc;
}

}  // namespace ioev::intent
