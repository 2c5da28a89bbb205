#include "ioev/ids/detector.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "backends.hpp"
#include "ioev/core/bytes.hpp"
#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"

namespace ioev::ids {

namespace {
constexpr std::string_view kDetectorMagic = "IOEVIDS1";
}

ScalerStats ScalerStats::fit(ScalerKind kind, const std::vector<std::vector<double>>& rows, size_t dim) {
    ScalerStats s;
    s.kind = kind;
    s.offset.assign(dim, 0.0);
    s.scale.assign(dim, 1.0);
    if (kind == ScalerKind::none || rows.empty()) return s;
    const double n = static_cast<double>(rows.size());
    for (size_t f = 0; f < dim; ++f) {
        if (kind == ScalerKind::zscore) {
            double sum = 0.0, sq = 0.0;
            for (const auto& r : rows) sum += r[f];
            double mean = sum / n;
            for (const auto& r : rows) sq += (r[f] - mean) * (r[f] - mean);
            double sd = std::sqrt(sq / n);
            s.offset[f] = mean;
            s.scale[f] = sd > 0.0 ? sd : 1.0;
        } else {
            double lo = rows.front()[f], hi = lo;
            for (const auto& r : rows) {
                lo = std::min(lo, r[f]);
                hi = std::max(hi, r[f]);
            }
            s.offset[f] = lo;
            s.scale[f] = hi > lo ? hi - lo : 1.0;
        }
    }
    return s;
}

nn::Matrix ScalerStats::transform(const std::vector<std::vector<double>>& rows) const {
    const size_t dim = offset.size();
    nn::Matrix x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) {
        require(rows[i].size() == dim, ErrorCode::ShapeMismatch, "row has the wrong number of features");
        for (size_t f = 0; f < dim; ++f) x(f, i) = (rows[i][f] - offset[f]) / scale[f];
    }
    return x;
}

nlohmann::json ScalerStats::to_json() const {
    return {{"kind", to_string(kind)}, {"offset", offset}, {"scale", scale}};
}

ScalerStats ScalerStats::from_json(const nlohmann::json& j) {
    ScalerStats s;
    s.kind = parse_scaler(j.at("kind").get<std::string>());
    s.offset = j.at("offset").get<std::vector<double>>();
    s.scale = j.at("scale").get<std::vector<double>>();
    return s;
}

std::string to_string(DetectorArch a) {
    switch (a) {
        case DetectorArch::mlp: return "mlp";
        case DetectorArch::lstm: return "lstm";
        case DetectorArch::gbdt: return "gbdt";
    }
    return "?";
}

DetectorArch parse_detector_arch(const std::string& s) {
    std::string l = to_lower(s);
    if (l == "mlp") return DetectorArch::mlp;
    if (l == "lstm") return DetectorArch::lstm;
    if (l == "gbdt" || l == "xgboost") return DetectorArch::gbdt;
    fail(ErrorCode::InvalidArgument, "unknown detector architecture '" + s + "'");
}

nlohmann::json DetectorConfig::to_json() const {
    return {{"arch", to_string(arch)},
            {"mlp_layers", [&] {
                 auto v = mlp_hidden;
                 v.push_back(kNumClasses);
                 return v;
             }()},
            {"lstm_units", [&] {
                 auto v = lstm_units;
                 v.push_back(kNumClasses);
                 return v;
             }()},
            {"gbdt",
             {{"estimators", gbdt.estimators},
              {"max_depth", gbdt.max_depth},
              {"learning_rate", gbdt.learning_rate},
              {"subsample", gbdt.subsample},
              {"colsample", gbdt.colsample},
              {"min_child_weight", gbdt.min_child_weight}}},
            {"neural",
             {{"epochs", neural.epochs}, {"batch_size", neural.batch_size}, {"learning_rate", neural.learning_rate}}},
            {"class_weights", class_weights}};
}

AttackPrediction prediction_from(const Probabilities& p) {
    AttackPrediction out;
    out.probabilities = p;
    int best = 0;
    for (int k = 1; k < kNumClasses; ++k)
        if (p[k] > p[best]) best = k;
    out.label = static_cast<AttackClass>(best);
    return out;
}

Detector::Detector(FittedPreprocessor preprocessor, ScalerStats scaler, std::shared_ptr<const ClassifierBackend> backend)
    : pre_(std::move(preprocessor)), scaler_(std::move(scaler)), backend_(std::move(backend)) {
    require(backend_ != nullptr, ErrorCode::ModelNotLoaded, "detector needs a backend");
    require(scaler_.offset.size() == pre_.columns.size(), ErrorCode::ShapeMismatch,
            "scaler dimension differs from feature count");
}

std::vector<Probabilities> Detector::predict_proba_rows(const std::vector<std::vector<double>>& rows) const {
    nn::Matrix p = backend_->predict_proba(scaler_.transform(rows));
    std::vector<Probabilities> out(rows.size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (int k = 0; k < kNumClasses; ++k) out[i][k] = p(k, static_cast<Eigen::Index>(i));
    return out;
}

AttackPrediction Detector::infer(const FlowRecord& f) const {
    require(f.names == pre_.columns, ErrorCode::SchemaMismatch,
            "flow features do not match detector schema " + fingerprint());
    require(f.values.size() == f.names.size(), ErrorCode::ShapeMismatch, "flow has mismatched names and values");
    for (double v : f.values) require(std::isfinite(v), ErrorCode::InvalidArgument, "flow has non-finite values");
    return prediction_from(predict_proba_rows({f.values}).front());
}

std::vector<int> Detector::predict(const FeatureTable& t) const {
    require(t.columns == pre_.columns, ErrorCode::SchemaMismatch, "table columns do not match detector schema");
    std::vector<int> out;
    out.reserve(t.size());
    for (const auto& p : predict_proba_rows(t.rows)) out.push_back(static_cast<int>(prediction_from(p).label));
    return out;
}

std::string Detector::serialize() const {
    nlohmann::json header = {{"preprocessor", pre_.to_json()}, {"scaler", scaler_.to_json()}, {"backend", kind()}};
    ByteWriter w;
    w.bytes(kDetectorMagic);
    w.str(header.dump());
    w.str(backend_->serialize());
    return w.take();
}

Detector Detector::deserialize(const std::string& bytes) {
    ByteReader r(bytes);
    require(bytes.size() >= kDetectorMagic.size() && r.bytes(kDetectorMagic.size()) == kDetectorMagic,
            ErrorCode::ParseError, "not a detector file");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(r.str());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, std::string("bad detector header: ") + e.what());
    }
    std::string blob = r.str();
    std::string kind = header.at("backend").get<std::string>();
    std::shared_ptr<const ClassifierBackend> backend =
        kind == "gbdt" ? detail::load_gbdt(blob) : detail::load_neural(blob);
    return Detector(FittedPreprocessor::from_json(header.at("preprocessor")),
                    ScalerStats::from_json(header.at("scaler")), std::move(backend));
}

void Detector::save(const std::string& path) const { write_file(path, serialize()); }
Detector Detector::load(const std::string& path) { return deserialize(read_file(path)); }

std::vector<double> inverse_frequency_weights(const std::vector<int>& labels, int num_classes) {
    std::vector<double> counts(static_cast<size_t>(num_classes), 0.0);
    for (int y : labels) counts.at(static_cast<size_t>(y)) += 1.0;
    std::set<int> present(labels.begin(), labels.end());
    const double n = static_cast<double>(labels.size());
    const double k = static_cast<double>(present.size());
    std::vector<double> w;
    w.reserve(labels.size());
    for (int y : labels) w.push_back(n / (k * counts[static_cast<size_t>(y)]));
    return w;
}

Detector train_detector(const FeatureTable& train, const FittedPreprocessor& pre, const DetectorConfig& cfg,
                        uint64_t seed) {
    require(train.columns == pre.columns, ErrorCode::SchemaMismatch, "training table does not match preprocessor");
    require(train.labels.size() == train.rows.size() && !train.rows.empty(), ErrorCode::ClassMissing,
            "training data has no labels");
    std::set<int> classes(train.labels.begin(), train.labels.end());
    require(classes.size() >= 2, ErrorCode::ClassMissing, "training data needs at least two classes");
    for (int y : classes)
        require(y >= 0 && y < kNumClasses, ErrorCode::InvalidArgument, "label out of range");

    ScalerStats scaler = ScalerStats::fit(pre.scaler, train.rows, pre.columns.size());
    nn::Matrix x = scaler.transform(train.rows);
    std::vector<double> w = cfg.class_weights ? inverse_frequency_weights(train.labels, kNumClasses)
                                              : std::vector<double>(train.rows.size(), 1.0);
    std::shared_ptr<const ClassifierBackend> backend;
    switch (cfg.arch) {
        case DetectorArch::mlp: backend = detail::train_mlp(x, train.labels, w, cfg, seed); break;
        case DetectorArch::lstm: backend = detail::train_lstm(x, train.labels, w, cfg, seed); break;
        case DetectorArch::gbdt: {
            auto gbdt = cfg.gbdt_factory();
            require(gbdt != nullptr, ErrorCode::InvalidArgument, "gbdt factory returned nothing");
            gbdt->fit(x, train.labels, w, cfg.gbdt, seed);
            backend = std::move(gbdt);
            break;
        }
    }
    return Detector(pre, std::move(scaler), std::move(backend));
}

DetectorEvaluation evaluate_detector(const Detector& det, const FeatureTable& test) {
    require(test.labels.size() == test.rows.size() && !test.rows.empty(), ErrorCode::EmptyCounts,
            "evaluation needs labelled rows");
    DetectorEvaluation ev;
    ev.counts = eval::confusion_from(test.labels, det.predict(test), kNumClasses);
    ev.macro = eval::classification_metrics(ev.counts, std::nullopt);
    return ev;
}

}  // namespace ioev::ids
