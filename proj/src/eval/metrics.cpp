#include "ioev/eval/metrics.hpp"

#include <cmath>

#include "ioev/core/error.hpp"

namespace ioev::eval {

ConfusionCounts::ConfusionCounts(int num_classes) : k_(num_classes), cells_(static_cast<size_t>(num_classes * num_classes), 0) {
    require(num_classes >= 2, ErrorCode::InvalidArgument, "confusion matrix needs at least two classes");
}

void ConfusionCounts::add(int truth, int predicted, uint64_t count) {
    require(truth >= 0 && truth < k_ && predicted >= 0 && predicted < k_, ErrorCode::InvalidArgument,
            "class index out of range");
    cells_[static_cast<size_t>(truth * k_ + predicted)] += count;
}

uint64_t ConfusionCounts::at(int truth, int predicted) const {
    return cells_[static_cast<size_t>(truth * k_ + predicted)];
}

uint64_t ConfusionCounts::total() const {
    uint64_t t = 0;
    for (auto c : cells_) t += c;
    return t;
}

uint64_t ConfusionCounts::tp(int positive) const { return at(positive, positive); }

uint64_t ConfusionCounts::fp(int positive) const {
    uint64_t s = 0;
    for (int t = 0; t < k_; ++t)
        if (t != positive) s += at(t, positive);
    return s;
}

uint64_t ConfusionCounts::fn(int positive) const {
    uint64_t s = 0;
    for (int p = 0; p < k_; ++p)
        if (p != positive) s += at(positive, p);
    return s;
}

uint64_t ConfusionCounts::tn(int positive) const { return total() - tp(positive) - fp(positive) - fn(positive); }

nlohmann::json ConfusionCounts::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int t = 0; t < k_; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (int p = 0; p < k_; ++p) row.push_back(at(t, p));
        rows.push_back(row);
    }
    return rows;
}

ConfusionCounts confusion_from(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
    require(truth.size() == predicted.size(), ErrorCode::LengthMismatch, "truth/prediction length mismatch");
    ConfusionCounts cc(num_classes);
    for (size_t i = 0; i < truth.size(); ++i) cc.add(truth[i], predicted[i]);
    return cc;
}

namespace {

struct ClassScores {
    double precision, recall, f1;
};

ClassScores class_scores(const ConfusionCounts& cc, int c, std::vector<std::string>& flags) {
    const double tp = static_cast<double>(cc.tp(c));
    const double fp = static_cast<double>(cc.fp(c));
    const double fn = static_cast<double>(cc.fn(c));
    const std::string tag = "[class=" + std::to_string(c) + "]";
    ClassScores s{0.0, 0.0, 0.0};
    if (tp + fp > 0) {
        s.precision = tp / (tp + fp);
    } else {
        flags.push_back("precision" + tag);
    }
    if (tp + fn > 0) {
        s.recall = tp / (tp + fn);
    } else {
        flags.push_back("recall" + tag);
    }
    if (s.precision + s.recall > 0) {
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    } else {
        flags.push_back("f1" + tag);
    }
    return s;
}

}  // namespace

ClassificationMetrics classification_metrics(const ConfusionCounts& cc, std::optional<int> positive_class) {
    const uint64_t total = cc.total();
    require(total > 0, ErrorCode::EmptyCounts, "confusion matrix is empty");
    ClassificationMetrics m;
    if (positive_class) {
        int c = *positive_class;
        require(c >= 0 && c < cc.num_classes(), ErrorCode::InvalidArgument, "positive class out of range");
        m.accuracy = static_cast<double>(cc.tp(c) + cc.tn(c)) / static_cast<double>(total);
        auto s = class_scores(cc, c, m.flags);
        m.precision = s.precision;
        m.recall = s.recall;
        m.f1 = s.f1;
        return m;
    }
    uint64_t correct = 0;
    for (int c = 0; c < cc.num_classes(); ++c) correct += cc.at(c, c);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
    for (int c = 0; c < cc.num_classes(); ++c) {
        auto s = class_scores(cc, c, m.flags);
        m.precision += s.precision;
        m.recall += s.recall;
        m.f1 += s.f1;
    }
    const double k = cc.num_classes();
    m.precision /= k;
    m.recall /= k;
    m.f1 /= k;
    return m;
}

RegressionErrors regression_metrics(std::span<const double> truth, std::span<const double> predicted) {
    require(truth.size() == predicted.size(), ErrorCode::LengthMismatch,
            "truth has " + std::to_string(truth.size()) + " values, prediction " + std::to_string(predicted.size()));
    require(!truth.empty(), ErrorCode::LengthMismatch, "regression metrics need at least one value");
    RegressionErrors e;
    e.n = truth.size();
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (size_t i = 0; i < truth.size(); ++i) {
        double d = truth[i] - predicted[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
    }
    const double n = static_cast<double>(e.n);
    e.mae = abs_sum / n;
    e.mse = sq_sum / n;
    e.rmse = std::sqrt(e.mse);
    return e;
}

}  // namespace ioev::eval
