#include "ioev/attribution/adapters.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "ioev/core/error.hpp"

namespace ioev::attribution {

BackgroundSet stratified_background(const ids::FeatureTable& train, size_t n, uint64_t seed) {
    require(!train.rows.empty(), ErrorCode::EmptyBackground, "no rows to sample a background from");
    BackgroundSet bg;
    if (train.rows.size() <= n) {
        bg.rows = train.rows;
        return bg;
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<size_t>> by_class(ids::kNumClasses);
    bool labelled = train.labels.size() == train.rows.size();
    for (size_t i = 0; i < train.rows.size(); ++i) by_class[labelled ? train.labels[i] : 0].push_back(i);
    for (auto& idx : by_class) {
        if (idx.empty()) continue;
        std::shuffle(idx.begin(), idx.end(), rng);
        size_t take = std::max<size_t>(1, idx.size() * n / train.rows.size());
        for (size_t k = 0; k < std::min(take, idx.size()) && bg.rows.size() < n; ++k) bg.rows.push_back(train.rows[idx[k]]);
    }
    return bg;
}

FlowExplanation explain_flow(const ids::Detector& det, const ids::FlowRecord& flow, const BackgroundSet& bg,
                             ShapleyOptions opts) {
    FlowExplanation out;
    out.prediction = det.infer(flow);
    const int cls = static_cast<int>(out.prediction.label);
    opts.names = det.feature_names();
    opts.groups.clear();
    BatchModelFn f = [&det, cls](const std::vector<Row>& rows) {
        std::vector<double> y;
        y.reserve(rows.size());
        for (const auto& p : det.predict_proba_rows(rows)) y.push_back(p[cls]);
        return y;
    };
    out.attribution = shapley_attribution(f, flow.values, bg, opts);
    return out;
}

BackgroundSet battery_background(const battery::BatteryDataset& data, size_t n, uint64_t seed) {
    require(!data.empty(), ErrorCode::EmptyBackground, "no windows to sample a background from");
    std::vector<size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    BackgroundSet bg;
    for (size_t k = 0; k < std::min(n, idx.size()); ++k) bg.rows.push_back(data[idx[k]].window.flatten());
    return bg;
}

Attribution explain_battery(const battery::MultiTaskModel& model, const battery::TelemetryWindow& window,
                            const BackgroundSet& bg, ShapleyOptions opts) {
    using battery::kNumChannels;
    using battery::kWindowLength;
    opts.names.clear();
    opts.groups.clear();
    for (size_t c = 0; c < kNumChannels; ++c) {
        FeatureGroup g{battery::channel_names()[c], {}};
        for (size_t t = 0; t < kWindowLength; ++t) g.columns.push_back(t * kNumChannels + c);
        opts.groups.push_back(std::move(g));
    }
    BatchModelFn f = [&model](const std::vector<Row>& rows) { return model.anomaly_probability_flat(rows); };
    return shapley_attribution(f, window.flatten(), bg, opts);
}

}  // namespace ioev::attribution
