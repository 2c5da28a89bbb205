#include "ioev/attribution/shapley.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_map>

#include "ioev/core/error.hpp"

namespace ioev::attribution {

double Attribution::sum_phi() const {
    double s = 0.0;
    for (const auto& it : items) s += it.phi;
    return s;
}

double Attribution::efficiency_gap() const { return std::abs(base_value + sum_phi() - prediction); }

nlohmann::json Attribution::to_json() const {
    nlohmann::json items_j = nlohmann::json::array();
    for (const auto& it : items) items_j.push_back({{"name", it.name}, {"value", it.value}, {"phi", it.phi}});
    nlohmann::json j = {{"base_value", base_value}, {"prediction", prediction}, {"items", items_j}};
    if (mc_error) j["mc_error"] = *mc_error;
    return j;
}

Attribution Attribution::from_json(const nlohmann::json& j) {
    Attribution a;
    a.base_value = j.at("base_value").get<double>();
    a.prediction = j.at("prediction").get<double>();
    for (const auto& it : j.at("items"))
        a.items.push_back({it.at("name").get<std::string>(), it.at("value").get<double>(), it.at("phi").get<double>()});
    if (j.contains("mc_error")) a.mc_error = j.at("mc_error").get<double>();
    return a;
}

namespace {

using Mask = std::vector<bool>;

struct MaskHash {
    size_t operator()(const Mask& m) const { return std::hash<std::vector<bool>>()(m); }
};

// Evaluates v(S) for many coalitions, batching model calls.
class CoalitionValue {
public:
    CoalitionValue(const BatchModelFn& f, const Row& x, const BackgroundSet& bg, const std::vector<FeatureGroup>& players,
                   size_t max_rows)
        : f_(f), x_(x), bg_(bg), players_(players), max_rows_(std::max<size_t>(max_rows, bg.rows.size())) {}

    std::vector<double> evaluate(const std::vector<Mask>& masks) {
        std::vector<double> out(masks.size(), 0.0);
        const size_t per = bg_.rows.size();
        const size_t chunk = std::max<size_t>(1, max_rows_ / per);
        for (size_t start = 0; start < masks.size(); start += chunk) {
            size_t end = std::min(masks.size(), start + chunk);
            std::vector<Row> rows;
            rows.reserve((end - start) * per);
            for (size_t m = start; m < end; ++m)
                for (const Row& b : bg_.rows) {
                    Row r = b;
                    for (size_t p = 0; p < players_.size(); ++p)
                        if (masks[m][p])
                            for (size_t c : players_[p].columns) r[c] = x_[c];
                    rows.push_back(std::move(r));
                }
            std::vector<double> y = f_(rows);
            require(y.size() == rows.size(), ErrorCode::ShapeMismatch, "model returned the wrong number of outputs");
            for (size_t m = start; m < end; ++m) {
                double s = 0.0;
                for (size_t k = 0; k < per; ++k) s += y[(m - start) * per + k];
                out[m] = s / static_cast<double>(per);
            }
        }
        return out;
    }

private:
    const BatchModelFn& f_;
    const Row& x_;
    const BackgroundSet& bg_;
    const std::vector<FeatureGroup>& players_;
    size_t max_rows_;
};

std::vector<FeatureGroup> resolve_players(const ShapleyOptions& opts, size_t dim) {
    std::vector<FeatureGroup> players;
    if (opts.groups.empty()) {
        require(opts.names.empty() || opts.names.size() == dim, ErrorCode::ShapeMismatch,
                "feature names do not match the input width");
        for (size_t c = 0; c < dim; ++c)
            players.push_back({opts.names.empty() ? "x" + std::to_string(c) : opts.names[c], {c}});
        return players;
    }
    std::vector<bool> seen(dim, false);
    for (const auto& g : opts.groups) {
        require(!g.columns.empty(), ErrorCode::InvalidArgument, "feature group '" + g.name + "' is empty");
        for (size_t c : g.columns) {
            require(c < dim && !seen[c], ErrorCode::InvalidArgument,
                    "feature group '" + g.name + "' has an out-of-range or repeated column");
            seen[c] = true;
        }
    }
    return opts.groups;
}

double factorial(size_t n) {
    double f = 1.0;
    for (size_t i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
}

}  // namespace

Attribution shapley_attribution(const BatchModelFn& f, const Row& x, const BackgroundSet& bg,
                                const ShapleyOptions& opts) {
    require(!bg.rows.empty(), ErrorCode::EmptyBackground, "background set is empty");
    for (const Row& b : bg.rows)
        require(b.size() == x.size(), ErrorCode::ShapeMismatch, "background row width differs from input");
    const std::vector<FeatureGroup> players = resolve_players(opts, x.size());
    const size_t n = players.size();
    CoalitionValue value(f, x, bg, players, opts.max_rows_per_call);

    Attribution out;
    for (const auto& p : players) {
        double v = 0.0;
        for (size_t c : p.columns) v += x[c];
        out.items.push_back({p.name, v / static_cast<double>(p.columns.size()), 0.0});
    }
    std::vector<double> fx = f({x});
    require(fx.size() == 1, ErrorCode::ShapeMismatch, "model returned the wrong number of outputs");
    out.prediction = fx[0];

    if (opts.mode == ShapleyMode::exact) {
        require(n <= kMaxExactFeatures, ErrorCode::TooManyFeaturesForExact,
                std::to_string(n) + " players exceed the exact-mode limit of " + std::to_string(kMaxExactFeatures));
        const size_t count = size_t{1} << n;
        std::vector<Mask> masks(count, Mask(n, false));
        for (size_t s = 0; s < count; ++s)
            for (size_t p = 0; p < n; ++p) masks[s][p] = (s >> p) & 1U;
        std::vector<double> v = value.evaluate(masks);
        v[count - 1] = out.prediction;
        out.base_value = v[0];
        std::vector<double> weight(n);
        for (size_t k = 0; k < n; ++k) weight[k] = factorial(k) * factorial(n - k - 1) / factorial(n);
        for (size_t i = 0; i < n; ++i) {
            double phi = 0.0;
            for (size_t s = 0; s < count; ++s) {
                if ((s >> i) & 1U) continue;
                size_t k = static_cast<size_t>(std::popcount(s));
                phi += weight[k] * (v[s | (size_t{1} << i)] - v[s]);
            }
            out.items[i].phi = phi;
        }
        return out;
    }

    const size_t budget = opts.budget == 0 ? 2 * n : opts.budget;
    require(budget >= 2 * n, ErrorCode::InvalidArgument, "sampled mode needs at least 2 permutations per player");
    std::mt19937_64 rng(opts.seed);
    std::vector<std::vector<size_t>> perms(budget, std::vector<size_t>(n));
    for (auto& p : perms) {
        std::iota(p.begin(), p.end(), 0);
        std::shuffle(p.begin(), p.end(), rng);
    }
    // Every prefix of every permutation is a coalition; evaluate the distinct ones once.
    std::unordered_map<Mask, double, MaskHash> cache;
    std::vector<Mask> pending;
    auto want = [&](const Mask& m) {
        if (cache.emplace(m, 0.0).second) pending.push_back(m);
    };
    Mask empty(n, false), full(n, true);
    want(empty);
    for (const auto& p : perms) {
        Mask m(n, false);
        for (size_t k = 0; k + 1 < n; ++k) {
            m[p[k]] = true;
            want(m);
        }
    }
    cache.erase(full);
    pending.erase(std::remove(pending.begin(), pending.end(), full), pending.end());
    std::vector<double> vals = value.evaluate(pending);
    for (size_t i = 0; i < pending.size(); ++i) cache[pending[i]] = vals[i];
    cache[full] = out.prediction;
    out.base_value = cache.at(empty);

    std::vector<std::vector<double>> marginals(n);
    for (const auto& p : perms) {
        Mask m(n, false);
        double prev = out.base_value;
        for (size_t k = 0; k < n; ++k) {
            m[p[k]] = true;
            double cur = cache.at(m);
            marginals[p[k]].push_back(cur - prev);
            prev = cur;
        }
    }
    const double M = static_cast<double>(budget);
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double mean = std::accumulate(marginals[i].begin(), marginals[i].end(), 0.0) / M;
        double ss = 0.0;
        for (double d : marginals[i]) ss += (d - mean) * (d - mean);
        out.items[i].phi = mean;
        worst = std::max(worst, std::sqrt(ss / (M - 1.0) / M));
    }
    out.mc_error = worst;
    return out;
}

nlohmann::json Waterfall::to_json() const {
    nlohmann::json bars_j = nlohmann::json::array();
    for (const auto& b : bars) bars_j.push_back({{"feature", b.feature}, {"value", b.value}, {"contribution", b.contribution}});
    return {{"base_value", base_value}, {"prediction", prediction}, {"bars", bars_j}, {"remainder", remainder}};
}

Waterfall waterfall_data(const Attribution& attr, size_t top_k) {
    require(top_k >= 1, ErrorCode::InvalidArgument, "top_k must be at least 1");
    std::vector<AttributionItem> items = attr.items;
    std::stable_sort(items.begin(), items.end(),
                     [](const AttributionItem& a, const AttributionItem& b) { return std::abs(a.phi) > std::abs(b.phi); });
    Waterfall w;
    w.base_value = attr.base_value;
    w.prediction = attr.prediction;
    double shown = 0.0;
    for (size_t i = 0; i < std::min(top_k, items.size()); ++i) {
        w.bars.push_back({items[i].name, items[i].value, items[i].phi});
        shown += items[i].phi;
    }
    w.remainder = top_k >= items.size() ? 0.0 : attr.prediction - attr.base_value - shown;
    return w;
}

}  // namespace ioev::attribution
