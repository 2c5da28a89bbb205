#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "backends.hpp"
#include "ioev/core/bytes.hpp"
#include "ioev/core/error.hpp"
#include "ioev/nn/layers.hpp"

namespace ioev::ids {

namespace {

constexpr std::string_view kGbdtMagic = "IOEVGBDT";

struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    uint32_t left = 0, right = 0;
    double value = 0.0;
};

using Tree = std::vector<Node>;

double tree_predict(const Tree& t, const nn::Matrix& x, Eigen::Index col) {
    uint32_t n = 0;
    while (t[n].feature >= 0) n = x(t[n].feature, col) <= t[n].threshold ? t[n].left : t[n].right;
    return t[n].value;
}

// Candidate split points per feature: midpoints between consecutive distinct
// values, thinned to at most max_bins - 1 by quantile.
std::vector<std::vector<double>> bin_edges(const nn::Matrix& x, int max_bins) {
    std::vector<std::vector<double>> edges(static_cast<size_t>(x.rows()));
    for (Eigen::Index f = 0; f < x.rows(); ++f) {
        std::vector<double> v(static_cast<size_t>(x.cols()));
        for (Eigen::Index i = 0; i < x.cols(); ++i) v[i] = x(f, i);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        std::vector<double> mids;
        for (size_t i = 1; i < v.size(); ++i) mids.push_back(0.5 * (v[i - 1] + v[i]));
        if (mids.size() > static_cast<size_t>(max_bins - 1)) {
            std::vector<double> thin;
            for (int b = 1; b < max_bins; ++b) thin.push_back(mids[(mids.size() * b) / max_bins]);
            thin.erase(std::unique(thin.begin(), thin.end()), thin.end());
            mids = std::move(thin);
        }
        edges[f] = std::move(mids);
    }
    return edges;
}

class HistogramGbdt final : public GradientBoostedTrees {
public:
    std::string kind() const override { return "gbdt"; }

    void fit(const nn::Matrix& x, const std::vector<int>& labels, const std::vector<double>& weights,
             const GbdtParams& p, uint64_t seed) override {
        require(p.estimators >= 0 && p.max_depth >= 1 && p.learning_rate > 0.0, ErrorCode::InvalidArgument,
                "invalid boosting parameters");
        require(p.subsample > 0.0 && p.subsample <= 1.0 && p.colsample > 0.0 && p.colsample <= 1.0,
                ErrorCode::InvalidArgument, "sampling rates must be in (0, 1]");
        const Eigen::Index n = x.cols();
        const int d = static_cast<int>(x.rows());
        num_features_ = d;
        trees_.clear();
        params_ = p;

        auto edges = bin_edges(x, std::max(2, p.max_bins));
        // bins(f, i): index of the first edge >= x, so x <= edges[bin] iff bin index <= split.
        Eigen::Matrix<uint16_t, Eigen::Dynamic, Eigen::Dynamic> bins(d, n);
        for (int f = 0; f < d; ++f)
            for (Eigen::Index i = 0; i < n; ++i)
                bins(f, i) = static_cast<uint16_t>(
                    std::lower_bound(edges[f].begin(), edges[f].end(), x(f, i)) - edges[f].begin());

        std::mt19937_64 rng(seed);
        std::bernoulli_distribution take_row(p.subsample);
        nn::Matrix raw = nn::Matrix::Zero(kNumClasses, n);
        std::vector<int> features(static_cast<size_t>(d));
        std::iota(features.begin(), features.end(), 0);
        const int n_cols = std::max(1, static_cast<int>(std::ceil(p.colsample * d)));

        std::vector<double> g(static_cast<size_t>(n)), h(static_cast<size_t>(n));
        for (int round = 0; round < p.estimators; ++round) {
            nn::Matrix prob = nn::softmax_columns(raw);
            std::vector<uint32_t> rows;
            for (Eigen::Index i = 0; i < n; ++i)
                if (take_row(rng)) rows.push_back(static_cast<uint32_t>(i));
            if (rows.empty()) rows.push_back(static_cast<uint32_t>(rng() % static_cast<uint64_t>(n)));
            for (int k = 0; k < kNumClasses; ++k) {
                for (Eigen::Index i = 0; i < n; ++i) {
                    double pk = prob(k, i);
                    double y = labels[i] == k ? 1.0 : 0.0;
                    g[i] = weights[i] * (pk - y);
                    h[i] = weights[i] * std::max(pk * (1.0 - pk), 1e-16);
                }
                std::shuffle(features.begin(), features.end(), rng);
                std::vector<int> cols(features.begin(), features.begin() + n_cols);
                std::sort(cols.begin(), cols.end());
                Tree t;
                std::vector<uint32_t> root = rows;  // build consumes its row list
                build(t, root, 0, cols, bins, edges, g, h);
                for (Eigen::Index i = 0; i < n; ++i) raw(k, i) += tree_predict(t, x, i);
                trees_.push_back(std::move(t));
            }
        }
    }

    nn::Matrix predict_proba(const nn::Matrix& x) const override {
        require(x.rows() == num_features_, ErrorCode::ShapeMismatch, "feature count differs from training");
        nn::Matrix raw = nn::Matrix::Zero(kNumClasses, x.cols());
        for (size_t t = 0; t < trees_.size(); ++t) {
            int k = static_cast<int>(t % kNumClasses);
            for (Eigen::Index i = 0; i < x.cols(); ++i) raw(k, i) += tree_predict(trees_[t], x, i);
        }
        return nn::softmax_columns(raw);
    }

    std::string serialize() const override {
        ByteWriter w;
        w.bytes(kGbdtMagic);
        w.u32(static_cast<uint32_t>(num_features_));
        w.u64(trees_.size());
        for (const Tree& t : trees_) {
            w.u32(static_cast<uint32_t>(t.size()));
            for (const Node& nd : t) {
                w.u32(static_cast<uint32_t>(nd.feature + 1));
                w.f64(nd.threshold);
                w.u32(nd.left);
                w.u32(nd.right);
                w.f64(nd.value);
            }
        }
        return w.take();
    }

    static std::unique_ptr<HistogramGbdt> deserialize(const std::string& bytes) {
        ByteReader r(bytes);
        require(r.bytes(kGbdtMagic.size()) == kGbdtMagic, ErrorCode::ParseError, "not a boosted-tree blob");
        auto m = std::make_unique<HistogramGbdt>();
        m->num_features_ = static_cast<int>(r.u32());
        uint64_t count = r.u64();
        for (uint64_t i = 0; i < count; ++i) {
            Tree t(r.u32());
            for (Node& nd : t) {
                nd.feature = static_cast<int>(r.u32()) - 1;
                nd.threshold = r.f64();
                nd.left = r.u32();
                nd.right = r.u32();
                nd.value = r.f64();
                require(nd.feature < m->num_features_ && (nd.feature < 0 || (nd.left < t.size() && nd.right < t.size())),
                        ErrorCode::ParseError, "corrupt tree node");
            }
            require(!t.empty(), ErrorCode::ParseError, "empty tree");
            m->trees_.push_back(std::move(t));
        }
        require(r.remaining() == 0, ErrorCode::ParseError, "trailing bytes after trees");
        return m;
    }

private:
    uint32_t build(Tree& t, std::vector<uint32_t>& rows, int depth, const std::vector<int>& cols,
                   const Eigen::Matrix<uint16_t, Eigen::Dynamic, Eigen::Dynamic>& bins,
                   const std::vector<std::vector<double>>& edges, const std::vector<double>& g,
                   const std::vector<double>& h) {
        const uint32_t id = static_cast<uint32_t>(t.size());
        t.emplace_back();
        double G = 0.0, H = 0.0;
        for (uint32_t i : rows) {
            G += g[i];
            H += h[i];
        }
        const double lambda = params_.lambda;
        t[id].value = -params_.learning_rate * G / (H + lambda);
        if (depth >= params_.max_depth || H < 2.0 * params_.min_child_weight) return id;

        const double parent = G * G / (H + lambda);
        double best_gain = 1e-12;
        int best_f = -1;
        size_t best_bin = 0;
        std::vector<double> hg, hh;
        for (int f : cols) {
            const size_t nb = edges[f].size() + 1;
            hg.assign(nb, 0.0);
            hh.assign(nb, 0.0);
            for (uint32_t i : rows) {
                uint16_t b = bins(f, i);
                hg[b] += g[i];
                hh[b] += h[i];
            }
            double gl = 0.0, hl = 0.0;
            for (size_t b = 0; b + 1 < nb; ++b) {
                gl += hg[b];
                hl += hh[b];
                double hr = H - hl;
                if (hl < params_.min_child_weight || hr < params_.min_child_weight) continue;
                double gr = G - gl;
                double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_f = f;
                    best_bin = b;
                }
            }
        }
        if (best_f < 0) return id;

        std::vector<uint32_t> left, right;
        for (uint32_t i : rows) (bins(best_f, i) <= best_bin ? left : right).push_back(i);
        rows.clear();
        rows.shrink_to_fit();
        t[id].feature = best_f;
        t[id].threshold = edges[best_f][best_bin];
        uint32_t l = build(t, left, depth + 1, cols, bins, edges, g, h);
        uint32_t r = build(t, right, depth + 1, cols, bins, edges, g, h);
        t[id].left = l;
        t[id].right = r;
        return id;
    }

    int num_features_ = 0;
    GbdtParams params_;
    std::vector<Tree> trees_;
};

}  // namespace

std::unique_ptr<GradientBoostedTrees> make_histogram_gbdt() { return std::make_unique<HistogramGbdt>(); }

namespace detail {
std::unique_ptr<ClassifierBackend> load_gbdt(const std::string& bytes) { return HistogramGbdt::deserialize(bytes); }
}  // namespace detail

}  // namespace ioev::ids
