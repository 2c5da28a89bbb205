#include <algorithm>
#include <numeric>

#include "backends.hpp"
#include "ioev/core/error.hpp"
#include "ioev/nn/checkpoint.hpp"
#include "ioev/nn/layers.hpp"
#include "ioev/nn/loss.hpp"
#include "ioev/nn/optim.hpp"
#include "ioev/nn/recurrent.hpp"

namespace ioev::ids::detail {

namespace {

constexpr const char* kMlpKind = "ioev.ids.mlp";
constexpr const char* kLstmKind = "ioev.ids.lstm";

// Shared trainable interface for the two neural detectors.
struct ForwardCache {
    virtual ~ForwardCache() = default;
};

class NeuralNet : public ClassifierBackend {
public:
    virtual nn::Matrix logits(const nn::Matrix& x, std::unique_ptr<ForwardCache>* cache_out) const = 0;
    virtual void backward(const ForwardCache& cache, const nn::Matrix& dlogits) = 0;
    virtual nn::ParamSet& params() = 0;

    nn::Matrix predict_proba(const nn::Matrix& x) const override {
        return nn::softmax_columns(logits(x, nullptr));
    }
};

class Mlp final : public NeuralNet {
public:
    Mlp(int input_dim, std::vector<int> hidden, uint64_t seed) : input_dim_(input_dim), hidden_(std::move(hidden)) {
        nn::Rng rng(seed);
        int in = input_dim;
        for (size_t l = 0; l <= hidden_.size(); ++l) {
            int out = l < hidden_.size() ? hidden_[l] : kNumClasses;
            layers_.emplace_back("mlp." + std::to_string(l), in, out, rng);
            in = out;
        }
        for (auto& l : layers_) l.collect(params_);
    }

    std::string kind() const override { return "mlp"; }

    struct Cache : ForwardCache {
        std::vector<nn::Matrix> inputs, pre;
    };

    nn::Matrix logits(const nn::Matrix& x, std::unique_ptr<ForwardCache>* cache_out) const override {
        auto cache = cache_out ? std::make_unique<Cache>() : nullptr;
        nn::Matrix a = x;
        for (size_t l = 0; l < layers_.size(); ++l) {
            nn::Matrix z = layers_[l].forward(a);
            if (cache) {
                cache->inputs.push_back(a);
                cache->pre.push_back(z);
            }
            a = l + 1 < layers_.size() ? nn::relu(z) : z;
        }
        if (cache_out) *cache_out = std::move(cache);
        return a;
    }

    void backward(const ForwardCache& raw, const nn::Matrix& dlogits) override {
        const auto& c = static_cast<const Cache&>(raw);
        nn::Matrix d = dlogits;
        for (size_t l = layers_.size(); l-- > 0;) {
            if (l + 1 < layers_.size()) d = d.cwiseProduct((c.pre[l].array() > 0.0).cast<double>().matrix());
            d = layers_[l].backward(c.inputs[l], d);
        }
    }
    nn::ParamSet& params() override { return params_; }

    std::string serialize() const override {
        return nn::encode_checkpoint(kMlpKind, {{"input_dim", input_dim_}, {"hidden", hidden_}}, params_);
    }

private:
    int input_dim_;
    std::vector<int> hidden_;
    std::vector<nn::Dense> layers_;
    nn::ParamSet params_;
};

// Each flow is a length-1 sequence through stacked LSTM layers of the given widths.
class LstmNet final : public NeuralNet {
public:
    LstmNet(int input_dim, std::vector<int> units, uint64_t seed) : input_dim_(input_dim), units_(std::move(units)) {
        require(!units_.empty(), ErrorCode::InvalidArgument, "lstm detector needs at least one layer");
        nn::Rng rng(seed);
        int in = input_dim;
        for (size_t l = 0; l < units_.size(); ++l) {
            layers_.push_back(nn::make_cell_layer(nn::CellKind::lstm, "lstm." + std::to_string(l), in, units_[l], rng));
            in = units_[l];
        }
        out_ = nn::Dense("lstm.out", in, kNumClasses, rng);
        for (auto& l : layers_) l->collect(params_);
        out_.collect(params_);
    }

    std::string kind() const override { return "lstm"; }

    struct Cache : ForwardCache {
        std::vector<std::unique_ptr<nn::LayerCache>> layers;
        nn::Matrix last;
    };

    nn::Matrix logits(const nn::Matrix& x, std::unique_ptr<ForwardCache>* cache_out) const override {
        auto cache = cache_out ? std::make_unique<Cache>() : nullptr;
        nn::Sequence seq{x};
        for (const auto& l : layers_) {
            std::unique_ptr<nn::LayerCache> lc;
            seq = l->forward(seq, cache ? &lc : nullptr);
            if (cache) cache->layers.push_back(std::move(lc));
        }
        if (cache) cache->last = seq.back();
        nn::Matrix z = out_.forward(seq.back());
        if (cache_out) *cache_out = std::move(cache);
        return z;
    }

    void backward(const ForwardCache& raw, const nn::Matrix& dlogits) override {
        const auto& c = static_cast<const Cache&>(raw);
        nn::Sequence d{out_.backward(c.last, dlogits)};
        for (size_t l = layers_.size(); l-- > 0;) d = layers_[l]->backward(*c.layers[l], d);
    }
    nn::ParamSet& params() override { return params_; }

    std::string serialize() const override {
        return nn::encode_checkpoint(kLstmKind, {{"input_dim", input_dim_}, {"units", units_}}, params_);
    }

private:
    int input_dim_;
    std::vector<int> units_;
    std::vector<std::unique_ptr<nn::RecurrentLayer>> layers_;
    nn::Dense out_;
    nn::ParamSet params_;
};

void fit(NeuralNet& net, const nn::Matrix& x, const std::vector<int>& labels, const std::vector<double>& weights,
         const NeuralTrainParams& p, uint64_t seed) {
    require(p.epochs >= 1 && p.batch_size >= 1 && p.learning_rate > 0.0, ErrorCode::InvalidArgument,
            "invalid neural training parameters");
    nn::Rng rng(seed ^ 0x5bd1e995ULL);
    nn::Adam::Options ao;
    ao.learning_rate = p.learning_rate;
    nn::Adam adam(net.params(), ao);
    std::vector<size_t> order(static_cast<size_t>(x.cols()));
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(p.batch_size)) {
            size_t end = std::min(order.size(), start + static_cast<size_t>(p.batch_size));
            nn::Matrix xb(x.rows(), static_cast<Eigen::Index>(end - start));
            std::vector<int> yb;
            std::vector<double> wb;
            for (size_t k = start; k < end; ++k) {
                xb.col(static_cast<Eigen::Index>(k - start)) = x.col(static_cast<Eigen::Index>(order[k]));
                yb.push_back(labels[order[k]]);
                wb.push_back(weights[order[k]]);
            }
            net.params().zero_grad();
            std::unique_ptr<ForwardCache> cache;
            nn::Matrix z = net.logits(xb, &cache);
            nn::Matrix dz;
            nn::softmax_cross_entropy(z, yb, wb, &dz);
            net.backward(*cache, dz);
            adam.step();
        }
    }
}

}  // namespace

std::unique_ptr<ClassifierBackend> train_mlp(const nn::Matrix& x, const std::vector<int>& labels,
                                             const std::vector<double>& weights, const DetectorConfig& cfg,
                                             uint64_t seed) {
    auto net = std::make_unique<Mlp>(static_cast<int>(x.rows()), cfg.mlp_hidden, seed);
    fit(*net, x, labels, weights, cfg.neural, seed);
    return net;
}

std::unique_ptr<ClassifierBackend> train_lstm(const nn::Matrix& x, const std::vector<int>& labels,
                                              const std::vector<double>& weights, const DetectorConfig& cfg,
                                              uint64_t seed) {
    auto net = std::make_unique<LstmNet>(static_cast<int>(x.rows()), cfg.lstm_units, seed);
    fit(*net, x, labels, weights, cfg.neural, seed);
    return net;
}

std::unique_ptr<ClassifierBackend> load_neural(const std::string& bytes) {
    nn::Checkpoint ck = nn::decode_checkpoint(bytes);
    std::unique_ptr<NeuralNet> net;
    if (ck.kind == kMlpKind)
        net = std::make_unique<Mlp>(ck.config.at("input_dim").get<int>(), ck.config.at("hidden").get<std::vector<int>>(), 0);
    else if (ck.kind == kLstmKind)
        net = std::make_unique<LstmNet>(ck.config.at("input_dim").get<int>(), ck.config.at("units").get<std::vector<int>>(), 0);
    else
        fail(ErrorCode::ParseError, "unknown detector network kind '" + ck.kind + "'");
    nn::restore_params(ck, net->params());
    return net;
}

}  // namespace ioev::ids::detail
