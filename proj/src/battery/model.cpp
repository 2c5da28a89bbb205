#include "ioev/battery/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <numeric>

#include "ioev/core/error.hpp"
#include "ioev/core/text.hpp"
#include "ioev/nn/checkpoint.hpp"
#include "ioev/nn/loss.hpp"
#include "ioev/nn/optim.hpp"

namespace ioev::battery {

namespace {

constexpr const char* kCheckpointKind = "ioev.battery.multitask";

nn::CellKind cell_for(Arch a) { return a == Arch::gru ? nn::CellKind::gru : nn::CellKind::lstm; }

std::string fingerprint(std::span<const double> w) {
    uint64_t h = 1469598103934665603ULL;
    for (double v : w) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 1099511628211ULL;
        }
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

double safe_std(double var) {
    double s = std::sqrt(std::max(var, 0.0));
    return s < 1e-12 ? 1.0 : s;
}

}  // namespace

std::string to_string(Arch arch) {
    switch (arch) {
        case Arch::lstm: return "lstm";
        case Arch::bilstm: return "bilstm";
        case Arch::gru: return "gru";
    }
    return "?";
}

Arch parse_arch(const std::string& s) {
    std::string l = to_lower(s);
    if (l == "lstm") return Arch::lstm;
    if (l == "bilstm") return Arch::bilstm;
    if (l == "gru") return Arch::gru;
    fail(ErrorCode::InvalidArgument, "unknown architecture '" + s + "'");
}

void MultiTaskModelConfig::validate() const {
    require(num_layers >= 1 && hidden_units >= 1 && head_hidden >= 1, ErrorCode::InvalidArgument,
            "layer sizes must be positive");
    require(dropout >= 0.0 && dropout < 1.0, ErrorCode::InvalidArgument, "dropout must be in [0, 1)");
    require(learning_rate > 0.0, ErrorCode::InvalidArgument, "learning_rate must be positive");
    require(batch_size >= 1 && rounds >= 1 && local_epochs >= 1, ErrorCode::InvalidArgument,
            "batch_size, rounds and local_epochs must be positive");
    require(mu_prox >= 0.0, ErrorCode::InvalidArgument, "mu_prox must be non-negative");
    require(lambda_reg > 0.0, ErrorCode::InvalidArgument, "lambda_reg must be positive");
    require(patience >= 1, ErrorCode::InvalidArgument, "patience must be positive");
    require(soh_threshold >= 0.0 && soh_threshold <= 1.0, ErrorCode::InvalidArgument,
            "soh_threshold must be in [0, 1]");
    require(validation_fraction >= 0.0 && validation_fraction < 1.0, ErrorCode::InvalidArgument,
            "validation_fraction must be in [0, 1)");
}

nlohmann::json MultiTaskModelConfig::to_json() const {
    return {{"arch", to_string(arch)},
            {"num_layers", num_layers},
            {"hidden_units", hidden_units},
            {"head_dims", {head_hidden, 1}},
            {"dropout", dropout},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"rounds", rounds},
            {"mu_prox", mu_prox},
            {"patience", patience},
            {"lambda_reg", lambda_reg},
            {"soh_threshold", soh_threshold},
            {"local_epochs", local_epochs},
            {"validation_fraction", validation_fraction},
            {"seed", seed}};
}

MultiTaskModelConfig MultiTaskModelConfig::from_json(const nlohmann::json& j) {
    MultiTaskModelConfig c;
    if (j.contains("arch")) c.arch = parse_arch(j.at("arch").get<std::string>());
    c.num_layers = j.value("num_layers", c.num_layers);
    c.hidden_units = j.value("hidden_units", c.hidden_units);
    if (j.contains("head_dims")) c.head_hidden = j.at("head_dims").at(0).get<int>();
    c.dropout = j.value("dropout", c.dropout);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.rounds = j.value("rounds", c.rounds);
    c.mu_prox = j.value("mu_prox", c.mu_prox);
    c.patience = j.value("patience", c.patience);
    c.lambda_reg = j.value("lambda_reg", c.lambda_reg);
    c.soh_threshold = j.value("soh_threshold", c.soh_threshold);
    c.local_epochs = j.value("local_epochs", c.local_epochs);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

Normalization Normalization::fit(const BatteryDataset& data) {
    require(!data.empty(), ErrorCode::EmptyShard, "cannot fit normalization on an empty dataset");
    Normalization n;
    std::array<double, kNumChannels> sum{}, sq{};
    double count = 0.0;
    double tsum = 0.0, tsq = 0.0;
    for (const BatterySample& s : data) {
        for (const Frame& f : s.window.frames()) {
            auto ch = f.channels();
            for (size_t c = 0; c < kNumChannels; ++c) {
                sum[c] += ch[c];
                sq[c] += ch[c] * ch[c];
            }
            count += 1.0;
        }
        tsum += s.target;
        tsq += s.target * s.target;
    }
    for (size_t c = 0; c < kNumChannels; ++c) {
        n.input_mean[c] = sum[c] / count;
        n.input_std[c] = safe_std(sq[c] / count - n.input_mean[c] * n.input_mean[c]);
    }
    double m = static_cast<double>(data.size());
    n.target_mean = tsum / m;
    n.target_std = safe_std(tsq / m - n.target_mean * n.target_mean);
    return n;
}

nlohmann::json Normalization::to_json() const {
    return {{"input_mean", input_mean}, {"input_std", input_std}, {"target_mean", target_mean},
            {"target_std", target_std}};
}

Normalization Normalization::from_json(const nlohmann::json& j) {
    Normalization n;
    n.input_mean = j.at("input_mean").get<std::array<double, kNumChannels>>();
    n.input_std = j.at("input_std").get<std::array<double, kNumChannels>>();
    n.target_mean = j.at("target_mean").get<double>();
    n.target_std = j.at("target_std").get<double>();
    return n;
}

double multi_task_loss(const HeadOutputs& pred, const HeadTargets& target, double lambda_reg) {
    const size_t n = pred.prob.size();
    require(n > 0 && pred.reg.size() == n && target.label.size() == n && target.reg.size() == n,
            ErrorCode::ShapeMismatch, "prediction and target batches must have the same non-zero size");
    double bce = 0.0, mse = 0.0;
    for (size_t i = 0; i < n; ++i) {
        bce += nn::binary_cross_entropy(pred.prob[i], target.label[i]);
        double e = pred.reg[i] - target.reg[i];
        mse += e * e;
    }
    return bce / n + lambda_reg * mse / n;
}

struct MultiTaskModel::Network {
    nn::RecurrentStack encoder;
    nn::Dense cls_hidden, cls_out, reg_hidden, reg_out;
    nn::ParamSet params;

    Network(const MultiTaskModelConfig& cfg) {
        nn::Rng rng(cfg.seed);
        nn::RecurrentStack::Options o;
        o.cell = cell_for(cfg.arch);
        o.bidirectional = cfg.arch == Arch::bilstm;
        o.num_layers = cfg.num_layers;
        o.hidden = cfg.hidden_units;
        o.dropout = cfg.dropout;
        encoder = nn::RecurrentStack("encoder", static_cast<int>(kNumChannels), o, rng);
        int s = encoder.summary_dim();
        cls_hidden = nn::Dense("soh.hidden", s, cfg.head_hidden, rng);
        cls_out = nn::Dense("soh.out", cfg.head_hidden, 1, rng);
        reg_hidden = nn::Dense("soc.hidden", s, cfg.head_hidden, rng);
        reg_out = nn::Dense("soc.out", cfg.head_hidden, 1, rng);
        encoder.collect(params);
        cls_hidden.collect(params);
        cls_out.collect(params);
        reg_hidden.collect(params);
        reg_out.collect(params);
    }
};

MultiTaskModel::MultiTaskModel(const MultiTaskModelConfig& cfg, const Normalization& norm)
    : cfg_(cfg), norm_(norm), net_(std::make_unique<Network>(cfg)) {
    cfg_.validate();
    id_ = "battery-" + to_string(cfg_.arch) + "-" + fingerprint(net_->params.flatten());
}

MultiTaskModel::MultiTaskModel(MultiTaskModel&&) noexcept = default;
MultiTaskModel& MultiTaskModel::operator=(MultiTaskModel&&) noexcept = default;
MultiTaskModel::~MultiTaskModel() = default;

MultiTaskModel MultiTaskModel::clone() const {
    MultiTaskModel m(cfg_, norm_);
    m.set_weights(weights());
    return m;
}

nn::ParamSet& MultiTaskModel::params() { return net_->params; }

std::vector<double> MultiTaskModel::weights() const { return net_->params.flatten(); }

void MultiTaskModel::set_weights(std::span<const double> w) {
    net_->params.assign(w);
    id_ = "battery-" + to_string(cfg_.arch) + "-" + fingerprint(w);
}

std::vector<double> MultiTaskModel::gradients() const { return net_->params.flatten_grads(); }
void MultiTaskModel::zero_gradients() { net_->params.zero_grad(); }
size_t MultiTaskModel::num_parameters() const { return net_->params.size(); }

nn::Matrix window_matrix(const TelemetryWindow& w) {
    const auto& frames = w.frames();
    nn::Matrix m(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(kNumChannels));
    for (size_t t = 0; t < frames.size(); ++t) {
        auto ch = frames[t].channels();
        for (size_t c = 0; c < kNumChannels; ++c) m(t, c) = ch[c];
    }
    return m;
}

namespace {

// Groups sequence indices by step count so each group runs as one batch.
std::map<Eigen::Index, std::vector<size_t>> group_by_length(std::span<const nn::Matrix> seqs) {
    std::map<Eigen::Index, std::vector<size_t>> groups;
    for (size_t i = 0; i < seqs.size(); ++i) {
        require(seqs[i].rows() >= 1 && seqs[i].cols() == static_cast<Eigen::Index>(kNumChannels),
                ErrorCode::ShapeMismatch, "sequence must be (steps >= 1) x 6");
        groups[seqs[i].rows()].push_back(i);
    }
    return groups;
}

nn::Sequence batch_sequence(std::span<const nn::Matrix> seqs, const std::vector<size_t>& idx, const Normalization& n) {
    const Eigen::Index steps = seqs[idx.front()].rows();
    nn::Sequence out(static_cast<size_t>(steps), nn::Matrix(kNumChannels, static_cast<Eigen::Index>(idx.size())));
    for (size_t b = 0; b < idx.size(); ++b) {
        const nn::Matrix& s = seqs[idx[b]];
        for (Eigen::Index t = 0; t < steps; ++t)
            for (size_t c = 0; c < kNumChannels; ++c)
                out[t](c, b) = (s(t, c) - n.input_mean[c]) / n.input_std[c];
    }
    return out;
}

}  // namespace

HeadOutputs MultiTaskModel::forward(std::span<const nn::Matrix> sequences) const {
    HeadOutputs out;
    out.prob.resize(sequences.size());
    out.reg.resize(sequences.size());
    for (const auto& [steps, idx] : group_by_length(sequences)) {
        nn::Matrix s = net_->encoder.encode(batch_sequence(sequences, idx, norm_), nullptr, nullptr);
        nn::Matrix p = nn::sigmoid(net_->cls_out.forward(nn::relu(net_->cls_hidden.forward(s))));
        nn::Matrix r = net_->reg_out.forward(nn::relu(net_->reg_hidden.forward(s)));
        for (size_t b = 0; b < idx.size(); ++b) {
            out.prob[idx[b]] = p(0, b);
            out.reg[idx[b]] = r(0, b);
        }
    }
    return out;
}

double MultiTaskModel::accumulate_gradients(std::span<const nn::Matrix> sequences, const HeadTargets& targets,
                                            nn::Rng* dropout_rng) {
    const size_t n = sequences.size();
    require(n > 0 && targets.label.size() == n && targets.reg.size() == n, ErrorCode::ShapeMismatch,
            "targets must match the number of sequences");
    HeadOutputs out;
    out.prob.resize(n);
    out.reg.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    Network& net = *net_;
    for (const auto& [steps, idx] : group_by_length(sequences)) {
        nn::RecurrentStack::Cache cache;
        nn::Matrix s = net.encoder.encode(batch_sequence(sequences, idx, norm_), &cache, dropout_rng);
        nn::Matrix zc = net.cls_hidden.forward(s);
        nn::Matrix ac = nn::relu(zc);
        nn::Matrix p = nn::sigmoid(net.cls_out.forward(ac));
        nn::Matrix zr = net.reg_hidden.forward(s);
        nn::Matrix ar = nn::relu(zr);
        nn::Matrix r = net.reg_out.forward(ar);

        const Eigen::Index B = static_cast<Eigen::Index>(idx.size());
        nn::Matrix dlogit(1, B), dr(1, B);
        for (Eigen::Index b = 0; b < B; ++b) {
            size_t i = idx[b];
            double pb = p(0, b);
            out.prob[i] = pb;
            out.reg[i] = r(0, b);
            // Clipped probabilities contribute no gradient, matching the clipped loss.
            bool clipped = pb < nn::kProbClip || pb > 1.0 - nn::kProbClip;
            dlogit(0, b) = clipped ? 0.0 : (pb - targets.label[i]) * inv_n;
            dr(0, b) = 2.0 * cfg_.lambda_reg * (r(0, b) - targets.reg[i]) * inv_n;
        }
        nn::Matrix dac = net.cls_out.backward(ac, dlogit);
        nn::Matrix dzc = dac.cwiseProduct((zc.array() > 0.0).cast<double>().matrix());
        nn::Matrix ds = net.cls_hidden.backward(s, dzc);
        nn::Matrix dar = net.reg_out.backward(ar, dr);
        nn::Matrix dzr = dar.cwiseProduct((zr.array() > 0.0).cast<double>().matrix());
        ds += net.reg_hidden.backward(s, dzr);
        net.encoder.backward(cache, ds);
    }
    return multi_task_loss(out, targets, cfg_.lambda_reg);
}

std::vector<BatteryDiagnosis> MultiTaskModel::infer_batch(std::span<const TelemetryWindow> windows) const {
    std::vector<nn::Matrix> seqs;
    seqs.reserve(windows.size());
    for (const TelemetryWindow& w : windows) seqs.push_back(window_matrix(w));
    HeadOutputs out = forward(seqs);
    std::vector<BatteryDiagnosis> result(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        BatteryDiagnosis& d = result[i];
        d.soh_anomaly_prob = std::clamp(out.prob[i], 0.0, 1.0);
        d.soh_label = d.soh_anomaly_prob >= cfg_.soh_threshold;
        d.soc_estimate = destandardize_target(out.reg[i]);
        d.model_id = id_;
    }
    return result;
}

BatteryDiagnosis MultiTaskModel::infer(const TelemetryWindow& w) const {
    return infer_batch(std::span<const TelemetryWindow>(&w, 1)).front();
}

std::vector<double> MultiTaskModel::anomaly_probability_flat(const std::vector<std::vector<double>>& rows) const {
    std::vector<nn::Matrix> seqs;
    seqs.reserve(rows.size());
    for (const auto& r : rows) {
        require(!r.empty() && r.size() % kNumChannels == 0, ErrorCode::ShapeMismatch,
                "flattened window length must be a multiple of 6");
        const Eigen::Index steps = static_cast<Eigen::Index>(r.size() / kNumChannels);
        nn::Matrix m(steps, static_cast<Eigen::Index>(kNumChannels));
        for (Eigen::Index t = 0; t < steps; ++t)
            for (size_t c = 0; c < kNumChannels; ++c) m(t, c) = r[t * kNumChannels + c];
        seqs.push_back(std::move(m));
    }
    return forward(seqs).prob;
}

std::string MultiTaskModel::serialize() const {
    nlohmann::json cfg = {{"model", cfg_.to_json()}, {"normalization", norm_.to_json()}};
    return nn::encode_checkpoint(kCheckpointKind, cfg, net_->params);
}

MultiTaskModel MultiTaskModel::deserialize(const std::string& bytes) {
    nn::Checkpoint ck = nn::decode_checkpoint(bytes);
    require(ck.kind == kCheckpointKind, ErrorCode::ParseError, "checkpoint kind '" + ck.kind + "' is not a battery model");
    MultiTaskModel m(MultiTaskModelConfig::from_json(ck.config.at("model")),
                     Normalization::from_json(ck.config.at("normalization")));
    nn::restore_params(ck, m.net_->params);
    m.set_weights(m.weights());
    return m;
}

void MultiTaskModel::save(const std::string& path) const { write_file(path, serialize()); }

MultiTaskModel MultiTaskModel::load(const std::string& path) { return deserialize(read_file(path)); }

BatteryDiagnosis infer_diagnosis(const std::shared_ptr<const MultiTaskModel>& model, const TelemetryWindow& w) {
    require(model != nullptr, ErrorCode::ModelNotLoaded, "no battery model loaded");
    return model->infer(w);
}

HeadTargets targets_for(const MultiTaskModel& model, std::span<const BatterySample> samples) {
    HeadTargets t;
    t.label.reserve(samples.size());
    t.reg.reserve(samples.size());
    for (const BatterySample& s : samples) {
        t.label.push_back(s.anomaly ? 1.0 : 0.0);
        t.reg.push_back(model.standardize_target(s.target));
    }
    return t;
}

double proximal_term(std::span<const double> weights, std::span<const double> global_weights, double mu) {
    require(weights.size() == global_weights.size(), ErrorCode::DimensionMismatch,
            "weight vectors differ in length");
    double sq = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
        double d = weights[i] - global_weights[i];
        sq += d * d;
    }
    return 0.5 * mu * sq;
}

namespace {

constexpr size_t kEvalBatch = 64;

double task_loss(const MultiTaskModel& model, const std::vector<nn::Matrix>& seqs, const HeadTargets& t,
                 const std::vector<size_t>& idx) {
    double total = 0.0;
    for (size_t start = 0; start < idx.size(); start += kEvalBatch) {
        size_t end = std::min(idx.size(), start + kEvalBatch);
        std::vector<nn::Matrix> batch;
        HeadTargets bt;
        for (size_t k = start; k < end; ++k) {
            batch.push_back(seqs[idx[k]]);
            bt.label.push_back(t.label[idx[k]]);
            bt.reg.push_back(t.reg[idx[k]]);
        }
        total += multi_task_loss(model.forward(batch), bt, model.config().lambda_reg) * (end - start);
    }
    return total / static_cast<double>(idx.size());
}

}  // namespace

double local_objective(const MultiTaskModel& model, const BatteryDataset& shard, std::span<const double> global_weights,
                       const MultiTaskModelConfig& cfg) {
    require(!shard.empty(), ErrorCode::EmptyShard, "shard is empty");
    std::vector<nn::Matrix> seqs;
    for (const BatterySample& s : shard) seqs.push_back(window_matrix(s.window));
    std::vector<size_t> idx(shard.size());
    std::iota(idx.begin(), idx.end(), 0);
    double loss = task_loss(model, seqs, targets_for(model, shard), idx);
    return loss + proximal_term(model.weights(), global_weights, cfg.mu_prox);
}

LocalTrainingReport train_local(const MultiTaskModel& model, const BatteryDataset& shard,
                                std::span<const double> global_weights, const MultiTaskModelConfig& cfg,
                                const std::string& client_id, int round) {
    require(!shard.empty(), ErrorCode::EmptyShard, "shard is empty");
    cfg.validate();
    require(global_weights.size() == model.num_parameters(), ErrorCode::DimensionMismatch,
            "global weights do not match the model");

    MultiTaskModel local = model.clone();
    local.set_weights(global_weights);

    nn::Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(round + 1)));
    std::vector<nn::Matrix> seqs;
    seqs.reserve(shard.size());
    for (const BatterySample& s : shard) seqs.push_back(window_matrix(s.window));
    HeadTargets targets = targets_for(local, shard);

    std::vector<size_t> order(shard.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    size_t n_val = shard.size() >= 5 ? static_cast<size_t>(cfg.validation_fraction * shard.size()) : 0;
    std::vector<size_t> val(order.begin(), order.begin() + n_val);
    std::vector<size_t> train(order.begin() + n_val, order.end());
    if (val.empty()) val = train;

    nn::Adam::Options ao;
    ao.learning_rate = cfg.learning_rate;
    nn::Adam adam(local.params(), ao);
    const double a = cfg.learning_rate * cfg.mu_prox;
    const Eigen::Map<const Eigen::VectorXd> wg(global_weights.data(), static_cast<Eigen::Index>(global_weights.size()));

    LocalTrainingReport report;
    std::vector<double> best = local.weights();
    double best_loss = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        for (size_t start = 0; start < train.size(); start += static_cast<size_t>(cfg.batch_size)) {
            size_t end = std::min(train.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<nn::Matrix> batch;
            HeadTargets bt;
            for (size_t k = start; k < end; ++k) {
                batch.push_back(seqs[train[k]]);
                bt.label.push_back(targets.label[train[k]]);
                bt.reg.push_back(targets.reg[train[k]]);
            }
            local.zero_gradients();
            local.accumulate_gradients(batch, bt, &rng);
            adam.step();
            if (a > 0.0) {
                std::vector<double> w = local.weights();
                Eigen::Map<Eigen::VectorXd> wm(w.data(), static_cast<Eigen::Index>(w.size()));
                wm = (wm + a * wg) / (1.0 + a);
                local.params().assign(w);
            }
        }
        report.epochs_run = epoch + 1;
        double v = task_loss(local, seqs, targets, val);
        if (v < best_loss) {
            best_loss = v;
            best = local.weights();
            stale = 0;
        } else if (++stale >= cfg.patience) {
            report.stopped_early = epoch + 1 < cfg.local_epochs;
            break;
        }
    }

    report.best_validation_loss = best_loss;
    report.update.weight_delta.resize(best.size());
    for (size_t i = 0; i < best.size(); ++i) report.update.weight_delta[i] = best[i] - global_weights[i];
    report.update.num_samples = shard.size();
    report.update.client_id = client_id;
    report.update.round = round;
    return report;
}

void fit_centralized(MultiTaskModel& model, const BatteryDataset& data, int epochs, uint64_t seed) {
    MultiTaskModelConfig cfg = model.config();
    cfg.mu_prox = 0.0;
    cfg.local_epochs = epochs;
    cfg.seed = seed;
    std::vector<double> w = model.weights();
    LocalTrainingReport r = train_local(model, data, w, cfg);
    for (size_t i = 0; i < w.size(); ++i) w[i] += r.update.weight_delta[i];
    model.set_weights(w);
}

BatteryClient::BatteryClient(std::string id, std::shared_ptr<const MultiTaskModel> reference, BatteryDataset shard,
                             MultiTaskModelConfig cfg)
    : id_(std::move(id)), reference_(std::move(reference)), shard_(std::move(shard)), cfg_(cfg) {
    require(reference_ != nullptr, ErrorCode::ModelNotLoaded, "client needs a reference model");
}

fl::ModelUpdate BatteryClient::train(std::span<const double> global_weights, int round) {
    return train_local(*reference_, shard_, global_weights, cfg_, id_, round).update;
}

}  // namespace ioev::battery
