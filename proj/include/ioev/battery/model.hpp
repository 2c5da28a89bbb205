#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ioev/battery/telemetry.hpp"
#include "ioev/fl/federated.hpp"
#include "ioev/nn/layers.hpp"
#include "ioev/nn/recurrent.hpp"

namespace ioev::battery {

enum class Arch { lstm, bilstm, gru };
std::string to_string(Arch arch);
Arch parse_arch(const std::string& s);

// Defaults follow the multi-task hyperparameter table (2 layers, 64 units,
// heads (32, 1), dropout 0.3, lr 1e-3, batch 8, 20 rounds, mu 0.2, patience 10).
struct MultiTaskModelConfig {
    Arch arch = Arch::lstm;
    int num_layers = 2;
    int hidden_units = 64;
    int head_hidden = 32;
    double dropout = 0.3;
    double learning_rate = 0.001;
    int batch_size = 8;
    int rounds = 20;
    double mu_prox = 0.2;
    int patience = 10;
    double lambda_reg = 1.0;
    double soh_threshold = 0.5;
    int local_epochs = 1;
    double validation_fraction = 0.2;
    uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static MultiTaskModelConfig from_json(const nlohmann::json& j);
};

struct BatteryDiagnosis {
    double soh_anomaly_prob = 0.0;
    bool soh_label = false;
    double soc_estimate = 0.0;
    std::string model_id;
};

// A labelled window: SoH anomaly flag and regression target (capacity).
struct BatterySample {
    TelemetryWindow window;
    bool anomaly = false;
    double target = 0.0;
};
using BatteryDataset = std::vector<BatterySample>;

// Per-channel input statistics and regression-target statistics; inputs and
// targets are standardized with these before reaching the network.
struct Normalization {
    std::array<double, kNumChannels> input_mean{};
    std::array<double, kNumChannels> input_std{1, 1, 1, 1, 1, 1};
    double target_mean = 0.0;
    double target_std = 1.0;

    static Normalization fit(const BatteryDataset& data);
    nlohmann::json to_json() const;
    static Normalization from_json(const nlohmann::json& j);
};

// Network outputs for a batch: SoH probability and standardized regression value.
struct HeadOutputs {
    std::vector<double> prob;
    std::vector<double> reg;
};

struct HeadTargets {
    std::vector<double> label;  // 0 or 1
    std::vector<double> reg;    // standardized
};

// loss = mean BCE(prob, label) + lambda_reg * mean squared error(reg).
double multi_task_loss(const HeadOutputs& pred, const HeadTargets& target, double lambda_reg);

class MultiTaskModel {
public:
    MultiTaskModel(const MultiTaskModelConfig& cfg, const Normalization& norm);

    MultiTaskModel(const MultiTaskModel&) = delete;
    MultiTaskModel& operator=(const MultiTaskModel&) = delete;
    MultiTaskModel(MultiTaskModel&&) noexcept;
    MultiTaskModel& operator=(MultiTaskModel&&) noexcept;
    ~MultiTaskModel();

    // Fresh model with identical config, normalization and weights.
    MultiTaskModel clone() const;

    const MultiTaskModelConfig& config() const { return cfg_; }
    const Normalization& normalization() const { return norm_; }

    // Raw sequences are (steps × channels) matrices in physical units; any
    // positive step count is accepted.
    HeadOutputs forward(std::span<const nn::Matrix> sequences) const;
    // Accumulates d(multi_task_loss)/d(weights) and returns the loss. With a
    // non-null rng, dropout is active.
    double accumulate_gradients(std::span<const nn::Matrix> sequences, const HeadTargets& targets, nn::Rng* dropout_rng);

    BatteryDiagnosis infer(const TelemetryWindow& w) const;
    std::vector<BatteryDiagnosis> infer_batch(std::span<const TelemetryWindow> windows) const;
    // Anomaly probabilities for row-major flattened windows (see TelemetryWindow::flatten).
    std::vector<double> anomaly_probability_flat(const std::vector<std::vector<double>>& rows) const;

    std::vector<double> weights() const;
    void set_weights(std::span<const double> w);
    std::vector<double> gradients() const;
    void zero_gradients();
    size_t num_parameters() const;
    // Architecture plus a hash of the current weights; refreshed by set_weights.
    const std::string& model_id() const { return id_; }

    double standardize_target(double raw) const { return (raw - norm_.target_mean) / norm_.target_std; }
    double destandardize_target(double z) const { return z * norm_.target_std + norm_.target_mean; }

    std::string serialize() const;
    static MultiTaskModel deserialize(const std::string& bytes);
    void save(const std::string& path) const;
    static MultiTaskModel load(const std::string& path);

    // Direct parameter access for optimizers; callers finish with set_weights
    // so model_id tracks the final weights.
    nn::ParamSet& params();

private:
    struct Network;

    MultiTaskModelConfig cfg_;
    Normalization norm_;
    std::unique_ptr<Network> net_;
    std::string id_;
};

// Throws ModelNotLoaded when no model is present.
BatteryDiagnosis infer_diagnosis(const std::shared_ptr<const MultiTaskModel>& model, const TelemetryWindow& w);

nn::Matrix window_matrix(const TelemetryWindow& w);
HeadTargets targets_for(const MultiTaskModel& model, std::span<const BatterySample> samples);

// Objective minimized by train_local: multi_task_loss over the shard plus
// (mu_prox / 2) * ||w - w_global||^2.
double local_objective(const MultiTaskModel& model, const BatteryDataset& shard, std::span<const double> global_weights,
                       const MultiTaskModelConfig& cfg);
double proximal_term(std::span<const double> weights, std::span<const double> global_weights, double mu);

struct LocalTrainingReport {
    fl::ModelUpdate update;
    int epochs_run = 0;
    bool stopped_early = false;
    double best_validation_loss = 0.0;
};

// FedProx-style local optimisation starting from global_weights. Each
// minibatch takes an Adam step on the task loss followed by the closed-form
// proximal map w <- (w + lr*mu*w_global) / (1 + lr*mu), which stays stable for
// any mu. Early stopping tracks validation task loss with cfg.patience and
// restores the best epoch's weights.
LocalTrainingReport train_local(const MultiTaskModel& model, const BatteryDataset& shard,
                                std::span<const double> global_weights, const MultiTaskModelConfig& cfg,
                                const std::string& client_id = "local", int round = 0);

// Centralized training: train_local with mu = 0 for up to `epochs` epochs,
// keeping the weights of the best validation epoch.
void fit_centralized(MultiTaskModel& model, const BatteryDataset& data, int epochs, uint64_t seed);

class BatteryClient final : public fl::FederatedClient {
public:
    BatteryClient(std::string id, std::shared_ptr<const MultiTaskModel> reference, BatteryDataset shard,
                  MultiTaskModelConfig cfg);
    std::string id() const override { return id_; }
    fl::ModelUpdate train(std::span<const double> global_weights, int round) override;

private:
    std::string id_;
    std::shared_ptr<const MultiTaskModel> reference_;
    BatteryDataset shard_;
    MultiTaskModelConfig cfg_;
};

}  // namespace ioev::battery
