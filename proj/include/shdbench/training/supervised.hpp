#pragma once

#include <array>
#include <functional>
#include <memory>

#include "shdbench/models/common.hpp"
#include "shdbench/training/data_bundle.hpp"
#include "shdbench/training/optim.hpp"

namespace shdbench::training {

struct TrainConfig {
    models::AdaptationPolicy policy;  // echoed into logs and checkpoints
    models::FusionConfig fusion;
    double lr_backbone = 1e-4;
    double lr_head = 1e-3;
    int batch = 16;
    int max_epochs = 50;
    int patience = 5;  // epochs without a new best validation macro AUROC
    uint64_t seed = 0;  // batch order and dropout

    void validate() const;
};

/// Mean binary cross-entropy over every matrix entry, and its logit gradient.
double bce_mean(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& y);
Eigen::MatrixXd bce_grad(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& y);

/// Batched inference probabilities, sigmoid clamped strictly inside (0,1).
Eigen::MatrixXd predict_probabilities(models::NeuralModel& model, const SplitTensors& split,
                                      int batch);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_auroc = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = -1;
    double best_val_auroc = 0.0;
    int64_t trainable_params = 0;
};

/// Installs adapters when the policy carries a LoRA config (transformer
/// backbones only), then applies the freezing policy. Returns the budget.
models::ParamBudget configure_model(models::NeuralModel& model,
                                    const models::AdaptationPolicy& policy, uint64_t lora_seed);

/// Minimizes mean BCE with Adam (cosine decay over the full epoch budget) and
/// keeps the epoch with the best validation macro AUROC; the model holds that
/// epoch's parameters on return. endpoint >= 0 trains a single-logit model on
/// one label column. A model with zero trainable tensors is refused; a
/// non-finite batch loss restores the best parameters seen so far and raises
/// a divergence error. When the trunk is entirely frozen (and the fusion mode
/// allows it) training runs over cached pooled embeddings instead of
/// re-encoding waveforms every epoch.
TrainResult train_supervised(models::NeuralModel& model, const DataBundle& bundle,
                             const TrainConfig& cfg, int endpoint = -1);

using ModelFactory =
    std::function<std::unique_ptr<models::NeuralModel>(int out_dim, uint64_t init_seed)>;

/// All randomness for endpoint j flows from this seed, so retraining one
/// endpoint reproduces its model without touching the other five.
uint64_t suite_endpoint_seed(uint64_t seed, int endpoint);

/// Builds, configures and trains the single-logit model for one endpoint
/// exactly as train_binary_suite does.
std::pair<std::unique_ptr<models::NeuralModel>, TrainResult> train_suite_endpoint(
    const DataBundle& bundle, const ModelFactory& make_model,
    const models::AdaptationPolicy& policy, const TrainConfig& cfg, int endpoint);

struct BinarySuiteResult {
    std::vector<std::unique_ptr<models::NeuralModel>> models;  // one per endpoint
    std::array<TrainResult, kNumTargets> logs;
    int64_t single_trainable = 0;
    int64_t total_trainable = 0;  // exactly 6x single
};

/// Six independent single-logit trainings under one policy and config.
BinarySuiteResult train_binary_suite(const DataBundle& bundle, const ModelFactory& make_model,
                                     const models::AdaptationPolicy& policy,
                                     const TrainConfig& cfg);

/// Concatenates the per-endpoint probability columns into an N x 6 matrix.
Eigen::MatrixXd predict_binary_suite(
    const std::vector<std::unique_ptr<models::NeuralModel>>& suite, const SplitTensors& split,
    int batch);

}  // namespace shdbench::training
