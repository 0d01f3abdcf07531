#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "shdbench/data/types.hpp"

namespace shdbench::features {

struct GbdtParams {
    int n_trees = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    double reg_lambda = 1.0;        // L2 on leaf weights
    double gamma = 0.0;             // per-split penalty
    double min_child_weight = 1.0;  // minimum hessian sum per side
    double subsample = 1.0;         // row fraction per tree
    double colsample = 1.0;         // feature fraction per tree

    void validate() const;
};

struct GbdtNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    bool default_left = true;  // where missing values go
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf weight, shrinkage already applied
};

struct GbdtTree {
    std::vector<GbdtNode> nodes;  // node 0 is the root
    double predict(const double* row) const;
};

/// Second-order logistic boosting with exact greedy splits and learned
/// default directions for missing values. Missing entries are NaN.
struct GbdtModel {
    double base_score = 0.0;  // raw logit
    std::vector<GbdtTree> trees;
    std::vector<double> feature_gain;  // accumulated split gain per feature

    double predict_raw(const double* row) const;
    /// Sigmoid of the raw score, clamped inside (0,1).
    double predict_proba(const double* row) const;
    Eigen::VectorXd predict_proba(const Eigen::MatrixXd& X) const;
};

GbdtModel train_gbdt(const Eigen::MatrixXd& X, const std::vector<uint8_t>& y,
                     const GbdtParams& params, uint64_t seed);

/// Seed for endpoint j inside a suite seeded with `seed`. Retraining one
/// endpoint alone with this seed reproduces the suite's model exactly.
uint64_t ovr_endpoint_seed(uint64_t seed, int endpoint);

/// One independent binary model per endpoint, each on its own substream.
struct OvrGbdt {
    std::array<GbdtModel, kNumTargets> models;
    GbdtParams params;
    uint64_t seed = 0;
};

OvrGbdt train_gbdt_ovr(const Eigen::MatrixXd& X, const std::vector<data::LabelVector>& labels,
                       const GbdtParams& params, uint64_t seed);

/// N x 6 probability matrix in endpoint order.
Eigen::MatrixXd predict_ovr(const OvrGbdt& suite, const Eigen::MatrixXd& X);

struct GbdtSearchSpace {
    std::vector<int> n_trees = {200};
    std::vector<int> max_depth = {3};
    std::vector<double> learning_rate = {0.1};
    std::vector<double> reg_lambda = {1.0};
    std::vector<double> gamma = {0.0};
    std::vector<double> min_child_weight = {1.0};
    std::vector<double> subsample = {1.0};
    std::vector<double> colsample = {1.0};
};

struct TuneTrial {
    GbdtParams params;
    double mean_val_auroc = 0.0;
};

struct TuneResult {
    GbdtParams best;
    double best_score = 0.0;
    std::vector<TuneTrial> trials;  // every trial, in draw order
};

/// Random search over the candidate grid; maximizes mean validation AUROC
/// across endpoints with a defined value.
TuneResult tune_gbdt(const GbdtSearchSpace& space, int trials, uint64_t seed,
                     const Eigen::MatrixXd& x_train, const std::vector<data::LabelVector>& y_train,
                     const Eigen::MatrixXd& x_val, const std::vector<data::LabelVector>& y_val);

}  // namespace shdbench::features
