#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "shdbench/data/types.hpp"
#include "shdbench/features/gbdt.hpp"

namespace shdbench::features {

/// Average ranks mapped to [0,1]; ties share a rank, so any strictly
/// monotone transform of the raw scores leaves the output unchanged.
std::vector<double> rank_normalize(const std::vector<double>& raw);

struct FeatureRanking {
    std::vector<double> mi;           // raw, averaged over endpoints
    std::vector<double> gain;         // raw split gain, averaged over endpoints
    std::vector<double> permutation;  // AUROC drop, averaged over endpoints
    std::vector<double> combined;     // 0.30 mi + 0.40 gain + 0.30 permutation, rank-normalized
    std::vector<int> order;           // feature indices, best first

    void validate(int n_features) const;
};

/// Three importance sources per feature, combined with fixed weights after
/// per-source rank normalization. Mutual information and the permutation
/// drop are computed on (X, labels); gain comes from the fitted suite.
FeatureRanking rank_features(const Eigen::MatrixXd& X,
                             const std::vector<data::LabelVector>& labels, const OvrGbdt& suite,
                             uint64_t seed);

struct TopkPoint {
    int k = 0;
    double mean_val_auroc = 0.0;
};

/// Retrains the suite per k keeping only the top-k ranked features (others
/// forced missing, column positions unchanged, so k = all columns reproduces
/// the full-feature model exactly).
std::vector<TopkPoint> topk_sensitivity(const Eigen::MatrixXd& x_train,
                                        const std::vector<data::LabelVector>& y_train,
                                        const Eigen::MatrixXd& x_val,
                                        const std::vector<data::LabelVector>& y_val,
                                        const FeatureRanking& ranking,
                                        const std::vector<int>& k_grid, const GbdtParams& params,
                                        uint64_t seed);

}  // namespace shdbench::features
