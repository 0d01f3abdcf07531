#pragma once

#include <string>
#include <vector>

#include "shdbench/data/preprocess.hpp"
#include "shdbench/data/types.hpp"
#include "shdbench/models/common.hpp"

namespace shdbench::training {

/// One split, ready to batch: waveforms filtered/clipped/normalized and
/// covariates standardized, both with statistics fitted on the train split.
struct SplitTensors {
    std::vector<data::WaveformF> waves;
    Eigen::MatrixXd cov;  // N x 7
    std::vector<data::LabelVector> labels;
    std::vector<std::string> record_ids;

    int n() const { return static_cast<int>(waves.size()); }
};

struct DataBundle {
    SplitTensors train, val, test;
    data::PreprocessStats wave_stats;      // train split only
    Eigen::RowVectorXd cov_mean, cov_std;  // train covariate standardization
};

/// waveforms must be row-aligned with manifest.rows; the train split must be
/// non-empty because every statistic is fitted there.
DataBundle build_bundle(const data::CohortManifest& manifest,
                        const std::vector<data::WaveformF>& waveforms);

/// Assembles a training batch from split rows. endpoint < 0 packs all six
/// label columns; otherwise y is that single endpoint column.
models::Batch make_batch(const SplitTensors& split, const std::vector<int>& idx,
                         int endpoint = -1);

}  // namespace shdbench::training
