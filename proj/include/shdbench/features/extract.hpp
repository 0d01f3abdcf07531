#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "shdbench/data/types.hpp"
#include "shdbench/features/catalog.hpp"

namespace shdbench::features {

struct FeatureVector {
    std::vector<double> values;   // catalog order; missing entries are NaN
    std::vector<uint8_t> missing;

    void validate(const FeatureCatalog& cat) const;
};

/// Deterministic function of (waveform, catalog): no covariates, no RNG.
/// Fewer than two detected beats leaves timing and morphology entries
/// missing; spectral and inter-lead entries are computed regardless.
FeatureVector extract_features(const data::WaveformF& waveform, const FeatureCatalog& catalog);

struct FeatureMatrix {
    std::string catalog_version;
    std::vector<std::string> feature_ids;  // column order equals catalog order
    std::vector<std::string> record_ids;   // row order equals manifest order
    Eigen::MatrixXd values;                // N x F, missing entries NaN
    Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> missing;

    void validate() const;
    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
};

FeatureMatrix extract_matrix(const std::vector<data::WaveformF>& waveforms,
                             const std::vector<std::string>& record_ids,
                             const FeatureCatalog& catalog);

/// CSV with record_id then one column per catalog id; missing cells empty;
/// catalog version pinned in a header comment.
void write_feature_matrix_csv(const std::string& path, const FeatureMatrix& fm);
FeatureMatrix read_feature_matrix_csv(const std::string& path);

}  // namespace shdbench::features
