#pragma once

#include <string>

#include "shdbench/data/types.hpp"

namespace shdbench::data {

/// Converts a public-release directory into the native manifest + store pair.
/// Expected layout:
///   <release>/metadata.csv   one row per record, aligned with waveforms.npy
///   <release>/waveforms.npy  float array shaped (N, 12, 2500), C order
/// Column aliases are tolerated (ecg_id for record_id, partition for split,
/// validation for val, endpoint long names for y_* columns, M/F for sex).
/// Signals are copied as-is; the release is already preprocessed.
CohortManifest import_release(const std::string& release_dir, const std::string& out_store_path);

}  // namespace shdbench::data
