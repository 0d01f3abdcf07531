#pragma once

#include <string>

#include "shdbench/data/types.hpp"
#include "shdbench/eval/metrics.hpp"

namespace shdbench::eval {

// Predictions CSV. Header: record_id followed by the six endpoint names in
// fixed order; model_id and config_hash travel as "# key=value" comment
// lines. Probabilities round-trip at full precision.

void write_predictions_csv(const std::string& path, const PredictionSet& pred,
                           const data::TargetSpec& spec);

PredictionSet read_predictions_csv(const std::string& path, const data::TargetSpec& spec);

}  // namespace shdbench::eval
