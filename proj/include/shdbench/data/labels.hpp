#pragma once

#include "shdbench/data/types.hpp"

namespace shdbench::data {

struct DerivedLabels {
    LabelVector labels;
    LabelMissing missing;  // only populated in non-strict mode
};

/// Applies the endpoint rules to raw echo measurements. Comparisons are
/// inclusive: lvef <= 45.0, max(ivs, lvpw) >= 1.3, grade >= moderate.
/// strict: a measurement needed by a rule is absent -> data error.
/// non-strict: the bit is 0 and the missingness flag is set.
DerivedLabels derive_labels(const EchoMeasurements& m, const TargetSpec& spec, bool strict);

}  // namespace shdbench::data
