#pragma once

#include <array>
#include <string>
#include <vector>

#include "shdbench/common.hpp"

namespace shdbench::features {

inline constexpr std::array<const char*, kLeads> kLeadNames = {
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6"};

enum class FeatureCategory { timing_variability, morphology, spectral, inter_lead };
enum class Aggregation { mean, std, p5, p95 };

/// How a feature responds to uniform amplitude rescaling of the waveform:
/// amplitude features scale with it, time and dimensionless features do not.
enum class ScaleClass { amplitude, time, dimensionless };

const char* to_string(FeatureCategory c);
const char* to_string(Aggregation a);
const char* to_string(ScaleClass s);
FeatureCategory category_from_string(const std::string& s);
Aggregation aggregation_from_string(const std::string& s);
ScaleClass scale_class_from_string(const std::string& s);

struct FeatureDescriptor {
    std::string id;
    FeatureCategory category = FeatureCategory::timing_variability;
    std::string lead;  // lead name, "I:II" pair, or "global"
    Aggregation aggregation = Aggregation::mean;
    ScaleClass scale_class = ScaleClass::dimensionless;
};

struct FeatureCatalog {
    std::string version;
    std::vector<FeatureDescriptor> entries;

    /// Unique non-empty ids, non-empty catalog.
    void validate() const;
    int size() const { return static_cast<int>(entries.size()); }
    /// Index of id, or -1.
    int index_of(const std::string& id) const;
};

inline constexpr int kDefaultCatalogSize = 166;

/// 24 timing/variability, 96 morphology, 36 spectral, 10 inter-lead.
FeatureCatalog default_catalog();

void write_catalog(const std::string& path, const FeatureCatalog& cat);
FeatureCatalog read_catalog(const std::string& path);

}  // namespace shdbench::features
