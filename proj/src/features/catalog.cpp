#include "shdbench/features/catalog.hpp"

#include <unordered_set>

#include "shdbench/io_util.hpp"

namespace shdbench::features {

const char* to_string(FeatureCategory c) {
    switch (c) {
        case FeatureCategory::timing_variability: return "timing_variability";
        case FeatureCategory::morphology: return "morphology";
        case FeatureCategory::spectral: return "spectral";
        case FeatureCategory::inter_lead: return "inter_lead";
    }
    return "timing_variability";
}

const char* to_string(Aggregation a) {
    switch (a) {
        case Aggregation::mean: return "mean";
        case Aggregation::std: return "std";
        case Aggregation::p5: return "p5";
        case Aggregation::p95: return "p95";
    }
    return "mean";
}

const char* to_string(ScaleClass s) {
    switch (s) {
        case ScaleClass::amplitude: return "amplitude";
        case ScaleClass::time: return "time";
        case ScaleClass::dimensionless: return "dimensionless";
    }
    return "dimensionless";
}

FeatureCategory category_from_string(const std::string& s) {
    if (s == "timing_variability") return FeatureCategory::timing_variability;
    if (s == "morphology") return FeatureCategory::morphology;
    if (s == "spectral") return FeatureCategory::spectral;
    if (s == "inter_lead") return FeatureCategory::inter_lead;
    throw Error(ErrCat::format, "unknown feature category: " + s);
}

Aggregation aggregation_from_string(const std::string& s) {
    if (s == "mean") return Aggregation::mean;
    if (s == "std") return Aggregation::std;
    if (s == "p5") return Aggregation::p5;
    if (s == "p95") return Aggregation::p95;
    throw Error(ErrCat::format, "unknown aggregation: " + s);
}

ScaleClass scale_class_from_string(const std::string& s) {
    if (s == "amplitude") return ScaleClass::amplitude;
    if (s == "time") return ScaleClass::time;
    if (s == "dimensionless") return ScaleClass::dimensionless;
    throw Error(ErrCat::format, "unknown scale class: " + s);
}

void FeatureCatalog::validate() const {
    require(!entries.empty(), ErrCat::data, "feature catalog is empty");
    require(!version.empty(), ErrCat::data, "feature catalog has no version");
    std::unordered_set<std::string> seen;
    for (const auto& e : entries) {
        require(!e.id.empty(), ErrCat::data, "feature catalog entry with empty id");
        require(seen.insert(e.id).second, ErrCat::data, "duplicate feature id: " + e.id);
    }
}

int FeatureCatalog::index_of(const std::string& id) const {
    for (size_t i = 0; i < entries.size(); ++i)
        if (entries[i].id == id) return static_cast<int>(i);
    return -1;
}

FeatureCatalog default_catalog() {
    FeatureCatalog cat;
    cat.version = "fcat-1";
    constexpr std::array<Aggregation, 4> kAllAggs = {Aggregation::mean, Aggregation::std,
                                                     Aggregation::p5, Aggregation::p95};

    // Timing and variability: beat-interval series, aggregated four ways.
    const std::array<std::pair<const char*, ScaleClass>, 6> timing = {{
        {"rr_s", ScaleClass::time},
        {"rr_abs_diff_s", ScaleClass::time},
        {"rr_accel_s", ScaleClass::time},
        {"rr_nn50", ScaleClass::dimensionless},
        {"rr_ratio", ScaleClass::dimensionless},
        {"hr_bpm", ScaleClass::dimensionless},
    }};
    for (const auto& [q, sc] : timing)
        for (auto a : kAllAggs)
            cat.entries.push_back({std::string(q) + "_" + to_string(a),
                                   FeatureCategory::timing_variability, "global", a, sc});

    // Morphology: per-lead beat measurements, mean and spread over beats.
    const std::array<std::pair<const char*, ScaleClass>, 4> morph = {{
        {"r_amp", ScaleClass::amplitude},
        {"qrs_width_s", ScaleClass::time},
        {"t_amp", ScaleClass::amplitude},
        {"st_level", ScaleClass::amplitude},
    }};
    for (const char* lead : kLeadNames)
        for (const auto& [q, sc] : morph)
            for (auto a : {Aggregation::mean, Aggregation::std})
                cat.entries.push_back({std::string(lead) + "_" + q + "_" + to_string(a),
                                       FeatureCategory::morphology, lead, a, sc});

    // Spectral: relative band powers 0.5-4 / 4-15 / 15-40 Hz per lead.
    for (const char* lead : kLeadNames)
        for (const char* band : {"bp_low", "bp_mid", "bp_high"})
            cat.entries.push_back({std::string(lead) + "_" + band, FeatureCategory::spectral,
                                   lead, Aggregation::mean, ScaleClass::dimensionless});

    // Inter-lead: correlation pairs plus the frontal-plane axis angle.
    const std::array<std::pair<const char*, const char*>, 9> pairs = {{
        {"I", "II"}, {"II", "III"}, {"I", "aVF"}, {"V1", "V2"}, {"V2", "V3"},
        {"V3", "V4"}, {"V4", "V5"}, {"V5", "V6"}, {"V1", "V6"},
    }};
    for (const auto& [a, b] : pairs)
        cat.entries.push_back({std::string("corr_") + a + "_" + b, FeatureCategory::inter_lead,
                               std::string(a) + ":" + b, Aggregation::mean,
                               ScaleClass::dimensionless});
    cat.entries.push_back({"frontal_axis_deg", FeatureCategory::inter_lead, "I:aVF",
                           Aggregation::mean, ScaleClass::dimensionless});

    cat.validate();
    require(cat.size() == kDefaultCatalogSize, ErrCat::internal, "default catalog size drifted");
    return cat;
}

void write_catalog(const std::string& path, const FeatureCatalog& cat) {
    cat.validate();
    CsvTable t;
    t.comments["catalog_version"] = cat.version;
    t.header = {"id", "category", "lead", "aggregation", "scale_class"};
    for (const auto& e : cat.entries)
        t.rows.push_back({e.id, to_string(e.category), e.lead, to_string(e.aggregation),
                          to_string(e.scale_class)});
    write_csv(path, t);
}

FeatureCatalog read_catalog(const std::string& path) {
    const auto t = read_csv(path);
    const auto it = t.comments.find("catalog_version");
    require(it != t.comments.end(), ErrCat::format, "catalog file missing catalog_version: " + path);
    FeatureCatalog cat;
    cat.version = it->second;
    const int ci = t.require_column("id");
    const int cc = t.require_column("category");
    const int cl = t.require_column("lead");
    const int ca = t.require_column("aggregation");
    const int cs = t.require_column("scale_class");
    for (const auto& row : t.rows)
        cat.entries.push_back({row[ci], category_from_string(row[cc]), row[cl],
                               aggregation_from_string(row[ca]), scale_class_from_string(row[cs])});
    cat.validate();
    return cat;
}

}  // namespace shdbench::features
