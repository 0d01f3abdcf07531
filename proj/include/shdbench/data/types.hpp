#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shdbench/common.hpp"

namespace shdbench::data {

using WaveformF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Split { train, val, test };

Split split_from_string(const std::string& s);
std::string to_string(Split s);

enum class Grade { none = 0, mild = 1, moderate = 2, severe = 3 };

Grade grade_from_string(const std::string& s);
std::string to_string(Grade g);

/// Six binary endpoint bits in fixed target order.
struct LabelVector {
    std::array<uint8_t, kNumTargets> bits{};

    bool any_positive() const {
        for (auto b : bits)
            if (b) return true;
        return false;
    }
    bool operator==(const LabelVector&) const = default;
};

/// Per-endpoint missingness produced by non-strict label derivation.
struct LabelMissing {
    std::array<bool, kNumTargets> missing{};
    bool any() const {
        for (bool m : missing)
            if (m) return true;
        return false;
    }
};

struct EchoMeasurements {
    std::optional<double> lvef;   // percent
    std::optional<double> ivs;    // cm
    std::optional<double> lvpw;   // cm
    std::optional<Grade> as_grade;
    std::optional<Grade> mr_grade;
    std::optional<Grade> tr_grade;
    std::optional<Grade> rv_grade;

    void validate() const;
};

enum class EndpointRule { lvef_le, max_wall_ge, grade_ge_moderate };

struct EndpointDef {
    std::string name;
    EndpointRule rule;
    double threshold = 0.0;  // for lvef_le / max_wall_ge
    int grade_index = -1;    // 0=as 1=mr 2=tr 3=rv for grade rules
};

/// The six endpoint definitions in fixed order:
/// reduced_lvef, increased_lvwt, aortic_stenosis, mitral_regurgitation,
/// tricuspid_regurgitation, rv_dysfunction.
struct TargetSpec {
    std::array<EndpointDef, kNumTargets> endpoints;

    static TargetSpec standard();
    int index_of(const std::string& name) const;
};

inline constexpr std::array<const char*, 7> kCovariateNames = {
    "sex", "ventricular_rate", "atrial_rate", "pr_interval", "qrs_duration", "qtc", "age"};

inline constexpr std::array<const char*, kNumTargets> kLabelColumns = {
    "y_lvef", "y_lvwt", "y_as", "y_mr", "y_tr", "y_rv"};

struct EcgRecord {
    std::string record_id;
    std::string patient_id;
    Split split = Split::train;
    WaveformF waveform;                  // 12 x 2500
    std::array<double, 7> covariates{};  // fixed order, see kCovariateNames
    LabelVector labels;
    bool preprocessed = false;
};

/// Fitted preprocessing statistics; train split only.
struct PreprocessStats {
    double clip_low = 0.0;
    double clip_high = 0.0;
    double mean = 0.0;
    double std = 0.0;
    int median_window_1 = 51;   // 200 ms at 250 Hz
    int median_window_2 = 151;  // 600 ms at 250 Hz
};

struct ManifestRow {
    std::string record_id;
    std::string patient_id;
    Split split = Split::train;
    std::array<double, 7> covariates{};
    LabelVector labels;
    std::optional<EchoMeasurements> measurements;  // raw echo columns, optional
};

struct CohortManifest {
    std::vector<ManifestRow> rows;
    std::optional<uint32_t> store_checksum;

    size_t count(Split s) const {
        size_t n = 0;
        for (const auto& r : rows)
            if (r.split == s) ++n;
        return n;
    }
    std::vector<size_t> indices(Split s) const {
        std::vector<size_t> idx;
        for (size_t i = 0; i < rows.size(); ++i)
            if (rows[i].split == s) idx.push_back(i);
        return idx;
    }
};

}  // namespace shdbench::data
