#pragma once

#include <optional>
#include <string>
#include <vector>

#include "shdbench/data/types.hpp"
#include "shdbench/rng.hpp"

namespace shdbench::data {

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks manifest invariants: each patient in at most one split, at most one
/// val/test record per patient, unique record ids, labels in {0,1}.
ValidationReport validate_cohort(const CohortManifest& manifest);

struct DownsampleResult {
    CohortManifest manifest;             // retained rows, original order
    std::vector<size_t> retained;        // indices into the input manifest
    size_t all_negative_before = 0;      // A, train split only
    size_t removed = 0;                  // round((1-rho)*A)
};

/// Removes exactly round((1-rho)*A) all-negative train records, chosen by a
/// seeded shuffle. Positive-containing records and val/test rows pass through
/// untouched. rho outside (0,1] is a parameter error.
DownsampleResult downsample_all_negative(const CohortManifest& manifest, double rho, uint64_t seed);

/// Finds every integer A consistent with removed_j = round((1-rho_j)*A) for
/// all given (rho, removed) pairs. The consistency checker behind the
/// downsampling cross-check.
std::vector<int64_t> backsolve_all_negative_count(
    const std::vector<std::pair<double, int64_t>>& rho_removed);

struct EndpointStats {
    size_t count = 0;
    double prevalence = 0.0;  // fraction of split size
};

struct PairStats {
    int t1 = 0;
    int t2 = 0;
    size_t joint = 0;
    double joint_prevalence = 0.0;
    std::optional<double> p_t2_given_t1;  // empty when count(t1)=0
    std::optional<double> p_t1_given_t2;
};

struct SplitStats {
    size_t n = 0;
    std::array<EndpointStats, kNumTargets> endpoints{};
    std::vector<PairStats> pairs;  // 15 unordered pairs, decreasing joint prevalence
};

struct CohortStats {
    SplitStats overall;
    SplitStats train;
    SplitStats val;
    SplitStats test;
};

CohortStats cohort_stats(const CohortManifest& manifest);

/// Renders a stats report as text lines for the CLI and report files.
std::vector<std::string> render_cohort_stats(const CohortStats& stats, const TargetSpec& spec);

}  // namespace shdbench::data
