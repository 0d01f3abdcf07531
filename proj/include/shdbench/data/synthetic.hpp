#pragma once

#include <functional>
#include <vector>

#include "shdbench/data/types.hpp"

namespace shdbench::data {

/// Latent correlation between two endpoints; raises their co-occurrence.
struct PairBoost {
    int t1 = 0;
    int t2 = 0;
    double rho = 0.0;
};

struct SyntheticConfig {
    size_t n = 7200;  // total records; train = n - val - test
    double val_fraction = 1.0 / 12;
    double test_fraction = 1.0 / 12;
    std::array<double, kNumTargets> prevalence = {0.18, 0.20, 0.05, 0.06, 0.06, 0.08};
    std::vector<PairBoost> boosts = default_boosts();
    double signal_strength = 1.0;
    uint64_t seed = 1;

    static std::vector<PairBoost> default_boosts();
};

/// Labels come from a correlated Gaussian latent per patient thresholded at
/// the inverse-normal of each target prevalence; waveforms are quasi-periodic
/// 12-lead composites whose morphology shifts with each positive label,
/// scaled by signal_strength. Deterministic in cfg.seed. The sink receives
/// one 12x2500 waveform per manifest row, in row order; a null sink skips
/// waveform rendering and yields the identical manifest.
CohortManifest generate_synthetic_cohort(const SyntheticConfig& cfg,
                                         const std::function<void(const WaveformF&)>& sink);

/// Labels and covariates only; no waveform synthesis.
CohortManifest generate_synthetic_manifest(const SyntheticConfig& cfg);

/// Disk variant: streams the store to store_path and records its checksum.
CohortManifest generate_synthetic_cohort_to(const SyntheticConfig& cfg,
                                            const std::string& store_path);

/// In-memory variant for tests and small cohorts.
std::pair<CohortManifest, std::vector<WaveformF>> generate_synthetic_cohort_mem(
    const SyntheticConfig& cfg);

/// Inverse standard-normal CDF, accurate to ~1e-15 (rational seed plus one
/// Halley step against erfc).
double inverse_normal_cdf(double p);

}  // namespace shdbench::data
