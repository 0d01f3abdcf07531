#pragma once

#include <vector>

#include "shdbench/data/types.hpp"

namespace shdbench::features {

/// R-peak indices on a single channel. Fewer than two peaks means the record
/// cannot support interval or beat-aggregated features.
struct BeatDetection {
    std::vector<int> peaks;  // strictly increasing, spacing >= 50 samples
    bool insufficient() const { return peaks.size() < 2; }
};

/// Derivative, square, moving-window integration, adaptive threshold, then
/// refinement to the channel's own extremum. All decision quantities are
/// homogeneous in the input scale, so rescaling by c > 0 leaves the indices
/// unchanged (bit-identical for power-of-two c).
BeatDetection detect_beats(const std::vector<double>& signal);

/// Per-sample RMS across leads; the beat-detection channel for 12-lead input.
std::vector<double> rms_envelope(const data::WaveformF& w);

}  // namespace shdbench::features
