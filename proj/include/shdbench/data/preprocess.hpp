#pragma once

#include <string>
#include <vector>

#include "shdbench/data/types.hpp"

namespace shdbench::data {

/// Two-pass sliding median (windows from stats) estimating the baseline of one
/// lead; window is clamped at the edges.
std::vector<double> median_filter_baseline(const std::vector<double>& x, int window1, int window2);

/// Fits clip bounds (nearest-rank 0.1st/99.9th percentiles of the
/// baseline-subtracted training samples, pooled across leads and records) and
/// the scalar mean/std computed after clipping. Training split only.
PreprocessStats fit_preprocess_stats(const std::vector<const WaveformF*>& train_waveforms,
                                     int window1 = 51, int window2 = 151);
PreprocessStats fit_preprocess_stats(const std::vector<WaveformF>& train_waveforms,
                                     int window1 = 51, int window2 = 151);

/// Per lead: subtract the two-pass median baseline, clip, normalize.
WaveformF preprocess_waveform(const WaveformF& w, const PreprocessStats& stats);

/// Nearest-rank percentile: value at rank ceil(p/100 * n) (1-based) of the
/// ascending sort. p in (0,100].
/// 1-based rank used by the percentile convention: ceil(p/100 * n), with an
/// ulp guard so near-integer products resolve to the mathematical value.
size_t nearest_rank(size_t n, double p);

double nearest_rank_percentile(std::vector<double>& values, double p);

void write_stats_file(const std::string& path, const PreprocessStats& stats);
PreprocessStats read_stats_file(const std::string& path);

}  // namespace shdbench::data
