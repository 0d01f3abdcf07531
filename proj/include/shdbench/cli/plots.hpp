#pragma once

#include <array>
#include <string>
#include <vector>

#include "shdbench/data/types.hpp"

namespace shdbench::cli {

// Figures are SVG with a CSV sidecar holding the exact plotted numbers, so
// downstream checks read the sidecar instead of parsing pixels. The emitters
// are pure functions of their inputs; rerunning one over the same data
// reproduces the image byte for byte.

struct PerfPoint {
    std::string variant;
    std::string seed;
    double trainable_params = 0.0;
    double auroc = 0.0;
    double auprc = 0.0;
};

/// Two panels sharing a log10(trainable parameters) axis: AUROC left,
/// AUPRC right, one marker per result row, colored by variant.
void write_perf_efficiency(const std::vector<PerfPoint>& points, const std::string& svg_path,
                           const std::string& csv_path);

struct CurvePoint {
    int k = 0;
    double auroc = 0.0;
};

/// Validation AUROC against the number of top-ranked features kept.
void write_topk_curve(std::vector<CurvePoint> points, const std::string& svg_path,
                      const std::string& csv_path);

/// Classification outcome of one record for one endpoint at a threshold.
enum ErrorClass : int { kTrueNegative = 0, kTruePositive = 1, kFalsePositive = 2, kFalseNegative = 3 };

struct EmbeddingPoint {
    std::string record_id;
    double x = 0.0;
    double y = 0.0;
    std::string split;                                // train / val / test
    std::array<int, data::kNumTargets> cls{{-1, -1, -1, -1, -1, -1}};  // ErrorClass, -1 unknown
};

/// 2-D embedding scatter. Split coloring gives one panel; error coloring
/// gives one panel per endpoint with false positives gold and false
/// negatives red at the given threshold.
void write_embedding_plot(const std::vector<EmbeddingPoint>& points, bool color_errors,
                          const data::TargetSpec& spec, double tau, const std::string& svg_path,
                          const std::string& csv_path);

}  // namespace shdbench::cli
