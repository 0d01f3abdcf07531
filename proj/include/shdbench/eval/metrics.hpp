#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "shdbench/data/types.hpp"

namespace shdbench::eval {

/// Mann-Whitney AUROC with ties counted as 1/2; algebraically equal to
/// brute-force pair counting. Empty when labels are single-class.
std::optional<double> auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

/// Average precision: mean over ranked positives of precision at that rank.
/// Descending score order; ties broken by ascending original index so the
/// value is bit-reproducible. Empty when there are no positives.
std::optional<double> auprc(const std::vector<double>& scores, const std::vector<uint8_t>& labels);

struct ThresholdMetrics {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double acc = 0.0;
    double f1 = 0.0;  // 0 when 2TP+FP+FN = 0
};

/// Predict positive iff score >= tau (inclusive). tau must lie in (0,1).
ThresholdMetrics threshold_metrics(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& labels, double tau);

struct PredictionSet {
    Eigen::MatrixXd probabilities;         // N x 6, entries in (0,1)
    std::vector<std::string> record_ids;   // row-aligned manifest reference
    std::string model_id;
    std::string config_hash;

    void validate() const;
};

struct LabelMetrics {
    double prevalence = 0.0;
    std::optional<double> auroc;
    std::optional<double> auprc;
    double acc = 0.0;
    double f1 = 0.0;
};

struct MetricsReport {
    std::array<LabelMetrics, kNumTargets> per_label{};
    double macro_auroc = 0.0;
    double macro_auprc = 0.0;
    double macro_acc = 0.0;
    double macro_f1 = 0.0;
    double tau = 0.5;
    // Labels left out of all four macro means, with the reason.
    std::vector<std::pair<int, std::string>> excluded;

    std::vector<int> included_labels() const;
};

/// Per-label metrics plus arithmetic macro means over the included labels.
/// A label whose AUROC/AUPRC is undefined (single-class in this cohort) is
/// excluded from every macro mean and listed with a reason; strict mode turns
/// any exclusion into a data error.
MetricsReport macro_report(const PredictionSet& pred, const std::vector<data::LabelVector>& labels,
                           double tau, bool strict = false);

struct SweepPoint {
    double tau = 0.0;
    double f1 = 0.0;
    double acc = 0.0;
};

struct ThresholdSweep {
    std::array<std::vector<SweepPoint>, kNumTargets> curves{};
    std::array<double, kNumTargets> best_tau{};  // max-F1 threshold per label
};

ThresholdSweep threshold_sweep(const PredictionSet& pred,
                               const std::vector<data::LabelVector>& labels,
                               const std::vector<double>& grid);

/// Report files: CSV for machines plus an aligned text table. Column order:
/// endpoint, prevalence, auroc, auprc, acc, f1, with a trailing macro row.
void write_metrics_report_csv(const std::string& path, const MetricsReport& report,
                              const data::TargetSpec& spec);
std::vector<std::string> render_metrics_report(const MetricsReport& report,
                                               const data::TargetSpec& spec);

}  // namespace shdbench::eval
