#include "shdbench/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "shdbench/io_util.hpp"

namespace shdbench::eval {

namespace {

void check_aligned(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    require(scores.size() == labels.size(), ErrCat::alignment,
            "scores and labels have different lengths");
    require(!scores.empty(), ErrCat::alignment, "empty score vector");
    for (double s : scores) require(std::isfinite(s), ErrCat::data, "non-finite score");
    for (uint8_t y : labels) require(y <= 1, ErrCat::data, "labels must be 0/1");
}

}  // namespace

std::optional<double> auroc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check_aligned(scores, labels);
    const size_t n = scores.size();
    size_t pos = 0;
    for (uint8_t y : labels) pos += y;
    const size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Average ranks within tied groups keep the Mann-Whitney sum exactly equal
    // to pair counting with half-credit ties.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (double(i + 1) + double(j + 1));  // 1-based
        for (size_t k = i; k <= j; ++k)
            if (labels[order[k]]) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos - 0.5 * double(pos) * double(pos + 1);
    return u / (double(pos) * double(neg));
}

std::optional<double> auprc(const std::vector<double>& scores, const std::vector<uint8_t>& labels) {
    check_aligned(scores, labels);
    const size_t n = scores.size();
    size_t pos = 0;
    for (uint8_t y : labels) pos += y;
    if (pos == 0) return std::nullopt;

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Descending score; ties keep ascending original index (stable).
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    double sum_precision = 0.0;
    size_t seen_pos = 0;
    for (size_t k = 0; k < n; ++k) {
        if (!labels[order[k]]) continue;
        ++seen_pos;
        sum_precision += double(seen_pos) / double(k + 1);
    }
    return sum_precision / double(pos);
}

ThresholdMetrics threshold_metrics(const std::vector<double>& scores,
                                   const std::vector<uint8_t>& labels, double tau) {
    require(tau > 0.0 && tau < 1.0, ErrCat::parameter, "threshold must be in (0,1)");
    check_aligned(scores, labels);
    ThresholdMetrics m;
    for (size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= tau;
        if (pred && labels[i]) ++m.tp;
        else if (pred && !labels[i]) ++m.fp;
        else if (!pred && labels[i]) ++m.fn;
        else ++m.tn;
    }
    m.acc = double(m.tp + m.tn) / double(scores.size());
    const double denom = double(2 * m.tp + m.fp + m.fn);
    m.f1 = denom == 0.0 ? 0.0 : 2.0 * double(m.tp) / denom;
    return m;
}

void PredictionSet::validate() const {
    require(probabilities.cols() == kNumTargets, ErrCat::format,
            "prediction set must have 6 probability columns");
    require(probabilities.rows() > 0, ErrCat::format, "empty prediction set");
    if (!record_ids.empty())
        require(static_cast<Eigen::Index>(record_ids.size()) == probabilities.rows(),
                ErrCat::alignment, "record ids do not match probability rows");
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i)
        for (Eigen::Index j = 0; j < probabilities.cols(); ++j) {
            const double p = probabilities(i, j);
            require(std::isfinite(p) && p > 0.0 && p < 1.0, ErrCat::data,
                    "probabilities must be finite and in (0,1)");
        }
}

std::vector<int> MetricsReport::included_labels() const {
    std::vector<int> out;
    for (int j = 0; j < kNumTargets; ++j) {
        bool ex = false;
        for (const auto& [idx, why] : excluded) ex |= idx == j;
        if (!ex) out.push_back(j);
    }
    return out;
}

MetricsReport macro_report(const PredictionSet& pred, const std::vector<data::LabelVector>& labels,
                           double tau, bool strict) {
    pred.validate();
    require(static_cast<Eigen::Index>(labels.size()) == pred.probabilities.rows(),
            ErrCat::alignment, "label rows do not match prediction rows");

    MetricsReport report;
    report.tau = tau;
    const size_t n = labels.size();

    for (int j = 0; j < kNumTargets; ++j) {
        std::vector<double> scores(n);
        std::vector<uint8_t> y(n);
        size_t pos = 0;
        for (size_t i = 0; i < n; ++i) {
            scores[i] = pred.probabilities(static_cast<Eigen::Index>(i), j);
            y[i] = labels[i].bits[j];
            pos += y[i];
        }
        auto& lm = report.per_label[j];
        lm.prevalence = double(pos) / double(n);
        lm.auroc = auroc(scores, y);
        lm.auprc = auprc(scores, y);
        const auto tm = threshold_metrics(scores, y, tau);
        lm.acc = tm.acc;
        lm.f1 = tm.f1;
        if (!lm.auroc || !lm.auprc) {
            const std::string why = pos == 0 ? "no positive records" : "no negative records";
            require(!strict, ErrCat::data,
                    "metric undefined for label " + std::to_string(j) + ": " + why);
            report.excluded.emplace_back(j, why);
        }
    }

    const auto included = report.included_labels();
    require(!included.empty(), ErrCat::data, "all labels excluded; macro undefined");
    for (int j : included) {
        report.macro_auroc += *report.per_label[j].auroc;
        report.macro_auprc += *report.per_label[j].auprc;
        report.macro_acc += report.per_label[j].acc;
        report.macro_f1 += report.per_label[j].f1;
    }
    const double k = double(included.size());
    report.macro_auroc /= k;
    report.macro_auprc /= k;
    report.macro_acc /= k;
    report.macro_f1 /= k;
    return report;
}

ThresholdSweep threshold_sweep(const PredictionSet& pred,
                               const std::vector<data::LabelVector>& labels,
                               const std::vector<double>& grid) {
    require(!grid.empty(), ErrCat::parameter, "threshold grid is empty");
    for (double t : grid) require(t > 0.0 && t < 1.0, ErrCat::parameter, "grid thresholds must be in (0,1)");
    pred.validate();
    require(static_cast<Eigen::Index>(labels.size()) == pred.probabilities.rows(),
            ErrCat::alignment, "label rows do not match prediction rows");

    ThresholdSweep sweep;
    const size_t n = labels.size();
    for (int j = 0; j < kNumTargets; ++j) {
        std::vector<double> scores(n);
        std::vector<uint8_t> y(n);
        for (size_t i = 0; i < n; ++i) {
            scores[i] = pred.probabilities(static_cast<Eigen::Index>(i), j);
            y[i] = labels[i].bits[j];
        }
        double best_f1 = -1.0;
        for (double t : grid) {
            const auto tm = threshold_metrics(scores, y, t);
            sweep.curves[j].push_back({t, tm.f1, tm.acc});
            if (tm.f1 > best_f1) {
                best_f1 = tm.f1;
                sweep.best_tau[j] = t;
            }
        }
    }
    return sweep;
}

namespace {

std::string opt_str(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("undefined");
}

}  // namespace

void write_metrics_report_csv(const std::string& path, const MetricsReport& report,
                              const data::TargetSpec& spec) {
    CsvTable t;
    t.comments["tau"] = format_double(report.tau);
    t.header = {"endpoint", "prevalence", "auroc", "auprc", "acc", "f1"};
    for (int j = 0; j < kNumTargets; ++j) {
        const auto& lm = report.per_label[j];
        t.rows.push_back({spec.endpoints[j].name, format_double(lm.prevalence), opt_str(lm.auroc),
                          opt_str(lm.auprc), format_double(lm.acc), format_double(lm.f1)});
    }
    t.rows.push_back({"macro", "", format_double(report.macro_auroc),
                      format_double(report.macro_auprc), format_double(report.macro_acc),
                      format_double(report.macro_f1)});
    write_csv(path, t);
}

std::vector<std::string> render_metrics_report(const MetricsReport& report,
                                               const data::TargetSpec& spec) {
    std::vector<std::string> lines;
    char buf[192];
    std::snprintf(buf, sizeof buf, "threshold tau = %.3f", report.tau);
    lines.emplace_back(buf);
    std::snprintf(buf, sizeof buf, "%-26s %10s %8s %8s %8s %8s", "endpoint", "prevalence",
                  "auroc", "auprc", "acc", "f1");
    lines.emplace_back(buf);
    auto fmt = [](const std::optional<double>& v) {
        char b[16];
        if (v)
            std::snprintf(b, sizeof b, "%8.4f", *v);
        else
            std::snprintf(b, sizeof b, "%8s", "undef");
        return std::string(b);
    };
    for (int j = 0; j < kNumTargets; ++j) {
        const auto& lm = report.per_label[j];
        std::snprintf(buf, sizeof buf, "%-26s %10.4f %s %s %8.4f %8.4f",
                      spec.endpoints[j].name.c_str(), lm.prevalence, fmt(lm.auroc).c_str(),
                      fmt(lm.auprc).c_str(), lm.acc, lm.f1);
        lines.emplace_back(buf);
    }
    std::snprintf(buf, sizeof buf, "%-26s %10s %8.4f %8.4f %8.4f %8.4f", "macro", "",
                  report.macro_auroc, report.macro_auprc, report.macro_acc, report.macro_f1);
    lines.emplace_back(buf);
    for (const auto& [j, why] : report.excluded)
        lines.push_back("excluded from macro: " + spec.endpoints[j].name + " (" + why + ")");
    return lines;
}

}  // namespace shdbench::eval
