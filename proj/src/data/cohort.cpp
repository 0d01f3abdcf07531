#include "shdbench/data/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "shdbench/io_util.hpp"

namespace shdbench::data {

ValidationReport validate_cohort(const CohortManifest& manifest) {
    ValidationReport report;
    std::unordered_set<std::string> record_ids;
    std::unordered_map<std::string, Split> patient_split;
    std::unordered_map<std::string, int> patient_eval_records;  // val/test rows per patient

    for (const auto& r : manifest.rows) {
        if (!record_ids.insert(r.record_id).second)
            report.violations.push_back("duplicate record_id: " + r.record_id);
        auto [it, inserted] = patient_split.emplace(r.patient_id, r.split);
        if (!inserted && it->second != r.split)
            report.violations.push_back("patient " + r.patient_id + " appears in splits " +
                                        to_string(it->second) + " and " + to_string(r.split));
        if (r.split != Split::train) {
            int& n = patient_eval_records[r.patient_id + "|" + to_string(r.split)];
            if (++n == 2)
                report.violations.push_back("patient " + r.patient_id + " has multiple " +
                                            to_string(r.split) + " records");
        }
        for (auto b : r.labels.bits)
            if (b > 1) {
                report.violations.push_back("record " + r.record_id + " has non-binary label");
                break;
            }
    }
    return report;
}

DownsampleResult downsample_all_negative(const CohortManifest& manifest, double rho,
                                         uint64_t seed) {
    require(rho > 0.0 && rho <= 1.0, ErrCat::parameter, "retention ratio must be in (0,1]");

    std::vector<size_t> all_neg;
    for (size_t i = 0; i < manifest.rows.size(); ++i) {
        const auto& r = manifest.rows[i];
        if (r.split == Split::train && !r.labels.any_positive()) all_neg.push_back(i);
    }
    const size_t a = all_neg.size();
    const auto removed = static_cast<size_t>(std::llround((1.0 - rho) * static_cast<double>(a)));

    Rng rng(seed);
    rng.shuffle(all_neg);
    std::unordered_set<size_t> dropped(all_neg.begin(), all_neg.begin() + removed);

    DownsampleResult out;
    out.all_negative_before = a;
    out.removed = removed;
    out.manifest.store_checksum = std::nullopt;  // paired store changes; checksum recomputed on write
    for (size_t i = 0; i < manifest.rows.size(); ++i) {
        if (dropped.count(i)) continue;
        out.manifest.rows.push_back(manifest.rows[i]);
        out.retained.push_back(i);
    }
    return out;
}

std::vector<int64_t> backsolve_all_negative_count(
    const std::vector<std::pair<double, int64_t>>& rho_removed) {
    require(!rho_removed.empty(), ErrCat::parameter, "backsolve: no observations");
    // removed = round((1-rho)*A), half away from zero, so A lies in
    // [(removed-0.5)/(1-rho), (removed+0.5)/(1-rho)).
    int64_t lo = 0;
    int64_t hi = std::numeric_limits<int64_t>::max();
    for (const auto& [rho, removed] : rho_removed) {
        require(rho > 0.0 && rho < 1.0, ErrCat::parameter, "backsolve: rho must be in (0,1)");
        require(removed >= 0, ErrCat::parameter, "backsolve: negative removed count");
        const double q = 1.0 - rho;
        lo = std::max(lo, static_cast<int64_t>(std::ceil((removed - 0.5) / q)));
        hi = std::min(hi, static_cast<int64_t>(std::floor((removed + 0.5) / q)) + 1);
    }
    std::vector<int64_t> consistent;
    for (int64_t a = lo; a <= hi; ++a) {
        bool ok = true;
        for (const auto& [rho, removed] : rho_removed)
            if (std::llround((1.0 - rho) * static_cast<double>(a)) != removed) {
                ok = false;
                break;
            }
        if (ok) consistent.push_back(a);
    }
    return consistent;
}

namespace {

SplitStats stats_over(const std::vector<const ManifestRow*>& rows) {
    SplitStats s;
    s.n = rows.size();
    std::array<size_t, kNumTargets> counts{};
    std::array<std::array<size_t, kNumTargets>, kNumTargets> joint{};
    for (const auto* r : rows)
        for (int i = 0; i < kNumTargets; ++i) {
            if (!r->labels.bits[i]) continue;
            ++counts[i];
            for (int j = i + 1; j < kNumTargets; ++j)
                if (r->labels.bits[j]) ++joint[i][j];
        }
    for (int i = 0; i < kNumTargets; ++i) {
        s.endpoints[i].count = counts[i];
        s.endpoints[i].prevalence = s.n ? static_cast<double>(counts[i]) / s.n : 0.0;
    }
    for (int i = 0; i < kNumTargets; ++i)
        for (int j = i + 1; j < kNumTargets; ++j) {
            PairStats p;
            p.t1 = i;
            p.t2 = j;
            p.joint = joint[i][j];
            p.joint_prevalence = s.n ? static_cast<double>(p.joint) / s.n : 0.0;
            if (counts[i]) p.p_t2_given_t1 = static_cast<double>(p.joint) / counts[i];
            if (counts[j]) p.p_t1_given_t2 = static_cast<double>(p.joint) / counts[j];
            s.pairs.push_back(p);
        }
    std::stable_sort(s.pairs.begin(), s.pairs.end(),
                     [](const PairStats& a, const PairStats& b) { return a.joint > b.joint; });
    return s;
}

}  // namespace

CohortStats cohort_stats(const CohortManifest& manifest) {
    std::vector<const ManifestRow*> all, tr, va, te;
    for (const auto& r : manifest.rows) {
        all.push_back(&r);
        (r.split == Split::train ? tr : r.split == Split::val ? va : te).push_back(&r);
    }
    CohortStats out;
    out.overall = stats_over(all);
    out.train = stats_over(tr);
    out.val = stats_over(va);
    out.test = stats_over(te);
    return out;
}

std::vector<std::string> render_cohort_stats(const CohortStats& stats, const TargetSpec& spec) {
    std::vector<std::string> lines;
    char buf[256];
    auto emit = [&](const char* name, const SplitStats& s) {
        std::snprintf(buf, sizeof buf, "[%s] n=%zu", name, s.n);
        lines.emplace_back(buf);
        for (int i = 0; i < kNumTargets; ++i) {
            std::snprintf(buf, sizeof buf, "  %-24s count=%-8zu prevalence=%.4f",
                          spec.endpoints[i].name.c_str(), s.endpoints[i].count,
                          s.endpoints[i].prevalence);
            lines.emplace_back(buf);
        }
        for (const auto& p : s.pairs) {
            auto fmt_cond = [&](const std::optional<double>& v) {
                return v ? std::string(format_double(*v)) : std::string("undefined");
            };
            std::snprintf(buf, sizeof buf,
                          "  pair %s & %s: joint=%zu joint_prev=%.4f p(%s|%s)=%s p(%s|%s)=%s",
                          spec.endpoints[p.t1].name.c_str(), spec.endpoints[p.t2].name.c_str(),
                          p.joint, p.joint_prevalence, spec.endpoints[p.t2].name.c_str(),
                          spec.endpoints[p.t1].name.c_str(), fmt_cond(p.p_t2_given_t1).c_str(),
                          spec.endpoints[p.t1].name.c_str(), spec.endpoints[p.t2].name.c_str(),
                          fmt_cond(p.p_t1_given_t2).c_str());
            lines.emplace_back(buf);
        }
    };
    emit("overall", stats.overall);
    emit("train", stats.train);
    emit("val", stats.val);
    emit("test", stats.test);
    return lines;
}

}  // namespace shdbench::data
