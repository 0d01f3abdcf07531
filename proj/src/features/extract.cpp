#include "shdbench/features/extract.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>

#include "shdbench/data/preprocess.hpp"
#include "shdbench/features/beats.hpp"
#include "shdbench/io_util.hpp"

namespace shdbench::features {

namespace {

constexpr int kFftSize = 4096;
constexpr double kBandLow = 0.5, kBandLowHigh = 4.0, kBandMidHigh = 15.0, kBandHigh = 40.0;

using Entry = std::pair<double, bool>;  // value, present

double vec_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double vec_std(const std::vector<double>& v) {
    const double m = vec_mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

double vec_percentile(std::vector<double> v, double p) {
    const size_t rank = data::nearest_rank(v.size(), p);
    std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
    return v[rank - 1];
}

void put_series(std::map<std::string, Entry>& out, const std::string& base,
                const std::vector<double>& series) {
    const bool ok = !series.empty();
    out[base + "_mean"] = {ok ? vec_mean(series) : 0.0, ok};
    out[base + "_std"] = {ok ? vec_std(series) : 0.0, ok};
    out[base + "_p5"] = {ok ? vec_percentile(series, 5.0) : 0.0, ok};
    out[base + "_p95"] = {ok ? vec_percentile(series, 95.0) : 0.0, ok};
}

void put_agg(std::map<std::string, Entry>& out, const std::string& base,
             const std::vector<double>& series) {
    const bool ok = !series.empty();
    out[base + "_mean"] = {ok ? vec_mean(series) : 0.0, ok};
    out[base + "_std"] = {ok ? vec_std(series) : 0.0, ok};
}

/// Pearson correlation; empty when either side is constant.
std::optional<double> correlation(const data::WaveformF& w, int a, int b) {
    const int n = static_cast<int>(w.cols());
    double ma = 0.0, mb = 0.0;
    for (int t = 0; t < n; ++t) {
        ma += w(a, t);
        mb += w(b, t);
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (int t = 0; t < n; ++t) {
        const double da = w(a, t) - ma;
        const double db = w(b, t) - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va <= 0.0 || vb <= 0.0) return std::nullopt;
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

}  // namespace

void FeatureVector::validate(const FeatureCatalog& cat) const {
    require(values.size() == cat.entries.size() && missing.size() == cat.entries.size(),
            ErrCat::alignment, "feature vector length does not match catalog");
}

FeatureVector extract_features(const data::WaveformF& waveform, const FeatureCatalog& catalog) {
    require(waveform.rows() == kLeads && waveform.cols() == kSamples, ErrCat::data,
            "waveform shape must be 12 x 2500");
    catalog.validate();

    std::map<std::string, Entry> feats;

    // Beat timing from the cross-lead envelope.
    const auto envelope = rms_envelope(waveform);
    const auto beats = detect_beats(envelope);
    const auto& peaks = beats.peaks;

    std::vector<double> rr, rr_abs_diff, rr_accel, nn50, rr_ratio, hr;
    if (!beats.insufficient()) {
        for (size_t i = 0; i + 1 < peaks.size(); ++i)
            rr.push_back((peaks[i + 1] - peaks[i]) / kSampleRateHz);
        for (size_t i = 0; i + 1 < rr.size(); ++i) {
            const double d = rr[i + 1] - rr[i];
            rr_abs_diff.push_back(std::abs(d));
            nn50.push_back(std::abs(d) > 0.050 ? 1.0 : 0.0);
            rr_ratio.push_back(rr[i + 1] / rr[i]);
        }
        for (size_t i = 0; i + 2 < rr.size(); ++i)
            rr_accel.push_back(std::abs(rr[i + 2] - 2.0 * rr[i + 1] + rr[i]));
        for (double v : rr) hr.push_back(60.0 / v);
    }
    put_series(feats, "rr_s", rr);
    put_series(feats, "rr_abs_diff_s", rr_abs_diff);
    put_series(feats, "rr_accel_s", rr_accel);
    put_series(feats, "rr_nn50", nn50);
    put_series(feats, "rr_ratio", rr_ratio);
    put_series(feats, "hr_bpm", hr);

    // Per-lead beat morphology at the shared beat positions.
    for (int l = 0; l < kLeads; ++l) {
        std::vector<double> r_amp, qrs_w, t_amp, st;
        if (!beats.insufficient()) {
            for (int p : peaks) {
                if (p - 30 < 0 || p + 90 >= kSamples) continue;
                int r = p - 10;
                for (int i = p - 10; i <= p + 10; ++i)
                    if (std::abs(waveform(l, i)) > std::abs(waveform(l, r))) r = i;
                const double ra = waveform(l, r);
                r_amp.push_back(ra);

                const double half = 0.5 * std::abs(ra);
                int left = r, right = r;
                while (left > r - 30 && left > 0 && std::abs(waveform(l, left - 1)) >= half) --left;
                while (right < r + 30 && right + 1 < kSamples &&
                       std::abs(waveform(l, right + 1)) >= half)
                    ++right;
                qrs_w.push_back((right - left + 1) / kSampleRateHz);

                int t = r + 20;
                for (int i = r + 20; i <= std::min(r + 90, kSamples - 1); ++i)
                    if (std::abs(waveform(l, i)) > std::abs(waveform(l, t))) t = i;
                t_amp.push_back(waveform(l, t));

                double s = 0.0;
                for (int i = r + 15; i <= r + 19; ++i) s += waveform(l, i);
                st.push_back(s / 5.0);
            }
        }
        const std::string lead = kLeadNames[l];
        put_agg(feats, lead + "_r_amp", r_amp);
        put_agg(feats, lead + "_qrs_width_s", qrs_w);
        put_agg(feats, lead + "_t_amp", t_amp);
        put_agg(feats, lead + "_st_level", st);
    }

    // Relative band powers per lead, mean-subtracted and zero-padded.
    {
        std::vector<double> in(kFftSize, 0.0);
        std::vector<fftw_complex> out(kFftSize / 2 + 1);
        fftw_plan plan =
            fftw_plan_dft_r2c_1d(kFftSize, in.data(), out.data(), FFTW_ESTIMATE);
        for (int l = 0; l < kLeads; ++l) {
            double m = 0.0;
            for (int t = 0; t < kSamples; ++t) m += waveform(l, t);
            m /= kSamples;
            std::fill(in.begin(), in.end(), 0.0);
            for (int t = 0; t < kSamples; ++t) in[t] = waveform(l, t) - m;
            fftw_execute(plan);

            double low = 0.0, mid = 0.0, high = 0.0;
            for (int k = 0; k <= kFftSize / 2; ++k) {
                const double f = k * kSampleRateHz / kFftSize;
                if (f < kBandLow || f >= kBandHigh) continue;
                const double p = out[k][0] * out[k][0] + out[k][1] * out[k][1];
                if (f < kBandLowHigh) low += p;
                else if (f < kBandMidHigh) mid += p;
                else high += p;
            }
            const double total = low + mid + high;
            const bool ok = total > 0.0;
            const std::string lead = kLeadNames[l];
            feats[lead + "_bp_low"] = {ok ? low / total : 0.0, ok};
            feats[lead + "_bp_mid"] = {ok ? mid / total : 0.0, ok};
            feats[lead + "_bp_high"] = {ok ? high / total : 0.0, ok};
        }
        fftw_destroy_plan(plan);
    }

    // Inter-lead relationships; computable without beat detection.
    {
        // Lead indices for the catalog's correlation pairs (I II III aVR aVL
        // aVF V1..V6).
        constexpr std::array<std::pair<int, int>, 9> kPairs = {{
            {0, 1}, {1, 2}, {0, 5}, {6, 7}, {7, 8}, {8, 9}, {9, 10}, {10, 11}, {6, 11},
        }};
        for (const auto& [a, b] : kPairs) {
            const auto c = correlation(waveform, a, b);
            const std::string id =
                std::string("corr_") + kLeadNames[a] + "_" + kLeadNames[b];
            feats[id] = {c.value_or(0.0), c.has_value()};
        }

        // Frontal axis from envelope-weighted net deflection in I and aVF.
        double si = 0.0, sf = 0.0;
        for (int t = 0; t < kSamples; ++t) {
            si += waveform(0, t) * envelope[t];
            sf += waveform(5, t) * envelope[t];
        }
        const bool ok = si != 0.0 || sf != 0.0;
        feats["frontal_axis_deg"] = {ok ? std::atan2(sf, si) * 180.0 / std::numbers::pi : 0.0, ok};
    }

    FeatureVector fv;
    fv.values.reserve(catalog.entries.size());
    fv.missing.reserve(catalog.entries.size());
    for (const auto& e : catalog.entries) {
        const auto it = feats.find(e.id);
        require(it != feats.end(), ErrCat::parameter, "unknown feature id in catalog: " + e.id);
        const auto [v, present] = it->second;
        fv.values.push_back(present ? v : std::nan(""));
        fv.missing.push_back(present ? 0 : 1);
    }
    return fv;
}

void FeatureMatrix::validate() const {
    require(values.rows() == static_cast<Eigen::Index>(record_ids.size()), ErrCat::alignment,
            "feature matrix row count does not match record ids");
    require(values.cols() == static_cast<Eigen::Index>(feature_ids.size()), ErrCat::alignment,
            "feature matrix column count does not match feature ids");
    require(values.rows() == missing.rows() && values.cols() == missing.cols(),
            ErrCat::alignment, "feature matrix mask shape mismatch");
}

FeatureMatrix extract_matrix(const std::vector<data::WaveformF>& waveforms,
                             const std::vector<std::string>& record_ids,
                             const FeatureCatalog& catalog) {
    require(waveforms.size() == record_ids.size(), ErrCat::alignment,
            "waveform count does not match record ids");
    FeatureMatrix fm;
    fm.catalog_version = catalog.version;
    for (const auto& e : catalog.entries) fm.feature_ids.push_back(e.id);
    fm.record_ids = record_ids;
    fm.values.resize(static_cast<Eigen::Index>(waveforms.size()), catalog.size());
    fm.missing.resize(static_cast<Eigen::Index>(waveforms.size()), catalog.size());
    for (size_t i = 0; i < waveforms.size(); ++i) {
        const auto fv = extract_features(waveforms[i], catalog);
        for (int j = 0; j < catalog.size(); ++j) {
            fm.values(static_cast<Eigen::Index>(i), j) = fv.values[j];
            fm.missing(static_cast<Eigen::Index>(i), j) = fv.missing[j];
        }
    }
    fm.validate();
    return fm;
}

void write_feature_matrix_csv(const std::string& path, const FeatureMatrix& fm) {
    fm.validate();
    CsvTable t;
    t.comments["catalog_version"] = fm.catalog_version;
    t.header.push_back("record_id");
    for (const auto& id : fm.feature_ids) t.header.push_back(id);
    for (int i = 0; i < fm.rows(); ++i) {
        std::vector<std::string> row;
        row.push_back(fm.record_ids[i]);
        for (int j = 0; j < fm.cols(); ++j)
            row.push_back(fm.missing(i, j) ? "" : format_double(fm.values(i, j)));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

FeatureMatrix read_feature_matrix_csv(const std::string& path) {
    const auto t = read_csv(path);
    const auto it = t.comments.find("catalog_version");
    require(it != t.comments.end(), ErrCat::format,
            "feature matrix missing catalog_version: " + path);
    require(!t.header.empty() && t.header[0] == "record_id", ErrCat::format,
            "feature matrix must start with record_id: " + path);
    FeatureMatrix fm;
    fm.catalog_version = it->second;
    fm.feature_ids.assign(t.header.begin() + 1, t.header.end());
    const int f = static_cast<int>(fm.feature_ids.size());
    fm.values.resize(static_cast<Eigen::Index>(t.rows.size()), f);
    fm.missing.resize(static_cast<Eigen::Index>(t.rows.size()), f);
    for (size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        require(static_cast<int>(row.size()) == f + 1, ErrCat::format,
                "feature matrix row width mismatch: " + path);
        fm.record_ids.push_back(row[0]);
        for (int j = 0; j < f; ++j) {
            const bool miss = row[j + 1].empty();
            fm.missing(static_cast<Eigen::Index>(i), j) = miss ? 1 : 0;
            fm.values(static_cast<Eigen::Index>(i), j) =
                miss ? std::nan("") : parse_double(row[j + 1]);
        }
    }
    fm.validate();
    return fm;
}

}  // namespace shdbench::features
