#include "shdbench/data/synthetic.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "shdbench/data/waveform_store.hpp"
#include "shdbench/rng.hpp"

namespace shdbench::data {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Lead order: I, II, III, aVR, aVL, aVF, V1..V6.
constexpr std::array<double, kLeads> kQrsNormal = {0.6,  1.0, 0.5,  -0.9, 0.25, 0.75,
                                                   -0.5, 0.1, 0.45, 0.9,  1.1,  1.0};
constexpr std::array<double, kLeads> kQrsRight = {0.2,   0.7, 1.0, -0.55, -0.25, 0.9,
                                                  0.8,   0.75, 0.6, 0.5,  0.4,   0.3};
constexpr std::array<double, kLeads> kPRatio = {0.4, 1.0,  0.6, -0.8, 0.2, 0.8,
                                                0.3, 0.35, 0.4, 0.5,  0.5, 0.5};
constexpr std::array<double, kLeads> kTRatio = {0.5,  1.0, 0.5, -0.8, 0.2, 0.8,
                                                0.35, 0.6, 0.8, 1.0,  0.9, 0.8};
constexpr std::array<double, kLeads> kStRatio = {0.7, 0.3, 0.0, -0.5, 0.5, 0.2,
                                                 0.0, 0.2, 0.5, 0.8,  1.0, 0.9};

void add_bump(Eigen::VectorXd& buf, double center_s, double sigma_s, double amp) {
    const double f = kSampleRateHz;
    const int lo = std::max(0, static_cast<int>(std::ceil((center_s - 4.0 * sigma_s) * f)));
    const int hi = std::min<int>(kSamples - 1, static_cast<int>(std::floor((center_s + 4.0 * sigma_s) * f)));
    for (int i = lo; i <= hi; ++i) {
        const double d = (i / f - center_s) / sigma_s;
        buf[i] += amp * std::exp(-0.5 * d * d);
    }
}

struct PatientTruth {
    Eigen::VectorXd z;  // 6 latents
    LabelVector labels;
    EchoMeasurements echo;
};

PatientTruth make_patient(Rng& rp, const Eigen::MatrixXd& chol,
                          const std::array<double, kNumTargets>& thresholds) {
    PatientTruth t;
    Eigen::VectorXd eps(kNumTargets);
    for (int j = 0; j < kNumTargets; ++j) eps[j] = rp.normal();
    t.z = chol * eps;
    for (int j = 0; j < kNumTargets; ++j) t.labels.bits[j] = (t.z[j] > thresholds[j]) ? 1 : 0;

    // Raw measurements consistent with the derived bits; exercises the
    // optional manifest columns end to end.
    auto grade_for = [&](bool positive) {
        if (positive) return rp.bernoulli(0.5) ? Grade::severe : Grade::moderate;
        return rp.bernoulli(0.5) ? Grade::mild : Grade::none;
    };
    t.echo.lvef = t.labels.bits[0] ? rp.uniform(25.0, 45.0) : rp.uniform(50.0, 70.0);
    if (t.labels.bits[1]) {
        t.echo.ivs = rp.uniform(1.3, 1.9);
        t.echo.lvpw = rp.uniform(0.7, *t.echo.ivs);
    } else {
        t.echo.ivs = rp.uniform(0.7, 1.25);
        t.echo.lvpw = rp.uniform(0.7, 1.25);
    }
    t.echo.as_grade = grade_for(t.labels.bits[2]);
    t.echo.mr_grade = grade_for(t.labels.bits[3]);
    t.echo.tr_grade = grade_for(t.labels.bits[4]);
    t.echo.rv_grade = grade_for(t.labels.bits[5]);
    return t;
}

struct RecordDraw {
    WaveformF waveform;
    std::array<double, 7> covariates{};
};

// Covariates are drawn before any waveform noise so that manifest content is
// identical whether or not rendering is requested.
RecordDraw make_record(Rng& rw, const PatientTruth& pt, double s, bool render) {
    const auto& y = pt.labels.bits;
    const double hr = std::clamp(rw.uniform(55.0, 90.0) + s * (10.0 * y[0] + 6.0 * y[3]), 40.0, 140.0);
    const double rr_jitter = 0.012 + 0.035 * s * y[5];
    const double qrs_sigma = 0.012 + s * (0.005 * y[0] + 0.003 * y[2]);
    const double r_amp = (1.0 - 0.30 * s * y[0]) * (1.0 + 0.45 * s * y[1] + 0.20 * s * y[2]);
    const double s_amp = -0.25 * (1.0 + 0.5 * s * y[5]);
    const double q_amp = -0.08;
    const double t_amp = 0.30 * (1.0 - 0.5 * s * y[2]);
    const double p_amp = 0.12 * (1.0 + 0.8 * s * y[3] + 0.8 * s * y[4]);
    const double p_sigma = 0.025 * (1.0 + 0.5 * s * y[3]);
    const double st_level = -0.10 * s * y[1];
    const double axis = std::min(0.8, s * (0.5 * y[4] + 0.3 * y[5]));
    const double gain = rw.uniform(0.85, 1.15);

    RecordDraw out;
    out.covariates[0] = rw.bernoulli(0.5) ? 1.0 : 0.0;
    out.covariates[1] = hr + rw.normal() * 1.5;
    out.covariates[2] = hr + rw.normal() * 1.5;
    out.covariates[3] = 158.0 + 5.0 * pt.z[3] + rw.normal() * 7.0;
    out.covariates[4] = 4.0 * qrs_sigma * 1000.0 + rw.normal() * 4.0;
    out.covariates[5] = 415.0 + 9.0 * pt.z[0] + 7.0 * pt.z[2] + rw.normal() * 9.0;
    out.covariates[6] = std::clamp(62.0 + 4.0 * (pt.z[1] + pt.z[2]) + rw.normal() * 9.0, 18.0, 95.0);
    if (!render) return out;

    // One buffer per wave; leads are scaled mixtures of the same beat train.
    Eigen::VectorXd wav_p = Eigen::VectorXd::Zero(kSamples), wav_qrs = wav_p, wav_t = wav_p,
                    wav_st = wav_p;
    const double duration = kSamples / kSampleRateHz;
    double t = rw.uniform(0.05, 0.05 + 60.0 / hr);
    while (t < duration + 0.05) {
        add_bump(wav_p, t - 0.17, p_sigma, p_amp);
        add_bump(wav_qrs, t - 0.038, 0.009, q_amp);
        add_bump(wav_qrs, t, qrs_sigma, r_amp);
        add_bump(wav_qrs, t + 0.038 + (qrs_sigma - 0.012), 0.010, s_amp);
        add_bump(wav_t, t + 0.30, 0.055, t_amp);
        add_bump(wav_st, t + 0.13, 0.050, st_level);
        t += (60.0 / hr) * std::max(0.5, 1.0 + rw.normal() * rr_jitter);
    }

    // Two shared low-frequency wander processes and one mains ripple, mixed
    // with per-lead coefficients; white noise is independent per lead.
    Eigen::VectorXd wander1(kSamples), wander2(kSamples), mains(kSamples);
    {
        const double f1 = rw.uniform(0.12, 0.45), ph1 = rw.uniform(0.0, 2.0 * M_PI);
        const double f2 = rw.uniform(0.12, 0.45), ph2 = rw.uniform(0.0, 2.0 * M_PI);
        const double phm = rw.uniform(0.0, 2.0 * M_PI);
        for (int i = 0; i < kSamples; ++i) {
            const double ts = i / kSampleRateHz;
            wander1[i] = std::sin(2.0 * M_PI * f1 * ts + ph1);
            wander2[i] = std::sin(2.0 * M_PI * f2 * ts + ph2);
            mains[i] = std::sin(2.0 * M_PI * 50.0 * ts + phm);
        }
    }

    out.waveform.resize(kLeads, kSamples);
    for (int l = 0; l < kLeads; ++l) {
        const double qrs_r = (1.0 - axis) * kQrsNormal[l] + axis * kQrsRight[l];
        double t_r = kTRatio[l];
        if (l >= 6 && l <= 8) t_r *= 1.0 - 1.6 * s * y[5];  // V1..V3 inversion
        const double a1 = rw.uniform(0.02, 0.09), a2 = rw.uniform(0.02, 0.09);
        const double am = rw.uniform(0.005, 0.015);
        for (int i = 0; i < kSamples; ++i) {
            const double v = gain * (qrs_r * wav_qrs[i] + kPRatio[l] * wav_p[i] +
                                     t_r * wav_t[i] + kStRatio[l] * wav_st[i]) +
                             a1 * wander1[i] + a2 * wander2[i] + am * mains[i] +
                             0.025 * rw.normal();
            out.waveform(l, i) = static_cast<float>(v);
        }
    }
    return out;
}

}  // namespace

std::vector<PairBoost> SyntheticConfig::default_boosts() {
    return {{0, 5, 0.45}, {0, 3, 0.30}, {3, 4, 0.35}, {1, 2, 0.30}, {0, 1, 0.20}};
}

double inverse_normal_cdf(double p) {
    require(p > 0.0 && p < 1.0, ErrCat::parameter, "inverse_normal_cdf: p must be in (0,1)");
    // Acklam's rational approximation, then one Halley step.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

CohortManifest generate_synthetic_cohort(const SyntheticConfig& cfg,
                                         const std::function<void(const WaveformF&)>& sink) {
    require(cfg.n >= 60, ErrCat::parameter, "synthetic cohort: n must be >= 60");
    for (double p : cfg.prevalence)
        require(p > 0.0 && p < 1.0, ErrCat::parameter, "synthetic cohort: prevalence must be in (0,1)");
    require(cfg.signal_strength >= 0.0, ErrCat::parameter, "synthetic cohort: negative signal strength");
    require(cfg.val_fraction >= 0.0 && cfg.test_fraction >= 0.0 &&
                cfg.val_fraction + cfg.test_fraction < 1.0,
            ErrCat::parameter, "synthetic cohort: bad split fractions");

    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(kNumTargets, kNumTargets);
    for (const auto& bst : cfg.boosts) {
        require(bst.t1 >= 0 && bst.t1 < kNumTargets && bst.t2 >= 0 && bst.t2 < kNumTargets &&
                    bst.t1 != bst.t2,
                ErrCat::parameter, "synthetic cohort: bad boost pair");
        require(std::abs(bst.rho) < 1.0, ErrCat::parameter, "synthetic cohort: |rho| must be < 1");
        sigma(bst.t1, bst.t2) = bst.rho;
        sigma(bst.t2, bst.t1) = bst.rho;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    require(llt.info() == Eigen::Success, ErrCat::parameter,
            "synthetic cohort: co-occurrence request is infeasible (latent covariance not PSD)");
    const Eigen::MatrixXd chol = llt.matrixL();

    std::array<double, kNumTargets> thresholds;
    for (int j = 0; j < kNumTargets; ++j) thresholds[j] = inverse_normal_cdf(1.0 - cfg.prevalence[j]);

    const auto n_val = static_cast<size_t>(std::llround(cfg.n * cfg.val_fraction));
    const auto n_test = static_cast<size_t>(std::llround(cfg.n * cfg.test_fraction));
    require(cfg.n > n_val + n_test, ErrCat::parameter, "synthetic cohort: no train records left");
    const size_t n_train = cfg.n - n_val - n_test;

    Rng master(cfg.seed);
    CohortManifest manifest;
    manifest.rows.reserve(cfg.n);

    size_t patient_counter = 0;
    PatientTruth current;
    char buf[32];
    for (size_t r = 0; r < cfg.n; ++r) {
        const Split split = r < n_train ? Split::train : r < n_train + n_val ? Split::val : Split::test;
        // Every 20th train record repeats the previous patient; val/test stay
        // one record per patient.
        const bool reuse = split == Split::train && r % 20 == 19 && r > 0;
        size_t patient_index;
        if (reuse) {
            patient_index = patient_counter - 1;
        } else {
            patient_index = patient_counter++;
            Rng rp = master.fork(patient_index);
            current = make_patient(rp, chol, thresholds);
        }

        Rng rw = master.fork((uint64_t(1) << 32) + r);
        RecordDraw draw = make_record(rw, current, cfg.signal_strength, static_cast<bool>(sink));

        ManifestRow row;
        std::snprintf(buf, sizeof buf, "SR%06zu", r);
        row.record_id = buf;
        std::snprintf(buf, sizeof buf, "SP%06zu", patient_index);
        row.patient_id = buf;
        row.split = split;
        row.covariates = draw.covariates;
        row.labels = current.labels;
        row.measurements = current.echo;
        manifest.rows.push_back(std::move(row));
        if (sink) sink(draw.waveform);
    }
    return manifest;
}

CohortManifest generate_synthetic_manifest(const SyntheticConfig& cfg) {
    return generate_synthetic_cohort(cfg, nullptr);
}

CohortManifest generate_synthetic_cohort_to(const SyntheticConfig& cfg, const std::string& store_path) {
    StoreWriter writer(store_path, cfg.n);
    CohortManifest manifest =
        generate_synthetic_cohort(cfg, [&](const WaveformF& w) { writer.append(w); });
    manifest.store_checksum = writer.finalize();
    return manifest;
}

std::pair<CohortManifest, std::vector<WaveformF>> generate_synthetic_cohort_mem(
    const SyntheticConfig& cfg) {
    std::vector<WaveformF> waveforms;
    waveforms.reserve(cfg.n);
    CohortManifest manifest =
        generate_synthetic_cohort(cfg, [&](const WaveformF& w) { waveforms.push_back(w); });
    return {std::move(manifest), std::move(waveforms)};
}

}  // namespace shdbench::data
