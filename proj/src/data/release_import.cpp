#include "shdbench/data/release_import.hpp"

#include <cmath>
#include <filesystem>
#include <limits>

#include "shdbench/data/npy.hpp"
#include "shdbench/data/waveform_store.hpp"
#include "shdbench/io_util.hpp"

namespace shdbench::data {

namespace {

int find_column(const CsvTable& t, std::initializer_list<const char*> names) {
    for (const char* n : names) {
        const int c = t.column(n);
        if (c >= 0) return c;
    }
    return -1;
}

int require_one_of(const CsvTable& t, std::initializer_list<const char*> names, const char* what) {
    const int c = find_column(t, names);
    require(c >= 0, ErrCat::format, std::string("release metadata: missing ") + what + " column");
    return c;
}

double parse_covariate(const std::string& cell, int k) {
    if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
    if (k == 0) {  // sex
        if (cell == "M" || cell == "m" || cell == "Male" || cell == "male") return 1.0;
        if (cell == "F" || cell == "f" || cell == "Female" || cell == "female") return 0.0;
    }
    return parse_double(cell);
}

}  // namespace

CohortManifest import_release(const std::string& release_dir, const std::string& out_store_path) {
    namespace fs = std::filesystem;
    require(fs::is_directory(release_dir), ErrCat::io, "'" + release_dir + "' is not a directory");
    const fs::path meta_path = fs::path(release_dir) / "metadata.csv";
    const fs::path wave_path = fs::path(release_dir) / "waveforms.npy";
    require(fs::exists(meta_path), ErrCat::format,
            "release layout: missing " + meta_path.string());
    require(fs::exists(wave_path), ErrCat::format,
            "release layout: missing " + wave_path.string());

    const CsvTable meta = read_csv(meta_path.string());
    const int col_record = require_one_of(meta, {"record_id", "ecg_id", "id"}, "record id");
    const int col_patient = require_one_of(meta, {"patient_id", "pid", "subject_id"}, "patient id");
    const int col_split = require_one_of(meta, {"split", "partition"}, "split");

    static constexpr std::array<std::array<const char*, 2>, kNumTargets> kLabelAliases = {{
        {"y_lvef", "reduced_lvef"},
        {"y_lvwt", "increased_lvwt"},
        {"y_as", "aortic_stenosis"},
        {"y_mr", "mitral_regurgitation"},
        {"y_tr", "tricuspid_regurgitation"},
        {"y_rv", "rv_dysfunction"},
    }};
    std::array<int, kNumTargets> label_cols;
    for (int j = 0; j < kNumTargets; ++j)
        label_cols[j] = require_one_of(meta, {kLabelAliases[j][0], kLabelAliases[j][1]},
                                       kLabelAliases[j][0]);

    static constexpr std::array<std::array<const char*, 2>, 7> kCovariateAliases = {{
        {"sex", "gender"},
        {"ventricular_rate", "vrate"},
        {"atrial_rate", "arate"},
        {"pr_interval", "pr"},
        {"qrs_duration", "qrs"},
        {"qtc", "qt_corrected"},
        {"age", "age_at_ecg"},
    }};
    std::array<int, 7> cov_cols;
    for (int k = 0; k < 7; ++k)
        cov_cols[k] =
            require_one_of(meta, {kCovariateAliases[k][0], kCovariateAliases[k][1]},
                           kCovariateAliases[k][0]);

    NpyRowReader waves(wave_path.string());
    require(waves.info().shape.size() == 3 && waves.info().shape[1] == kLeads &&
                waves.info().shape[2] == kSamples,
            ErrCat::format, "release waveforms: expected shape (N, 12, 2500)");
    require(waves.rows() == meta.rows.size(), ErrCat::format,
            "release: metadata has " + std::to_string(meta.rows.size()) + " rows but waveforms.npy has " +
                std::to_string(waves.rows()));

    CohortManifest manifest;
    manifest.rows.reserve(meta.rows.size());
    StoreWriter writer(out_store_path, meta.rows.size());
    WaveformF w(kLeads, kSamples);
    for (size_t i = 0; i < meta.rows.size(); ++i) {
        const auto& row = meta.rows[i];
        ManifestRow out;
        out.record_id = row[col_record];
        out.patient_id = row[col_patient];
        std::string split = row[col_split];
        if (split == "validation") split = "val";
        out.split = split_from_string(split);
        for (int j = 0; j < kNumTargets; ++j) {
            const long v = parse_int(row[label_cols[j]]);
            require(v == 0 || v == 1, ErrCat::format,
                    "release metadata: label " + std::string(kLabelColumns[j]) + " must be 0/1");
            out.labels.bits[j] = static_cast<uint8_t>(v);
        }
        for (int k = 0; k < 7; ++k) out.covariates[k] = parse_covariate(row[cov_cols[k]], k);
        manifest.rows.push_back(std::move(out));

        waves.read_row(i, w.data());
        writer.append(w);
    }
    manifest.store_checksum = writer.finalize();
    return manifest;
}

}  // namespace shdbench::data
