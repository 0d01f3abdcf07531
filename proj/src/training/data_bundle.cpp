#include "shdbench/training/data_bundle.hpp"

#include <cmath>

namespace shdbench::training {

DataBundle build_bundle(const data::CohortManifest& manifest,
                        const std::vector<data::WaveformF>& waveforms) {
    require(manifest.rows.size() == waveforms.size(), ErrCat::alignment,
            "manifest rows and waveforms differ in count");
    std::vector<const data::WaveformF*> train_waves;
    for (size_t i = 0; i < manifest.rows.size(); ++i)
        if (manifest.rows[i].split == data::Split::train) train_waves.push_back(&waveforms[i]);
    require(!train_waves.empty(), ErrCat::data, "empty train split; nothing to fit on");

    DataBundle out;
    out.wave_stats = data::fit_preprocess_stats(train_waves);

    out.cov_mean = Eigen::RowVectorXd::Zero(7);
    out.cov_std = Eigen::RowVectorXd::Zero(7);
    for (const auto& row : manifest.rows) {
        if (row.split != data::Split::train) continue;
        for (int c = 0; c < 7; ++c) out.cov_mean(c) += row.covariates[size_t(c)];
    }
    out.cov_mean /= double(train_waves.size());
    for (const auto& row : manifest.rows) {
        if (row.split != data::Split::train) continue;
        for (int c = 0; c < 7; ++c) {
            double d = row.covariates[size_t(c)] - out.cov_mean(c);
            out.cov_std(c) += d * d;
        }
    }
    for (int c = 0; c < 7; ++c) {
        out.cov_std(c) = std::sqrt(out.cov_std(c) / double(train_waves.size()));
        // constant column: pass through centered, do not divide by zero
        if (out.cov_std(c) <= 0.0) out.cov_std(c) = 1.0;
    }

    std::vector<std::vector<double>> cov_rows[3];
    for (size_t i = 0; i < manifest.rows.size(); ++i) {
        const auto& row = manifest.rows[i];
        SplitTensors* dst = nullptr;
        int which = 0;
        switch (row.split) {
            case data::Split::train: dst = &out.train; which = 0; break;
            case data::Split::val: dst = &out.val; which = 1; break;
            case data::Split::test: dst = &out.test; which = 2; break;
        }
        dst->waves.push_back(data::preprocess_waveform(waveforms[i], out.wave_stats));
        dst->labels.push_back(row.labels);
        dst->record_ids.push_back(row.record_id);
        std::vector<double> cr(7);
        for (int c = 0; c < 7; ++c)
            cr[size_t(c)] = (row.covariates[size_t(c)] - out.cov_mean(c)) / out.cov_std(c);
        cov_rows[which].push_back(std::move(cr));
    }
    SplitTensors* splits[3] = {&out.train, &out.val, &out.test};
    for (int s = 0; s < 3; ++s) {
        auto& rows = cov_rows[s];
        splits[s]->cov.resize(Eigen::Index(rows.size()), 7);
        for (size_t r = 0; r < rows.size(); ++r)
            for (int c = 0; c < 7; ++c) splits[s]->cov(Eigen::Index(r), c) = rows[r][size_t(c)];
    }
    return out;
}

models::Batch make_batch(const SplitTensors& split, const std::vector<int>& idx, int endpoint) {
    require(endpoint < kNumTargets, ErrCat::parameter, "endpoint index out of range");
    models::Batch b;
    b.wave.reserve(idx.size());
    b.cov.resize(Eigen::Index(idx.size()), 7);
    b.y.resize(Eigen::Index(idx.size()), endpoint < 0 ? kNumTargets : 1);
    for (size_t r = 0; r < idx.size(); ++r) {
        int i = idx[r];
        require(i >= 0 && i < split.n(), ErrCat::parameter, "batch row index out of range");
        b.wave.push_back(split.waves[size_t(i)].cast<double>());
        b.cov.row(Eigen::Index(r)) = split.cov.row(i);
        if (endpoint < 0) {
            for (int c = 0; c < kNumTargets; ++c)
                b.y(Eigen::Index(r), c) = double(split.labels[size_t(i)].bits[size_t(c)]);
        } else {
            b.y(Eigen::Index(r), 0) = double(split.labels[size_t(i)].bits[size_t(endpoint)]);
        }
    }
    return b;
}

}  // namespace shdbench::training
