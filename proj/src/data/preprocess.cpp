#include "shdbench/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shdbench/io_util.hpp"

namespace shdbench::data {

namespace {

/// One sliding-median pass, window clamped at the edges. Even-sized edge
/// windows use the mean of the two middle order statistics.
std::vector<double> sliding_median(const std::vector<double>& x, int window) {
    const int n = static_cast<int>(x.size());
    const int h = window / 2;
    std::vector<double> out(n);
    std::vector<double> win;  // sorted
    win.reserve(window + 1);

    auto insert_val = [&](double v) { win.insert(std::upper_bound(win.begin(), win.end(), v), v); };
    auto erase_val = [&](double v) { win.erase(std::lower_bound(win.begin(), win.end(), v)); };

    for (int j = 0; j <= std::min(h, n - 1); ++j) insert_val(x[j]);
    for (int i = 0; i < n; ++i) {
        if (i > 0) {
            const int enter = i + h;
            if (enter < n) insert_val(x[enter]);
            const int leave = i - h - 1;
            if (leave >= 0) erase_val(x[leave]);
        }
        const size_t m = win.size();
        out[i] = (m % 2) ? win[m / 2] : 0.5 * (win[m / 2 - 1] + win[m / 2]);
    }
    return out;
}

}  // namespace

std::vector<double> median_filter_baseline(const std::vector<double>& x, int window1, int window2) {
    require(window1 >= 1 && window2 >= 1, ErrCat::parameter, "median windows must be >= 1");
    return sliding_median(sliding_median(x, window1), window2);
}

size_t nearest_rank(size_t n, double p) {
    // ceil(p/100 * n), guarded so that products landing a few ulps above an
    // integer (e.g. 99.9/100 * 1000) do not overshoot the mathematical rank.
    const double q = p / 100.0 * static_cast<double>(n);
    const auto rank = static_cast<size_t>(std::ceil(q * (1.0 - 4.0 * std::numeric_limits<double>::epsilon())));
    return std::clamp<size_t>(rank, 1, n);
}

double nearest_rank_percentile(std::vector<double>& values, double p) {
    require(!values.empty(), ErrCat::parameter, "percentile of empty set");
    require(p > 0.0 && p <= 100.0, ErrCat::parameter, "percentile must be in (0,100]");
    const size_t rank = nearest_rank(values.size(), p);
    std::nth_element(values.begin(), values.begin() + (rank - 1), values.end());
    return values[rank - 1];
}

PreprocessStats fit_preprocess_stats(const std::vector<const WaveformF*>& train_waveforms,
                                     int window1, int window2) {
    require(!train_waveforms.empty(), ErrCat::parameter, "fit_preprocess_stats: no training waveforms");

    // Pool baseline-subtracted samples across leads and records. Float keeps
    // the pool within memory at cohort scale; statistics accumulate in double.
    std::vector<float> pool;
    pool.reserve(train_waveforms.size() * kLeads * kSamples);
    std::vector<double> lead(kSamples);
    for (const auto* w : train_waveforms) {
        require(w->rows() == kLeads && w->cols() == kSamples, ErrCat::format,
                "fit_preprocess_stats: expected 12x2500 waveform");
        for (int l = 0; l < kLeads; ++l) {
            for (int s = 0; s < kSamples; ++s) lead[s] = (*w)(l, s);
            const auto baseline = median_filter_baseline(lead, window1, window2);
            for (int s = 0; s < kSamples; ++s)
                pool.push_back(static_cast<float>(lead[s] - baseline[s]));
        }
    }

    auto select_rank = [&](double p) {
        const size_t rank = nearest_rank(pool.size(), p);
        std::nth_element(pool.begin(), pool.begin() + (rank - 1), pool.end());
        return static_cast<double>(pool[rank - 1]);
    };

    PreprocessStats stats;
    stats.median_window_1 = window1;
    stats.median_window_2 = window2;
    stats.clip_low = select_rank(0.1);
    stats.clip_high = select_rank(99.9);
    require(stats.clip_low < stats.clip_high, ErrCat::data,
            "degenerate statistics: clip bounds coincide (constant input?)");

    double sum = 0.0;
    for (float v : pool) sum += std::clamp(static_cast<double>(v), stats.clip_low, stats.clip_high);
    const double n = static_cast<double>(pool.size());
    stats.mean = sum / n;
    double ss = 0.0;
    for (float v : pool) {
        const double d = std::clamp(static_cast<double>(v), stats.clip_low, stats.clip_high) - stats.mean;
        ss += d * d;
    }
    stats.std = std::sqrt(ss / n);
    require(stats.std > 0.0, ErrCat::data, "degenerate statistics: zero variance");
    return stats;
}

PreprocessStats fit_preprocess_stats(const std::vector<WaveformF>& train_waveforms,
                                     int window1, int window2) {
    std::vector<const WaveformF*> ptrs;
    ptrs.reserve(train_waveforms.size());
    for (const auto& w : train_waveforms) ptrs.push_back(&w);
    return fit_preprocess_stats(ptrs, window1, window2);
}

WaveformF preprocess_waveform(const WaveformF& w, const PreprocessStats& stats) {
    require(w.rows() == kLeads && w.cols() == kSamples, ErrCat::format,
            "preprocess_waveform: expected 12x2500 waveform");
    require(stats.std > 0.0, ErrCat::parameter, "preprocess_waveform: stats not fitted");

    WaveformF out(kLeads, kSamples);
    std::vector<double> lead(kSamples);
    for (int l = 0; l < kLeads; ++l) {
        for (int s = 0; s < kSamples; ++s) lead[s] = w(l, s);
        const auto baseline = median_filter_baseline(lead, stats.median_window_1, stats.median_window_2);
        for (int s = 0; s < kSamples; ++s) {
            const double clipped = std::clamp(lead[s] - baseline[s], stats.clip_low, stats.clip_high);
            out(l, s) = static_cast<float>((clipped - stats.mean) / stats.std);
        }
    }
    return out;
}

void write_stats_file(const std::string& path, const PreprocessStats& stats) {
    write_kv_file(path, {
        {"clip_low", format_double(stats.clip_low)},
        {"clip_high", format_double(stats.clip_high)},
        {"mean", format_double(stats.mean)},
        {"std", format_double(stats.std)},
        {"median_window_1", std::to_string(stats.median_window_1)},
        {"median_window_2", std::to_string(stats.median_window_2)},
    });
}

PreprocessStats read_stats_file(const std::string& path) {
    const auto kv = read_kv_file(path);
    auto get = [&](const std::string& k) {
        auto it = kv.find(k);
        require(it != kv.end(), ErrCat::format, "stats file missing '" + k + "'");
        return it->second;
    };
    PreprocessStats s;
    s.clip_low = parse_double(get("clip_low"));
    s.clip_high = parse_double(get("clip_high"));
    s.mean = parse_double(get("mean"));
    s.std = parse_double(get("std"));
    s.median_window_1 = static_cast<int>(parse_int(get("median_window_1")));
    s.median_window_2 = static_cast<int>(parse_int(get("median_window_2")));
    return s;
}

}  // namespace shdbench::data
