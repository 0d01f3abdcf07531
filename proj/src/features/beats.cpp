#include "shdbench/features/beats.hpp"

#include <algorithm>
#include <cmath>

namespace shdbench::features {

namespace {

constexpr int kMwiWindow = 37;     // ~150 ms at 250 Hz
constexpr int kRefractory = 50;    // 200 ms
constexpr int kRefineBack = 30;    // MWI crest lags the R wave by ~window/2
constexpr int kRefineFwd = 6;

}  // namespace

std::vector<double> rms_envelope(const data::WaveformF& w) {
    const int n = static_cast<int>(w.cols());
    const int leads = static_cast<int>(w.rows());
    std::vector<double> e(n);
    for (int t = 0; t < n; ++t) {
        double s = 0.0;
        for (int l = 0; l < leads; ++l) {
            const double v = w(l, t);
            s += v * v;
        }
        e[t] = std::sqrt(s / leads);
    }
    return e;
}

BeatDetection detect_beats(const std::vector<double>& signal) {
    const int n = static_cast<int>(signal.size());
    BeatDetection out;
    if (n < kMwiWindow + 2) return out;

    // Centered derivative, squared, then a trailing moving average.
    std::vector<double> sq(n, 0.0);
    for (int i = 1; i + 1 < n; ++i) {
        const double d = (signal[i + 1] - signal[i - 1]) * 0.5;
        sq[i] = d * d;
    }
    std::vector<double> mwi(n, 0.0);
    double run = 0.0;
    for (int i = 0; i < n; ++i) {
        run += sq[i];
        if (i >= kMwiWindow) run -= sq[i - kMwiWindow];
        mwi[i] = run / kMwiWindow;
    }

    // Adaptive threshold as a fraction of the strongest crest; zero energy
    // means no beats, and isolated low-energy waves (P, T) stay below it.
    const double theta = 0.25 * *std::max_element(mwi.begin(), mwi.end());
    if (!(theta > 0.0)) return out;

    // Local maxima above threshold, forward pass with refractory replacement.
    std::vector<int> crests;
    for (int i = 1; i + 1 < n; ++i) {
        if (mwi[i] < theta) continue;
        if (!(mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])) continue;
        if (!crests.empty() && i - crests.back() < kRefractory) {
            if (mwi[i] > mwi[crests.back()]) crests.back() = i;
        } else {
            crests.push_back(i);
        }
    }

    // Refine each crest to the signal's own absolute extremum nearby.
    std::vector<int> peaks;
    for (int c : crests) {
        const int lo = std::max(0, c - kRefineBack);
        const int hi = std::min(n - 1, c + kRefineFwd);
        int best = lo;
        for (int i = lo + 1; i <= hi; ++i)
            if (std::abs(signal[i]) > std::abs(signal[best])) best = i;
        peaks.push_back(best);
    }

    // Refinement can collapse neighbours onto the same extremum; enforce the
    // ordering and spacing contract keeping the stronger peak.
    std::sort(peaks.begin(), peaks.end());
    for (int p : peaks) {
        if (!out.peaks.empty()) {
            const int last = out.peaks.back();
            if (p == last) continue;
            if (p - last < kRefractory) {
                if (std::abs(signal[p]) > std::abs(signal[last])) out.peaks.back() = p;
                continue;
            }
        }
        out.peaks.push_back(p);
    }
    return out;
}

}  // namespace shdbench::features
