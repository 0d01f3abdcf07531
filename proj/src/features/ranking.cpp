#include "shdbench/features/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shdbench/eval/metrics.hpp"
#include "shdbench/rng.hpp"

namespace shdbench::features {

namespace {

constexpr int kMiBins = 10;
constexpr double kMiWeight = 0.30, kGainWeight = 0.40, kPermWeight = 0.30;

/// Mutual information (nats) between a quantile-binned feature and a binary
/// label; missing values form their own bin. Constant features have a single
/// occupied bin and an MI of exactly zero.
double binned_mi(const Eigen::MatrixXd& X, int f, const std::vector<uint8_t>& y) {
    const int n = static_cast<int>(X.rows());
    std::vector<double> present;
    for (int i = 0; i < n; ++i)
        if (!std::isnan(X(i, f))) present.push_back(X(i, f));

    std::vector<double> edges;
    if (!present.empty()) {
        std::sort(present.begin(), present.end());
        for (int b = 1; b < kMiBins; ++b) {
            const double q = present[static_cast<size_t>(
                (static_cast<long long>(b) * present.size()) / kMiBins)];
            if (edges.empty() || q > edges.back()) edges.push_back(q);
        }
    }

    const int bins = static_cast<int>(edges.size()) + 2;  // value bins + missing bin
    std::vector<std::array<double, 2>> joint(static_cast<size_t>(bins), {0.0, 0.0});
    for (int i = 0; i < n; ++i) {
        const double v = X(i, f);
        int b;
        if (std::isnan(v)) {
            b = bins - 1;
        } else {
            b = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin());
        }
        joint[static_cast<size_t>(b)][y[static_cast<size_t>(i)]] += 1.0;
    }

    double mi = 0.0;
    std::array<double, 2> py = {0.0, 0.0};
    for (const auto& row : joint) {
        py[0] += row[0];
        py[1] += row[1];
    }
    for (const auto& row : joint) {
        const double pb = (row[0] + row[1]) / n;
        if (pb == 0.0) continue;
        for (int c = 0; c < 2; ++c) {
            const double pxy = row[static_cast<size_t>(c)] / n;
            if (pxy == 0.0) continue;
            mi += pxy * std::log(pxy / (pb * (py[static_cast<size_t>(c)] / n)));
        }
    }
    return std::max(mi, 0.0);
}

double mean_defined_auroc(const Eigen::MatrixXd& probs,
                          const std::vector<data::LabelVector>& labels) {
    double sum = 0.0;
    int defined = 0;
    for (int e = 0; e < kNumTargets; ++e) {
        std::vector<double> s(static_cast<size_t>(probs.rows()));
        std::vector<uint8_t> y(static_cast<size_t>(probs.rows()));
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            s[static_cast<size_t>(i)] = probs(i, e);
            y[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)].bits[static_cast<size_t>(e)];
        }
        if (const auto a = eval::auroc(s, y)) {
            sum += *a;
            ++defined;
        }
    }
    require(defined > 0, ErrCat::data, "no endpoint has a defined AUROC");
    return sum / defined;
}

}  // namespace

std::vector<double> rank_normalize(const std::vector<double>& raw) {
    const size_t n = raw.size();
    if (n == 1) return {0.5};
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        if (raw[a] != raw[b]) return raw[a] < raw[b];
        return a < b;
    });
    std::vector<double> out(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && raw[idx[j + 1]] == raw[idx[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k)
            out[idx[k]] = (avg_rank - 1.0) / (static_cast<double>(n) - 1.0);
        i = j + 1;
    }
    return out;
}

void FeatureRanking::validate(int n_features) const {
    const auto nf = static_cast<size_t>(n_features);
    require(mi.size() == nf && gain.size() == nf && permutation.size() == nf &&
                combined.size() == nf && order.size() == nf,
            ErrCat::alignment, "feature ranking length mismatch");
    std::vector<uint8_t> seen(nf, 0);
    for (int f : order) {
        require(f >= 0 && f < n_features && !seen[static_cast<size_t>(f)], ErrCat::data,
                "feature ranking is not a permutation");
        seen[static_cast<size_t>(f)] = 1;
    }
}

FeatureRanking rank_features(const Eigen::MatrixXd& X,
                             const std::vector<data::LabelVector>& labels, const OvrGbdt& suite,
                             uint64_t seed) {
    const int n = static_cast<int>(X.rows());
    const int nf = static_cast<int>(X.cols());
    require(static_cast<int>(labels.size()) == n, ErrCat::alignment,
            "label rows do not match feature rows");
    for (const auto& m : suite.models)
        require(static_cast<int>(m.feature_gain.size()) == nf, ErrCat::alignment,
                "fitted suite feature count does not match matrix");

    FeatureRanking r;
    r.mi.assign(static_cast<size_t>(nf), 0.0);
    r.gain.assign(static_cast<size_t>(nf), 0.0);
    r.permutation.assign(static_cast<size_t>(nf), 0.0);

    std::vector<std::vector<uint8_t>> ys(kNumTargets,
                                         std::vector<uint8_t>(static_cast<size_t>(n)));
    for (int e = 0; e < kNumTargets; ++e)
        for (int i = 0; i < n; ++i)
            ys[static_cast<size_t>(e)][static_cast<size_t>(i)] =
                labels[static_cast<size_t>(i)].bits[static_cast<size_t>(e)];

    for (int f = 0; f < nf; ++f) {
        double s = 0.0;
        for (int e = 0; e < kNumTargets; ++e) s += binned_mi(X, f, ys[static_cast<size_t>(e)]);
        r.mi[static_cast<size_t>(f)] = s / kNumTargets;
    }

    for (int f = 0; f < nf; ++f) {
        double s = 0.0;
        for (const auto& m : suite.models) s += m.feature_gain[static_cast<size_t>(f)];
        r.gain[static_cast<size_t>(f)] = s / kNumTargets;
    }

    // Permutation drop: one fixed shuffle per (endpoint, feature), applied to
    // a scratch column, scored against the unpermuted baseline.
    Rng master(seed);
    Eigen::MatrixXd scratch = X;
    for (int e = 0; e < kNumTargets; ++e) {
        const auto& model = suite.models[static_cast<size_t>(e)];
        const Eigen::VectorXd base = model.predict_proba(X);
        std::vector<double> s(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) s[static_cast<size_t>(i)] = base(i);
        const auto base_auroc = eval::auroc(s, ys[static_cast<size_t>(e)]);
        if (!base_auroc) continue;  // endpoint undefined on this set

        for (int f = 0; f < nf; ++f) {
            std::vector<int> perm(static_cast<size_t>(n));
            std::iota(perm.begin(), perm.end(), 0);
            Rng rng = master.fork(static_cast<uint64_t>(e) * static_cast<uint64_t>(nf) +
                                  static_cast<uint64_t>(f));
            rng.shuffle(perm);
            for (int i = 0; i < n; ++i)
                scratch(i, f) = X(perm[static_cast<size_t>(i)], f);
            const Eigen::VectorXd pp = model.predict_proba(scratch);
            for (int i = 0; i < n; ++i) s[static_cast<size_t>(i)] = pp(i);
            const auto permuted = eval::auroc(s, ys[static_cast<size_t>(e)]);
            r.permutation[static_cast<size_t>(f)] +=
                (*base_auroc - permuted.value_or(0.5)) / kNumTargets;
            scratch.col(f) = X.col(f);
        }
    }

    const auto mi_n = rank_normalize(r.mi);
    const auto gain_n = rank_normalize(r.gain);
    const auto perm_n = rank_normalize(r.permutation);
    r.combined.resize(static_cast<size_t>(nf));
    for (int f = 0; f < nf; ++f)
        r.combined[static_cast<size_t>(f)] = kMiWeight * mi_n[static_cast<size_t>(f)] +
                                             kGainWeight * gain_n[static_cast<size_t>(f)] +
                                             kPermWeight * perm_n[static_cast<size_t>(f)];

    r.order.resize(static_cast<size_t>(nf));
    std::iota(r.order.begin(), r.order.end(), 0);
    std::sort(r.order.begin(), r.order.end(), [&](int a, int b) {
        if (r.combined[static_cast<size_t>(a)] != r.combined[static_cast<size_t>(b)])
            return r.combined[static_cast<size_t>(a)] > r.combined[static_cast<size_t>(b)];
        return a < b;
    });
    r.validate(nf);
    return r;
}

std::vector<TopkPoint> topk_sensitivity(const Eigen::MatrixXd& x_train,
                                        const std::vector<data::LabelVector>& y_train,
                                        const Eigen::MatrixXd& x_val,
                                        const std::vector<data::LabelVector>& y_val,
                                        const FeatureRanking& ranking,
                                        const std::vector<int>& k_grid, const GbdtParams& params,
                                        uint64_t seed) {
    const int nf = static_cast<int>(x_train.cols());
    ranking.validate(nf);
    require(!k_grid.empty(), ErrCat::parameter, "top-k grid is empty");
    for (int k : k_grid)
        require(k >= 1 && k <= nf, ErrCat::parameter,
                "top-k value out of range: " + std::to_string(k));

    const double nan = std::nan("");
    std::vector<TopkPoint> curve;
    for (int k : k_grid) {
        std::vector<uint8_t> keep(static_cast<size_t>(nf), 0);
        for (int j = 0; j < k; ++j) keep[static_cast<size_t>(ranking.order[static_cast<size_t>(j)])] = 1;

        // Dropped columns become all-missing; kept columns stay in place so
        // feature indices (and the k = nf case) match full training exactly.
        Eigen::MatrixXd xt = x_train;
        Eigen::MatrixXd xv = x_val;
        for (int f = 0; f < nf; ++f) {
            if (keep[static_cast<size_t>(f)]) continue;
            xt.col(f).setConstant(nan);
            xv.col(f).setConstant(nan);
        }
        const auto suite = train_gbdt_ovr(xt, y_train, params, seed);
        const auto probs = predict_ovr(suite, xv);
        curve.push_back({k, mean_defined_auroc(probs, y_val)});
    }
    return curve;
}

}  // namespace shdbench::features
