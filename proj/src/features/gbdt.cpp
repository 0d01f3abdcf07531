#include "shdbench/features/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shdbench/eval/metrics.hpp"
#include "shdbench/rng.hpp"

namespace shdbench::features {

namespace {

constexpr double kProbClamp = 1e-9;
constexpr double kDenomGuard = 1e-12;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double score_term(double g, double h, double lam) {
    return g * g / (std::max(h + lam, kDenomGuard));
}

struct SplitChoice {
    bool valid = false;
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    bool default_left = true;
};

}  // namespace

uint64_t ovr_endpoint_seed(uint64_t seed, int endpoint) {
    return Rng::splitmix(seed + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(endpoint + 1));
}

void GbdtParams::validate() const {
    require(n_trees >= 1, ErrCat::parameter, "n_trees must be >= 1");
    require(max_depth >= 1, ErrCat::parameter, "max_depth must be >= 1");
    require(learning_rate > 0.0 && learning_rate <= 1.0, ErrCat::parameter,
            "learning_rate must be in (0,1]");
    require(reg_lambda >= 0.0, ErrCat::parameter, "reg_lambda must be >= 0");
    require(gamma >= 0.0, ErrCat::parameter, "gamma must be >= 0");
    require(min_child_weight >= 0.0, ErrCat::parameter, "min_child_weight must be >= 0");
    require(subsample > 0.0 && subsample <= 1.0, ErrCat::parameter, "subsample must be in (0,1]");
    require(colsample > 0.0 && colsample <= 1.0, ErrCat::parameter, "colsample must be in (0,1]");
}

double GbdtTree::predict(const double* row) const {
    int i = 0;
    while (nodes[i].feature >= 0) {
        const double v = row[nodes[i].feature];
        const bool left = std::isnan(v) ? nodes[i].default_left : v < nodes[i].threshold;
        i = left ? nodes[i].left : nodes[i].right;
    }
    return nodes[i].value;
}

double GbdtModel::predict_raw(const double* row) const {
    double s = base_score;
    for (const auto& t : trees) s += t.predict(row);
    return s;
}

double GbdtModel::predict_proba(const double* row) const {
    return std::clamp(sigmoid(predict_raw(row)), kProbClamp, 1.0 - kProbClamp);
}

Eigen::VectorXd GbdtModel::predict_proba(const Eigen::MatrixXd& X) const {
    const int n = static_cast<int>(X.rows());
    Eigen::VectorXd out(n);
    std::vector<double> row(static_cast<size_t>(X.cols()));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < X.cols(); ++j) row[static_cast<size_t>(j)] = X(i, j);
        out(i) = predict_proba(row.data());
    }
    return out;
}

GbdtModel train_gbdt(const Eigen::MatrixXd& X, const std::vector<uint8_t>& y,
                     const GbdtParams& params, uint64_t seed) {
    params.validate();
    const int n = static_cast<int>(X.rows());
    const int nf = static_cast<int>(X.cols());
    require(n >= 2, ErrCat::data, "training set needs at least 2 rows");
    require(nf >= 1, ErrCat::data, "training set needs at least 1 feature");
    require(static_cast<int>(y.size()) == n, ErrCat::alignment,
            "label count does not match feature rows");
    int pos = 0;
    for (uint8_t v : y) {
        require(v == 0 || v == 1, ErrCat::data, "labels must be 0/1");
        pos += v;
    }
    require(pos >= 1 && pos < n, ErrCat::data, "training labels are single-class");

    // Presorted non-missing row lists, one per feature, reused by every tree.
    std::vector<std::vector<int>> order(static_cast<size_t>(nf));
    for (int f = 0; f < nf; ++f) {
        auto& of = order[static_cast<size_t>(f)];
        for (int i = 0; i < n; ++i)
            if (!std::isnan(X(i, f))) of.push_back(i);
        std::sort(of.begin(), of.end(), [&](int a, int b) {
            if (X(a, f) != X(b, f)) return X(a, f) < X(b, f);
            return a < b;
        });
    }

    GbdtModel model;
    const double p0 = std::clamp(double(pos) / n, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(p0 / (1.0 - p0));
    model.feature_gain.assign(static_cast<size_t>(nf), 0.0);

    std::vector<double> raw(static_cast<size_t>(n), model.base_score);
    std::vector<double> g(static_cast<size_t>(n)), h(static_cast<size_t>(n));
    std::vector<int> node_of(static_cast<size_t>(n));
    std::vector<double> row_buf(static_cast<size_t>(nf));
    Rng master(seed);

    for (int t = 0; t < params.n_trees; ++t) {
        Rng tree_rng = master.fork(static_cast<uint64_t>(t));

        std::vector<uint8_t> in_col(static_cast<size_t>(nf), 1);
        if (params.colsample < 1.0) {
            const int k = std::max(1, static_cast<int>(std::llround(params.colsample * nf)));
            std::vector<int> cols(static_cast<size_t>(nf));
            std::iota(cols.begin(), cols.end(), 0);
            tree_rng.shuffle(cols);
            std::fill(in_col.begin(), in_col.end(), 0);
            for (int j = 0; j < k; ++j) in_col[static_cast<size_t>(cols[static_cast<size_t>(j)])] = 1;
        }

        double g_root = 0.0, h_root = 0.0;
        for (int i = 0; i < n; ++i) {
            const bool in = params.subsample >= 1.0 || tree_rng.bernoulli(params.subsample);
            if (in) {
                const double p = sigmoid(raw[static_cast<size_t>(i)]);
                g[static_cast<size_t>(i)] = p - y[static_cast<size_t>(i)];
                h[static_cast<size_t>(i)] = p * (1.0 - p);
                node_of[static_cast<size_t>(i)] = 0;
            } else {
                g[static_cast<size_t>(i)] = 0.0;
                h[static_cast<size_t>(i)] = 0.0;
                node_of[static_cast<size_t>(i)] = -1;
            }
            g_root += g[static_cast<size_t>(i)];
            h_root += h[static_cast<size_t>(i)];
        }

        GbdtTree tree;
        tree.nodes.emplace_back();
        std::vector<double> g_tot = {g_root};
        std::vector<double> h_tot = {h_root};
        int frontier_begin = 0;
        int frontier_end = 1;

        for (int depth = 0; depth < params.max_depth && frontier_begin < frontier_end; ++depth) {
            const int width = frontier_end - frontier_begin;
            std::vector<SplitChoice> best(static_cast<size_t>(width));
            std::vector<double> pres_g(static_cast<size_t>(width)), pres_h(static_cast<size_t>(width));
            std::vector<double> run_g(static_cast<size_t>(width)), run_h(static_cast<size_t>(width));
            std::vector<double> last_v(static_cast<size_t>(width));
            std::vector<int> run_n(static_cast<size_t>(width));

            for (int f = 0; f < nf; ++f) {
                if (!in_col[static_cast<size_t>(f)]) continue;
                const auto& of = order[static_cast<size_t>(f)];
                std::fill(pres_g.begin(), pres_g.end(), 0.0);
                std::fill(pres_h.begin(), pres_h.end(), 0.0);
                for (int i : of) {
                    const int d = node_of[static_cast<size_t>(i)];
                    if (d < frontier_begin) continue;
                    pres_g[static_cast<size_t>(d - frontier_begin)] += g[static_cast<size_t>(i)];
                    pres_h[static_cast<size_t>(d - frontier_begin)] += h[static_cast<size_t>(i)];
                }
                std::fill(run_g.begin(), run_g.end(), 0.0);
                std::fill(run_h.begin(), run_h.end(), 0.0);
                std::fill(run_n.begin(), run_n.end(), 0);
                for (int i : of) {
                    const int d = node_of[static_cast<size_t>(i)];
                    if (d < frontier_begin) continue;
                    const int k = d - frontier_begin;
                    const double v = X(i, f);
                    if (run_n[static_cast<size_t>(k)] > 0 && v > last_v[static_cast<size_t>(k)]) {
                        double thr = 0.5 * (last_v[static_cast<size_t>(k)] + v);
                        if (!(thr > last_v[static_cast<size_t>(k)])) thr = v;
                        const double gl = run_g[static_cast<size_t>(k)];
                        const double hl = run_h[static_cast<size_t>(k)];
                        const double gr = pres_g[static_cast<size_t>(k)] - gl;
                        const double hr = pres_h[static_cast<size_t>(k)] - hl;
                        const double gm = g_tot[static_cast<size_t>(d)] - pres_g[static_cast<size_t>(k)];
                        const double hm = h_tot[static_cast<size_t>(d)] - pres_h[static_cast<size_t>(k)];
                        const double parent = score_term(g_tot[static_cast<size_t>(d)],
                                                         h_tot[static_cast<size_t>(d)],
                                                         params.reg_lambda);
                        // Missing rows tried on both sides; better side wins.
                        for (const bool miss_left : {true, false}) {
                            const double hle = hl + (miss_left ? hm : 0.0);
                            const double hre = hr + (miss_left ? 0.0 : hm);
                            if (hle < params.min_child_weight || hre < params.min_child_weight)
                                continue;
                            const double gle = gl + (miss_left ? gm : 0.0);
                            const double gre = gr + (miss_left ? 0.0 : gm);
                            const double gain = 0.5 * (score_term(gle, hle, params.reg_lambda) +
                                                       score_term(gre, hre, params.reg_lambda) -
                                                       parent) -
                                                params.gamma;
                            auto& b = best[static_cast<size_t>(k)];
                            if (!b.valid || gain > b.gain) {
                                b.valid = true;
                                b.gain = gain;
                                b.feature = f;
                                b.threshold = thr;
                                b.default_left = miss_left;
                            }
                        }
                    }
                    run_g[static_cast<size_t>(k)] += g[static_cast<size_t>(i)];
                    run_h[static_cast<size_t>(k)] += h[static_cast<size_t>(i)];
                    run_n[static_cast<size_t>(k)] += 1;
                    last_v[static_cast<size_t>(k)] = v;
                }
            }

            // Turn winners into internal nodes, the rest into leaves.
            const int child_begin = frontier_end;
            for (int d = frontier_begin; d < frontier_end; ++d) {
                const auto& b = best[static_cast<size_t>(d - frontier_begin)];
                auto& node = tree.nodes[static_cast<size_t>(d)];
                if (!b.valid || b.gain <= 0.0) {
                    node.feature = -1;
                    node.value = -params.learning_rate * g_tot[static_cast<size_t>(d)] /
                                 std::max(h_tot[static_cast<size_t>(d)] + params.reg_lambda,
                                          kDenomGuard);
                    continue;
                }
                node.feature = b.feature;
                node.threshold = b.threshold;
                node.default_left = b.default_left;
                node.left = static_cast<int>(tree.nodes.size());
                node.right = node.left + 1;
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
                g_tot.resize(tree.nodes.size(), 0.0);
                h_tot.resize(tree.nodes.size(), 0.0);
                model.feature_gain[static_cast<size_t>(b.feature)] += b.gain;
            }

            // Route rows of split nodes to their children.
            for (int i = 0; i < n; ++i) {
                const int d = node_of[static_cast<size_t>(i)];
                if (d < frontier_begin || d >= frontier_end) continue;
                const auto& node = tree.nodes[static_cast<size_t>(d)];
                if (node.feature < 0) continue;
                const double v = X(i, node.feature);
                const bool left = std::isnan(v) ? node.default_left : v < node.threshold;
                const int child = left ? node.left : node.right;
                node_of[static_cast<size_t>(i)] = child;
                g_tot[static_cast<size_t>(child)] += g[static_cast<size_t>(i)];
                h_tot[static_cast<size_t>(child)] += h[static_cast<size_t>(i)];
            }

            frontier_begin = child_begin;
            frontier_end = static_cast<int>(tree.nodes.size());
        }

        // Depth cap reached: any still-open node becomes a leaf.
        for (int d = frontier_begin; d < frontier_end; ++d) {
            auto& node = tree.nodes[static_cast<size_t>(d)];
            node.feature = -1;
            node.value = -params.learning_rate * g_tot[static_cast<size_t>(d)] /
                         std::max(h_tot[static_cast<size_t>(d)] + params.reg_lambda, kDenomGuard);
        }

        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < nf; ++j) row_buf[static_cast<size_t>(j)] = X(i, j);
            raw[static_cast<size_t>(i)] += tree.predict(row_buf.data());
        }
        model.trees.push_back(std::move(tree));
    }
    return model;
}

OvrGbdt train_gbdt_ovr(const Eigen::MatrixXd& X, const std::vector<data::LabelVector>& labels,
                       const GbdtParams& params, uint64_t seed) {
    require(static_cast<Eigen::Index>(labels.size()) == X.rows(), ErrCat::alignment,
            "label rows do not match feature rows");
    const auto spec = data::TargetSpec::standard();
    OvrGbdt suite;
    suite.params = params;
    suite.seed = seed;
    for (int e = 0; e < kNumTargets; ++e) {
        std::vector<uint8_t> y(labels.size());
        int pos = 0;
        for (size_t i = 0; i < labels.size(); ++i) {
            y[i] = labels[i].bits[static_cast<size_t>(e)];
            pos += y[i];
        }
        require(pos > 0, ErrCat::data,
                "endpoint " + spec.endpoints[static_cast<size_t>(e)].name +
                    " has no positive training records");
        suite.models[static_cast<size_t>(e)] = train_gbdt(X, y, params, ovr_endpoint_seed(seed, e));
    }
    return suite;
}

Eigen::MatrixXd predict_ovr(const OvrGbdt& suite, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out(X.rows(), kNumTargets);
    for (int e = 0; e < kNumTargets; ++e)
        out.col(e) = suite.models[static_cast<size_t>(e)].predict_proba(X);
    return out;
}

TuneResult tune_gbdt(const GbdtSearchSpace& space, int trials, uint64_t seed,
                     const Eigen::MatrixXd& x_train, const std::vector<data::LabelVector>& y_train,
                     const Eigen::MatrixXd& x_val, const std::vector<data::LabelVector>& y_val) {
    require(trials >= 1, ErrCat::parameter, "tuning needs at least one trial");
    const auto non_empty = [&](size_t n, const char* what) {
        require(n > 0, ErrCat::parameter, std::string("empty candidate list: ") + what);
    };
    non_empty(space.n_trees.size(), "n_trees");
    non_empty(space.max_depth.size(), "max_depth");
    non_empty(space.learning_rate.size(), "learning_rate");
    non_empty(space.reg_lambda.size(), "reg_lambda");
    non_empty(space.gamma.size(), "gamma");
    non_empty(space.min_child_weight.size(), "min_child_weight");
    non_empty(space.subsample.size(), "subsample");
    non_empty(space.colsample.size(), "colsample");

    Rng rng(seed);
    const auto pick_i = [&](const std::vector<int>& v) {
        return v[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(v.size()) - 1))];
    };
    const auto pick_d = [&](const std::vector<double>& v) {
        return v[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(v.size()) - 1))];
    };

    TuneResult result;
    for (int t = 0; t < trials; ++t) {
        GbdtParams p;
        p.n_trees = pick_i(space.n_trees);
        p.max_depth = pick_i(space.max_depth);
        p.learning_rate = pick_d(space.learning_rate);
        p.reg_lambda = pick_d(space.reg_lambda);
        p.gamma = pick_d(space.gamma);
        p.min_child_weight = pick_d(space.min_child_weight);
        p.subsample = pick_d(space.subsample);
        p.colsample = pick_d(space.colsample);

        const auto suite = train_gbdt_ovr(x_train, y_train, p, seed);
        const auto probs = predict_ovr(suite, x_val);
        double sum = 0.0;
        int defined = 0;
        for (int e = 0; e < kNumTargets; ++e) {
            std::vector<double> s(static_cast<size_t>(probs.rows()));
            std::vector<uint8_t> yy(static_cast<size_t>(probs.rows()));
            for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                s[static_cast<size_t>(i)] = probs(i, e);
                yy[static_cast<size_t>(i)] = y_val[static_cast<size_t>(i)].bits[static_cast<size_t>(e)];
            }
            if (const auto a = eval::auroc(s, yy)) {
                sum += *a;
                ++defined;
            }
        }
        require(defined > 0, ErrCat::data, "no endpoint has a defined validation AUROC");
        const double score = sum / defined;
        result.trials.push_back({p, score});
        if (result.trials.size() == 1 || score > result.best_score) {
            result.best = p;
            result.best_score = score;
        }
    }
    return result;
}

}  // namespace shdbench::features
