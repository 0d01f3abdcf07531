#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "shdbench/data/types.hpp"
#include "shdbench/eval/metrics.hpp"
#include "shdbench/eval/projection.hpp"
#include "shdbench/io_util.hpp"
#include "shdbench/rng.hpp"
#include "test_util.hpp"

using namespace shdbench;
using namespace shdbench::eval;
using shdbench::test::TempDir;
using shdbench::test::thrown_category;

namespace {

// Pair-counting AUROC: wins plus half-credit ties over all pos-neg pairs.
double auroc_pair_counting(const std::vector<double>& s, const std::vector<uint8_t>& y) {
    double wins = 0.0, ties = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        for (size_t j = 0; j < s.size(); ++j) {
            if (y[j]) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) ties += 1.0;
        }
    }
    return (wins + 0.5 * ties) / double(pairs);
}

// Precision-at-each-positive by repeated selection: highest remaining score,
// ties resolved toward the smallest original index.
double auprc_precision_walk(const std::vector<double>& s, const std::vector<uint8_t>& y) {
    const size_t n = s.size();
    std::vector<bool> used(n, false);
    size_t total_pos = 0;
    for (uint8_t v : y) total_pos += v;
    double sum = 0.0;
    size_t seen_pos = 0;
    for (size_t rank = 1; rank <= n; ++rank) {
        size_t pick = n;
        for (size_t i = 0; i < n; ++i) {
            if (used[i]) continue;
            if (pick == n || s[i] > s[pick]) pick = i;
        }
        used[pick] = true;
        if (y[pick]) {
            ++seen_pos;
            sum += double(seen_pos) / double(rank);
        }
    }
    return sum / double(total_pos);
}

PredictionSet make_predictions(const Eigen::MatrixXd& probs) {
    PredictionSet p;
    p.probabilities = probs;
    p.model_id = "test";
    p.config_hash = "0";
    return p;
}

}  // namespace

TEST_CASE("auroc and auprc match worked values") {
    CHECK(*auroc({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75);
    CHECK(*auprc({0.9, 0.2}, {0, 1}) == 0.5);
    CHECK(*auprc({0.2, 0.9}, {0, 1}) == 1.0);
    CHECK(*auroc({0.1, 0.2, 0.3, 0.9}, {0, 0, 1, 1}) == 1.0);
    CHECK(*auroc({0.4, 0.4, 0.4}, {0, 1, 0}) == 0.5);
}

TEST_CASE("rank-based auroc equals brute-force pair counting") {
    Rng rng(101);
    int done = 0;
    while (done < 1000) {
        const size_t n = 2 + rng.uniform_int(0, 198);
        std::vector<double> s(n);
        std::vector<uint8_t> y(n);
        const bool coarse = rng.bernoulli(0.5);  // force heavy ties half the time
        size_t pos = 0;
        for (size_t i = 0; i < n; ++i) {
            s[i] = coarse ? std::round(rng.uniform(0.0, 10.0)) / 10.0 : rng.uniform(0.0, 1.0);
            y[i] = rng.bernoulli(rng.uniform(0.1, 0.9)) ? 1 : 0;
            pos += y[i];
        }
        if (pos == 0 || pos == n) continue;
        ++done;
        const double fast = *auroc(s, y);
        const double brute = auroc_pair_counting(s, y);
        CHECK(std::abs(fast - brute) <= 1e-12);
    }
}

TEST_CASE("average precision equals brute-force precision walk") {
    Rng rng(103);
    int done = 0;
    while (done < 1000) {
        const size_t n = 1 + rng.uniform_int(0, 199);
        std::vector<double> s(n);
        std::vector<uint8_t> y(n);
        const bool coarse = rng.bernoulli(0.5);
        size_t pos = 0;
        for (size_t i = 0; i < n; ++i) {
            s[i] = coarse ? std::round(rng.uniform(0.0, 8.0)) / 8.0 : rng.uniform(0.0, 1.0);
            y[i] = rng.bernoulli(0.3) ? 1 : 0;
            pos += y[i];
        }
        if (pos == 0) continue;
        ++done;
        const double fast = *auprc(s, y);
        const double brute = auprc_precision_walk(s, y);
        CHECK(std::abs(fast - brute) <= 1e-12);
    }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
    Rng rng(107);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 5 + rng.uniform_int(0, 100);
        std::vector<double> s(n);
        std::vector<uint8_t> y(n);
        size_t pos = 0;
        for (size_t i = 0; i < n; ++i) {
            s[i] = rng.uniform(-4.0, 4.0);
            y[i] = rng.bernoulli(0.4) ? 1 : 0;
            pos += y[i];
        }
        if (pos == 0 || pos == n) continue;
        std::vector<double> t1(n), t2(n);
        for (size_t i = 0; i < n; ++i) {
            t1[i] = std::exp(s[i]);                    // strictly increasing
            t2[i] = std::atan(3.0 * s[i]) + 0.001 * s[i];
        }
        const double base = *auroc(s, y);
        CHECK(*auroc(t1, y) == doctest::Approx(base).epsilon(1e-12));
        CHECK(*auroc(t2, y) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("auroc complement symmetry without ties") {
    Rng rng(109);
    for (int trial = 0; trial < 100; ++trial) {
        const size_t n = 5 + rng.uniform_int(0, 60);
        std::vector<double> s(n), neg(n);
        std::vector<uint8_t> y(n);
        size_t pos = 0;
        for (size_t i = 0; i < n; ++i) {
            s[i] = rng.uniform(0.0, 1.0) + i * 1e-9;  // distinct scores
            neg[i] = -s[i];
            y[i] = rng.bernoulli(0.5) ? 1 : 0;
            pos += y[i];
        }
        if (pos == 0 || pos == n) continue;
        CHECK(*auroc(neg, y) == doctest::Approx(1.0 - *auroc(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("undefined metrics are signalled, not guessed") {
    CHECK_FALSE(auroc({0.1, 0.5}, {1, 1}).has_value());
    CHECK_FALSE(auroc({0.1, 0.5}, {0, 0}).has_value());
    CHECK_FALSE(auprc({0.1, 0.5}, {0, 0}).has_value());
    CHECK(auprc({0.1, 0.5}, {1, 1}).has_value());
    CHECK(thrown_category([&] { auroc({0.1}, {1, 0}); }) == ErrCat::alignment);
    CHECK(thrown_category([&] { auroc({}, {}); }) == ErrCat::alignment);
    const double nan = std::nan("");
    CHECK(thrown_category([&] { auroc({nan, 0.2}, {1, 0}); }) == ErrCat::data);
}

TEST_CASE("average precision concentrates at prevalence under random scores") {
    Rng rng(113);
    const size_t n = 10000;
    for (const double pi : {0.1, 0.3}) {
        std::vector<double> s(n);
        std::vector<uint8_t> y(n);
        for (size_t i = 0; i < n; ++i) {
            s[i] = rng.uniform(0.0, 1.0);
            y[i] = rng.bernoulli(pi) ? 1 : 0;
        }
        CHECK(std::abs(*auprc(s, y) - pi) < 0.05);
    }
}

TEST_CASE("threshold metrics follow the inclusive convention") {
    const auto a = threshold_metrics({0.6, 0.4}, {1, 0}, 0.5);
    CHECK(a.acc == 1.0);
    CHECK(a.f1 == 1.0);

    const auto b = threshold_metrics({0.6, 0.6, 0.4}, {1, 0, 0}, 0.5);
    CHECK(b.tp == 1);
    CHECK(b.fp == 1);
    CHECK(b.fn == 0);
    CHECK(b.tn == 1);
    CHECK(b.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(b.acc == doctest::Approx(2.0 / 3.0));

    // No predicted positives with an actual positive present.
    const auto c = threshold_metrics({0.2, 0.3}, {1, 0}, 0.5);
    CHECK(c.f1 == 0.0);

    // All-negative truth and no predictions: 2TP+FP+FN = 0, F1 pinned to 0.
    const auto d = threshold_metrics({0.2, 0.3}, {0, 0}, 0.5);
    CHECK(d.f1 == 0.0);
    CHECK(d.acc == 1.0);

    // Boundary scores count as positive predictions.
    const auto e = threshold_metrics({0.5}, {1}, 0.5);
    CHECK(e.tp == 1);

    CHECK(thrown_category([&] { threshold_metrics({0.5}, {1}, 0.0); }) == ErrCat::parameter);
    CHECK(thrown_category([&] { threshold_metrics({0.5}, {1}, 1.0); }) == ErrCat::parameter);
}

TEST_CASE("macro report averages included labels and lists exclusions") {
    Rng rng(117);
    const int n = 400;
    Eigen::MatrixXd probs(n, kNumTargets);
    std::vector<data::LabelVector> labels(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kNumTargets; ++j) {
            const uint8_t y = rng.bernoulli(0.3) ? 1 : 0;
            labels[i].bits[j] = j == 2 ? 0 : y;  // label 2 all-negative
            const double lift = labels[i].bits[j] ? 0.25 : 0.0;
            probs(i, j) = std::clamp(rng.uniform(0.05, 0.7) + lift, 0.01, 0.99);
        }

    const auto pred = make_predictions(probs);
    const auto report = macro_report(pred, labels, 0.5);

    REQUIRE(report.excluded.size() == 1);
    CHECK(report.excluded[0].first == 2);
    CHECK(report.tau == 0.5);
    CHECK_FALSE(report.per_label[2].auroc.has_value());
    CHECK_FALSE(report.per_label[2].auprc.has_value());

    const auto included = report.included_labels();
    CHECK(included.size() == 5);
    double sum_auroc = 0.0, sum_acc = 0.0, sum_f1 = 0.0, sum_auprc = 0.0;
    for (int j : included) {
        sum_auroc += *report.per_label[j].auroc;
        sum_auprc += *report.per_label[j].auprc;
        sum_acc += report.per_label[j].acc;
        sum_f1 += report.per_label[j].f1;
    }
    CHECK(report.macro_auroc == doctest::Approx(sum_auroc / 5).epsilon(1e-15));
    CHECK(report.macro_auprc == doctest::Approx(sum_auprc / 5).epsilon(1e-15));
    CHECK(report.macro_acc == doctest::Approx(sum_acc / 5).epsilon(1e-15));
    CHECK(report.macro_f1 == doctest::Approx(sum_f1 / 5).epsilon(1e-15));

    // Prevalence column is echoed per label.
    for (int j = 0; j < kNumTargets; ++j) {
        size_t pos = 0;
        for (const auto& l : labels) pos += l.bits[j];
        CHECK(report.per_label[j].prevalence == doctest::Approx(double(pos) / n));
    }

    CHECK(thrown_category([&] { macro_report(pred, labels, 0.5, true); }) == ErrCat::data);

    std::vector<data::LabelVector> short_labels(labels.begin(), labels.end() - 1);
    CHECK(thrown_category([&] { macro_report(pred, short_labels, 0.5); }) == ErrCat::alignment);

    Eigen::MatrixXd bad = probs;
    bad(0, 0) = 1.0;  // boundary excluded
    CHECK(thrown_category([&] { macro_report(make_predictions(bad), labels, 0.5); }) == ErrCat::data);
}

TEST_CASE("macro means with two toy labels") {
    // Construct predictions whose label-0 and label-1 AUROCs are exactly 0.8
    // and 0.9 by separable score placement, remaining labels identical copies.
    const int n = 20;
    Eigen::MatrixXd probs(n, kNumTargets);
    std::vector<data::LabelVector> labels(n);
    // 10 negatives score 0.1..0.19; 10 positives placed to lose exactly k pairs.
    auto fill_label = [&](int j, int losses) {
        for (int i = 0; i < 10; ++i) {
            probs(i, j) = 0.10 + 0.01 * i;
            labels[i].bits[j] = 0;
        }
        for (int i = 0; i < 10; ++i) {
            labels[10 + i].bits[j] = 1;
            probs(10 + i, j) = 0.30 + 0.01 * i;
        }
        // Drop one positive just below the top `losses` negatives.
        probs(10, j) = 0.199 - 0.01 * losses;
    };
    fill_label(0, 10);  // 10 of 100 pairs lost
    fill_label(1, 5);
    for (int j = 2; j < kNumTargets; ++j) fill_label(j, 0);

    // Derive the expectation per label from the pair-counting oracle rather
    // than trusting the construction.
    std::array<double, kNumTargets> want{};
    for (int j = 0; j < kNumTargets; ++j) {
        std::vector<double> s(n);
        std::vector<uint8_t> y(n);
        for (int i = 0; i < n; ++i) {
            s[i] = probs(i, j);
            y[i] = labels[i].bits[j];
        }
        want[j] = auroc_pair_counting(s, y);
    }
    CHECK(want[0] < want[1]);  // label 0 was built to lose more pairs

    const auto report = macro_report(make_predictions(probs), labels, 0.5);
    double expected_macro = 0.0;
    for (int j = 0; j < kNumTargets; ++j) {
        CHECK(report.per_label[j].auroc == doctest::Approx(want[j]).epsilon(1e-12));
        expected_macro += want[j] / kNumTargets;
    }
    CHECK(report.macro_auroc == doctest::Approx(expected_macro).epsilon(1e-12));
}

TEST_CASE("threshold sweep is consistent with single-threshold metrics") {
    Rng rng(119);
    const int n = 200;
    Eigen::MatrixXd probs(n, kNumTargets);
    std::vector<data::LabelVector> labels(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kNumTargets; ++j) {
            labels[i].bits[j] = rng.bernoulli(0.4) ? 1 : 0;
            probs(i, j) = std::clamp(rng.uniform(0.1, 0.6) + 0.3 * labels[i].bits[j], 0.01, 0.99);
        }
    const auto pred = make_predictions(probs);

    const auto sweep = threshold_sweep(pred, labels, {0.5});
    for (int j = 0; j < kNumTargets; ++j) {
        std::vector<double> s(n);
        std::vector<uint8_t> y(n);
        for (int i = 0; i < n; ++i) {
            s[i] = probs(i, j);
            y[i] = labels[i].bits[j];
        }
        const auto tm = threshold_metrics(s, y, 0.5);
        REQUIRE(sweep.curves[j].size() == 1);
        CHECK(sweep.curves[j][0].f1 == tm.f1);
        CHECK(sweep.curves[j][0].acc == tm.acc);
        CHECK(sweep.best_tau[j] == 0.5);
    }

    // Separable toy: any threshold between the classes maximizes F1 at 1.
    Eigen::MatrixXd sep(n, kNumTargets);
    std::vector<data::LabelVector> seplab(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kNumTargets; ++j) {
            seplab[i].bits[j] = i < n / 2 ? 0 : 1;
            sep(i, j) = i < n / 2 ? 0.2 : 0.8;
        }
    const auto s2 = threshold_sweep(make_predictions(sep), seplab, {0.3, 0.5, 0.7});
    for (int j = 0; j < kNumTargets; ++j)
        for (const auto& pt : s2.curves[j]) CHECK(pt.f1 == 1.0);

    CHECK(thrown_category([&] { threshold_sweep(pred, labels, {}); }) == ErrCat::parameter);
    CHECK(thrown_category([&] { threshold_sweep(pred, labels, {0.0}); }) == ErrCat::parameter);
}

TEST_CASE("metrics report files carry the full table") {
    TempDir dir;
    Rng rng(121);
    const int n = 100;
    Eigen::MatrixXd probs(n, kNumTargets);
    std::vector<data::LabelVector> labels(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < kNumTargets; ++j) {
            labels[i].bits[j] = rng.bernoulli(0.3) ? 1 : 0;
            probs(i, j) = std::clamp(rng.uniform(0.1, 0.7) + 0.2 * labels[i].bits[j], 0.01, 0.99);
        }
    const auto report = macro_report(make_predictions(probs), labels, 0.5);
    const auto spec = data::TargetSpec::standard();

    write_metrics_report_csv(dir.file("report.csv"), report, spec);
    const auto t = read_csv(dir.file("report.csv"));
    CHECK(t.header == std::vector<std::string>{"endpoint", "prevalence", "auroc", "auprc", "acc", "f1"});
    REQUIRE(t.rows.size() == kNumTargets + 1);
    CHECK(t.rows.back()[0] == "macro");
    CHECK(parse_double(t.rows.back()[2]) == doctest::Approx(report.macro_auroc));
    CHECK(t.comments.at("tau") == "0.5");
    CHECK(t.rows[0][0] == "reduced_lvef");

    const auto lines = render_metrics_report(report, spec);
    CHECK(lines.size() >= kNumTargets + 3);
}

TEST_CASE("embedding projection separates distant clusters") {
    Rng rng(131);
    const int per = 40, d = 64;
    Eigen::MatrixXd emb(2 * per, d);
    for (int i = 0; i < per; ++i)
        for (int j = 0; j < d; ++j) {
            emb(i, j) = rng.normal() + (j == 0 ? 8.0 : 0.0);
            emb(per + i, j) = rng.normal() - (j == 0 ? 8.0 : 0.0);
        }
    const auto xy = project_embeddings(emb);
    REQUIRE(xy.rows() == 2 * per);
    REQUIRE(xy.cols() == 2);

    // Silhouette with known cluster assignment.
    auto dist = [&](int a, int b) { return (xy.row(a) - xy.row(b)).norm(); };
    double total = 0.0;
    for (int i = 0; i < 2 * per; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < 2 * per; ++j) {
            if (j == i) continue;
            const bool same = (i < per) == (j < per);
            (same ? a : b) += dist(i, j);
        }
        a /= per - 1;
        b /= per;
        total += (b - a) / std::max(a, b);
    }
    CHECK(total / (2 * per) > 0.5);

    // Determinism and coincidence of identical rows.
    const auto xy2 = project_embeddings(emb);
    CHECK((xy - xy2).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd dup(12, 4);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 4; ++j) dup(i, j) = (i % 2) ? 1.0 : -1.0;
    const auto xyd = project_embeddings(dup);
    CHECK((xyd.row(0) - xyd.row(2)).norm() < 1e-9);

    Eigen::MatrixXd tiny(5, 4);
    tiny.setRandom();
    CHECK(thrown_category([&] { project_embeddings(tiny); }) == ErrCat::parameter);
}
