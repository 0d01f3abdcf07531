#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "shdbench/data/synthetic.hpp"
#include "shdbench/eval/metrics.hpp"
#include "shdbench/io_util.hpp"
#include "shdbench/models/checkpoint.hpp"
#include "shdbench/models/resnet.hpp"
#include "shdbench/models/transformer.hpp"
#include "shdbench/training/experiment.hpp"
#include "shdbench/training/ssl.hpp"
#include "shdbench/training/supervised.hpp"
#include "test_util.hpp"

using namespace shdbench;
using namespace shdbench::training;
using shdbench::test::TempDir;
using shdbench::test::thrown_category;

namespace {

models::BackboneConfig tiny_transformer(int d = 16) {
    models::BackboneConfig c;
    c.family = models::BackboneConfig::Family::conv_transformer;
    c.conv = {{d / 2, 5, 5}, {d, 5, 5}, {d, 3, 2}};
    c.layers = 2;
    c.d_model = d;
    c.heads = 2;
    c.ff = 2 * d;
    c.head_hidden = 8;
    c.dropout = 0.0;
    return c;
}

DataBundle synth_bundle(size_t n, uint64_t seed, double signal = 1.0) {
    data::SyntheticConfig cfg;
    cfg.n = n;
    cfg.seed = seed;
    cfg.signal_strength = signal;
    auto [manifest, waves] = data::generate_synthetic_cohort_mem(cfg);
    return build_bundle(manifest, waves);
}

double frac_masked(const std::vector<uint8_t>& m) {
    double s = 0.0;
    for (uint8_t v : m) s += v;
    return s / double(m.size());
}

}  // namespace

TEST_CASE("adaptation config rejects out-of-range fields") {
    SslConfig c;
    CHECK_FALSE(thrown_category([&] { c.validate(); }));
    auto bad = [&](auto mut) {
        SslConfig b;
        mut(b);
        return thrown_category([&] { b.validate(); });
    };
    CHECK(bad([](SslConfig& b) { b.p_m = 0.0; }) == ErrCat::config);
    CHECK(bad([](SslConfig& b) { b.p_m = 1.0; }) == ErrCat::config);
    CHECK(bad([](SslConfig& b) { b.span = 0; }) == ErrCat::config);
    CHECK(bad([](SslConfig& b) { b.negatives = 0; }) == ErrCat::config);
    CHECK(bad([](SslConfig& b) { b.tau = 0.0; }) == ErrCat::config);
    CHECK(bad([](SslConfig& b) { b.steps = -1; }) == ErrCat::config);
    CHECK(bad([](SslConfig& b) { b.lr = 0.0; }) == ErrCat::config);
    CHECK(bad([](SslConfig& b) { b.batch = 0; }) == ErrCat::config);
}

TEST_CASE("span mask coverage matches the closed form") {
    const int t_len = 157;
    const double p = 0.065;
    const int span = 10;
    Rng rng(404);
    double mean = 0.0;
    const int draws = 1000;
    for (int i = 0; i < draws; ++i) mean += frac_masked(sample_span_mask(t_len, p, span, rng));
    mean /= draws;
    const double expect = 1.0 - std::pow(1.0 - p, span);
    CHECK(std::abs(mean - expect) / expect < 0.10);

    // near-certain starts cover everything
    Rng rng2(405);
    CHECK(frac_masked(sample_span_mask(t_len, 0.99, span, rng2)) >= 0.99);
}

TEST_CASE("zero adaptation steps leave the model bit-identical") {
    models::ConvTransformer m(tiny_transformer(), models::FusionConfig{}, kNumTargets, 77);
    const uint64_t before = models::param_state_hash(m.store());
    SslConfig cfg;
    cfg.steps = 0;
    SslResult res = ssl_pretrain(m.trunk(), m.store(), {}, cfg);
    CHECK(res.loss.empty());
    CHECK(models::param_state_hash(m.store()) == before);
}

TEST_CASE("contrastive objective gradients match finite differences") {
    models::ConvTransformer m(tiny_transformer(), models::FusionConfig{}, kNumTargets, 42);
    models::TransformerTrunk& trunk = m.trunk();
    models::ParamStore& store = m.store();

    Rng wrng(11);
    std::vector<Eigen::MatrixXd> waves(2);
    for (auto& w : waves) {
        w.resize(kLeads, kSamples);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = wrng.normal();
    }
    // one throwaway forward fixes the token length
    trunk.forward(waves, nullptr);
    const int t_len = trunk.token_len();
    std::vector<uint8_t> mask(size_t(2 * t_len), 0);
    mask[3] = mask[17] = mask[29] = 1;
    mask[size_t(t_len) + 8] = mask[size_t(t_len) + 40] = 1;

    SslConfig cfg;
    cfg.negatives = 16;
    cfg.tau = 0.3;

    Eigen::MatrixXd dtok, dlat;
    auto loss_at = [&]() {
        Eigen::MatrixXd tokens = trunk.forward(waves, &mask);
        Rng r(7);  // identical candidate draws on every evaluation
        return ssl_contrastive(tokens, trunk.conv_latents(), mask, 2, t_len, cfg, r, dtok, dlat);
    };

    store.zero_grads();
    loss_at();
    trunk.backward(dtok, &dlat);

    struct Probe {
        const char* name;
        int r, c;
    };
    const Probe probes[] = {
        {"conv.c0.W", 1, 3},       {"conv.c2.W", 0, 5},        {"conv.mask_token", 0, 4},
        {"conv.pos", 9, 2},        {"conv.n1.gamma", 3, 0},    {"block0.attn.q.W", 2, 7},
        {"block0.ln1.gamma", 1, 0}, {"block1.mlp.fc1.W", 5, 9}, {"block1.attn.o.b", 2, 0},
    };
    const double eps = 1e-5;
    for (const auto& pr : probes) {
        models::Param* p = store.find(pr.name);
        REQUIRE(p != nullptr);
        const double analytic = p->g(pr.r, pr.c);
        const double keep = p->v(pr.r, pr.c);
        p->v(pr.r, pr.c) = keep + eps;
        const double up = loss_at();
        p->v(pr.r, pr.c) = keep - eps;
        const double dn = loss_at();
        p->v(pr.r, pr.c) = keep;
        const double fd = (up - dn) / (2.0 * eps);
        const double rel = std::abs(analytic - fd) / std::max({std::abs(fd), std::abs(analytic), 1e-8});
        INFO(std::string(pr.name) << " analytic " << analytic << " fd " << fd);
        CHECK(rel <= 1e-3);
    }
}

TEST_CASE("sparse masking below one expected span start raises the flag") {
    data::SyntheticConfig scfg;
    scfg.n = 60;
    scfg.seed = 21;
    auto [manifest, waves] = data::generate_synthetic_cohort_mem(scfg);
    DataBundle bundle = build_bundle(manifest, waves);

    models::ConvTransformer m(tiny_transformer(), models::FusionConfig{}, kNumTargets, 5);
    SslConfig cfg;
    cfg.steps = 1;
    cfg.batch = 2;
    cfg.negatives = 8;
    cfg.seed = 9;
    cfg.p_m = 0.01;  // 0.01 * 50 tokens = 0.5 expected starts
    SslResult low = ssl_pretrain(m.trunk(), m.store(), bundle.train.waves, cfg);
    CHECK(low.low_mask_warning);

    cfg.p_m = 0.065;  // 3.25 expected starts
    SslResult ok = ssl_pretrain(m.trunk(), m.store(), bundle.train.waves, cfg);
    CHECK_FALSE(ok.low_mask_warning);
}

TEST_CASE("contrastive adaptation loss trends downward" * doctest::timeout(600)) {
    data::SyntheticConfig scfg;
    scfg.n = 560;
    scfg.seed = 31;
    auto [manifest, waves] = data::generate_synthetic_cohort_mem(scfg);
    std::vector<data::WaveformF> train(waves.begin(), waves.begin() + 512);
    std::vector<const data::WaveformF*> ptrs;
    for (const auto& w : train) ptrs.push_back(&w);
    data::PreprocessStats stats = data::fit_preprocess_stats(ptrs);
    for (auto& w : train) w = data::preprocess_waveform(w, stats);

    models::ConvTransformer m(models::BackboneConfig::transformer_mini(), models::FusionConfig{},
                              kNumTargets, 13);
    SslConfig cfg;
    cfg.steps = 500;
    cfg.batch = 8;
    cfg.lr = 3e-4;
    cfg.seed = 101;
    SslResult res = ssl_pretrain(m.trunk(), m.store(), train, cfg);
    REQUIRE(res.loss.size() == 500);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 50; ++i) {
        CHECK(std::isfinite(res.loss[size_t(i)]));
        head += res.loss[size_t(i)];
        tail += res.loss[size_t(450 + i)];
    }
    for (double v : res.loss) CHECK(std::isfinite(v));
    CHECK(tail / 50.0 < head / 50.0);
}

TEST_CASE("training config rejects out-of-range fields") {
    TrainConfig c;
    CHECK_FALSE(thrown_category([&] { c.validate(); }));
    auto bad = [&](auto mut) {
        TrainConfig b;
        mut(b);
        return thrown_category([&] { b.validate(); });
    };
    CHECK(bad([](TrainConfig& b) { b.lr_backbone = 0.0; }) == ErrCat::config);
    CHECK(bad([](TrainConfig& b) { b.lr_head = -1.0; }) == ErrCat::config);
    CHECK(bad([](TrainConfig& b) { b.batch = 0; }) == ErrCat::config);
    CHECK(bad([](TrainConfig& b) { b.max_epochs = 0; }) == ErrCat::config);
    CHECK(bad([](TrainConfig& b) { b.patience = 0; }) == ErrCat::config);
}

TEST_CASE("zero logits cost ln 2 and pull toward the labels") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4, 3);
    Eigen::MatrixXd y(4, 3);
    Rng rng(3);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) y(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    CHECK(bce_mean(z, y) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    Eigen::MatrixXd g = bce_grad(z, y);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
            CHECK(g(i, j) == doctest::Approx((0.5 - y(i, j)) / 12.0).epsilon(1e-15));
}

TEST_CASE("a fully frozen model is refused") {
    DataBundle bundle = synth_bundle(60, 91);
    models::ConvTransformer m(tiny_transformer(), models::FusionConfig{}, kNumTargets, 4);
    for (const auto& p : m.store().all()) p->trainable = false;
    TrainConfig cfg;
    cfg.max_epochs = 1;
    auto cat = thrown_category([&] { train_supervised(m, bundle, cfg); });
    CHECK(cat == ErrCat::config);
}

TEST_CASE("a non-finite loss restores the best parameters and reports divergence") {
    DataBundle bundle = synth_bundle(60, 17);
    models::ConvTransformer m(tiny_transformer(), models::FusionConfig{}, kNumTargets, 23);
    const uint64_t before = models::param_state_hash(m.store());
    TrainConfig cfg;
    cfg.lr_head = 1e200;
    cfg.batch = 8;
    cfg.max_epochs = 3;
    cfg.seed = 2;
    bool threw = false;
    try {
        train_supervised(m, bundle, cfg);
    } catch (const Error& e) {
        threw = true;
        CHECK(e.category() == ErrCat::divergence);
        CHECK(std::string(e.what()).find("restored") != std::string::npos);
    }
    CHECK(threw);
    CHECK(models::param_state_hash(m.store()) == before);
    for (const auto& p : m.store().all()) CHECK(p->v.allFinite());
}

TEST_CASE("a separable cohort is learned quickly" * doctest::timeout(600)) {
    data::SyntheticConfig scfg;
    scfg.n = 420;
    scfg.seed = 7;
    scfg.signal_strength = 4.0;
    scfg.prevalence = {0.3, 0.3, 0.25, 0.25, 0.25, 0.25};
    auto [manifest, waves] = data::generate_synthetic_cohort_mem(scfg);
    DataBundle bundle = build_bundle(manifest, waves);

    models::ResNet1D m(models::BackboneConfig::resnet_mini(), kNumTargets, 19);
    TrainConfig cfg;
    cfg.lr_backbone = 1e-3;
    cfg.lr_head = 1e-3;
    cfg.batch = 16;
    cfg.max_epochs = 15;
    cfg.patience = 6;
    cfg.seed = 5;
    TrainResult res = train_supervised(m, bundle, cfg);
    CHECK(res.best_val_auroc >= 0.95);
}

TEST_CASE("label-free waveforms score near chance" * doctest::timeout(600)) {
    ExperimentSpec spec = ExperimentSpec::parse(
        "variant probe\n"
        "seeds 1\n"
        "dataset {\n"
        "  synth { n 2000 seed 12 signal 0.0 }\n"
        "}\n"
        "train { max_epochs 12 }\n");
    ExperimentResult res = run_experiment(spec);
    REQUIRE(res.rows.size() == 2);
    const double auroc = res.rows[0].auroc;
    INFO("test macro auroc " << auroc);
    CHECK(auroc >= 0.42);
    CHECK(auroc <= 0.58);
}

TEST_CASE("early stopping keeps the best validation epoch, deterministically") {
    DataBundle bundle = synth_bundle(240, 57, 2.0);
    TrainConfig cfg;
    cfg.batch = 16;
    cfg.max_epochs = 6;
    cfg.patience = 2;
    cfg.seed = 44;

    auto run = [&]() {
        models::ConvTransformer m(tiny_transformer(), models::FusionConfig{}, kNumTargets, 99);
        TrainResult r = train_supervised(m, bundle, cfg);
        return std::make_pair(models::param_state_hash(m.store()), r);
    };
    auto [h1, r1] = run();
    auto [h2, r2] = run();
    CHECK(h1 == h2);
    REQUIRE(r1.log.size() == r2.log.size());
    double best_seen = 0.0;
    for (size_t i = 0; i < r1.log.size(); ++i) {
        CHECK(r1.log[i].train_loss == r2.log[i].train_loss);
        CHECK(r1.log[i].val_auroc == r2.log[i].val_auroc);
        best_seen = std::max(best_seen, r1.log[i].val_auroc);
    }
    CHECK(r1.best_val_auroc == best_seen);
    CHECK(r1.log[size_t(r1.best_epoch)].val_auroc == best_seen);
}

TEST_CASE("the single-endpoint suite is six independent models") {
    DataBundle bundle = synth_bundle(120, 71, 2.0);
    models::BackboneConfig bc = tiny_transformer();
    ModelFactory factory = [&](int out_dim, uint64_t init_seed) {
        return std::unique_ptr<models::NeuralModel>(
            new models::ConvTransformer(bc, models::FusionConfig{}, out_dim, init_seed));
    };
    models::AdaptationPolicy pol{false, 1, std::nullopt};
    TrainConfig cfg;
    cfg.batch = 16;
    cfg.max_epochs = 2;
    cfg.seed = 33;
    BinarySuiteResult suite = train_binary_suite(bundle, factory, pol, cfg);
    REQUIRE(suite.models.size() == size_t(kNumTargets));
    CHECK(suite.total_trainable == int64_t(kNumTargets) * suite.single_trainable);
    Eigen::MatrixXd probs = predict_binary_suite(suite.models, bundle.test, 64);
    CHECK(probs.rows() == bundle.test.n());
    CHECK(probs.cols() == kNumTargets);

    // retraining endpoint 2 alone reproduces its column bit for bit
    auto [solo, res] = train_suite_endpoint(bundle, factory, pol, cfg, 2);
    Eigen::MatrixXd col = predict_probabilities(*solo, bundle.test, 64);
    REQUIRE(col.cols() == 1);
    CHECK((col.col(0) - probs.col(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the nested key-value format parses and rejects precisely") {
    KvNode doc = parse_kv(
        "# leading comment\n"
        "alpha 1 2 3   # inline comment\n"
        "outer {\n"
        "  inner {\n"
        "    x 4\n"
        "  }\n"
        "  y two words\n"
        "}\n");
    CHECK(doc.values.at("alpha") == "1 2 3");
    CHECK(doc.children.at("outer").children.at("inner").values.at("x") == "4");
    CHECK(doc.children.at("outer").values.at("y") == "two words");

    CHECK(thrown_category([] { parse_kv("x 1\nx 2\n"); }) == ErrCat::config);
    CHECK(thrown_category([] { parse_kv("a {\n b 1\n"); }) == ErrCat::format);
    CHECK(thrown_category([] { parse_kv("}\n"); }) == ErrCat::format);
    CHECK(thrown_category([] { parse_kv("lonely\n"); }) == ErrCat::format);
}

TEST_CASE("experiment specs reject unknown names and misplaced blocks") {
    const std::string base =
        "seeds 1\n"
        "dataset {\n"
        "  synth { n 60 seed 3 }\n"
        "}\n";

    try {
        ExperimentSpec::parse("variant nosuch\n" + base);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::config);
        const std::string msg = e.what();
        CHECK(msg.find("baselineA") != std::string::npos);
        CHECK(msg.find("downsample") != std::string::npos);
    }

    try {
        ExperimentSpec::parse("variant probe\nfrobnicate 1\n" + base);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::config);
        CHECK(std::string(e.what()).find("frobnicate") != std::string::npos);
    }

    // adapter block under the wrong variant
    CHECK(thrown_category([&] {
              ExperimentSpec::parse("variant probe\nlora { rank 4 }\n" + base);
          }) == ErrCat::config);
    // fusion variant without its block
    CHECK(thrown_category([&] { ExperimentSpec::parse("variant fusion\n" + base); }) ==
          ErrCat::config);
    // both dataset sources at once
    CHECK(thrown_category([] {
              ExperimentSpec::parse(
                  "variant probe\nseeds 1\ndataset {\n path /x\n synth { n 60 seed 3 }\n}\n");
          }) == ErrCat::config);
    // depth beyond the preset
    CHECK(thrown_category([&] {
              ExperimentSpec::parse("variant partial_ft\npartial_ft { b 9 }\n" + base);
          }) == ErrCat::parameter);
    // residual presets cannot take adaptation stages
    CHECK(thrown_category([&] {
              ExperimentSpec::parse("variant probe\nmodel { preset resnet_mini }\n" + base);
          }) == ErrCat::config);
    CHECK(thrown_category([&] {
              ExperimentSpec::parse("variant baselineB\nssl { steps 5 }\n" + base);
          }) == ErrCat::config);
}

TEST_CASE("frozen-backbone probing reports the head-only budget") {
    TempDir tmp;
    ExperimentSpec spec = ExperimentSpec::parse(
        "variant probe\n"
        "seeds 7\n"
        "dataset {\n"
        "  synth { n 120 seed 5 }\n"
        "}\n"
        "train { max_epochs 2 }\n");
    ExperimentResult res = run_experiment(spec, tmp.file("out"));
    REQUIRE(res.rows.size() == 2);
    const ResultRow& row = res.rows[0];
    CHECK(row.variant == "probe");
    CHECK(row.seed == "7");
    CHECK(row.b == 0);
    CHECK(row.conv_trainable == 0);
    CHECK(row.lora_rank == 0);
    CHECK(row.fusion == "none");
    CHECK(row.rho == 1.0);
    // mini head: 64*32+32 then 32*6+6
    CHECK(row.trainable_params == 2278);
    CHECK(row.config_hash == spec.config_hash());
    CHECK(res.rows[1].seed == "mean");
    CHECK(res.rows[1].trainable_params == row.trainable_params);

    const std::string csv = slurp_file(tmp.file("out/results.csv"));
    CHECK(split(csv, '\n')[0] == kResultsHeader);
    CHECK(std::filesystem::exists(tmp.file("out/run.log")));
    CHECK(std::filesystem::exists(tmp.file("out/ckpt_seed7.bin")));
}

TEST_CASE("deeper unfreezing strictly grows the trainable budget") {
    const std::string base =
        "seeds 1\n"
        "dataset {\n"
        "  synth { n 60 seed 3 }\n"
        "}\n";
    int64_t prev = -1;
    for (int b = 0; b <= 4; ++b) {
        ExperimentSpec spec = ExperimentSpec::parse(
            "variant partial_ft\npartial_ft { b " + std::to_string(b) + " }\n" + base);
        models::ConvTransformer m(spec.backbone(), spec.fusion, kNumTargets, 1);
        auto budget = configure_model(m, spec.policy(), 0);
        CHECK(budget.total_trainable > prev);
        prev = budget.total_trainable;
    }
    ExperimentSpec full = ExperimentSpec::parse("variant full_model_ft\n" + base);
    models::ConvTransformer m(full.backbone(), full.fusion, kNumTargets, 1);
    auto budget = configure_model(m, full.policy(), 0);
    CHECK(budget.total_trainable > prev);  // the conv front-end joins last

    ExperimentSpec lora = ExperimentSpec::parse("variant lora\nlora { rank 4 }\n" + base);
    CHECK(lora.policy().lora.has_value());
    CHECK(lora.policy().b == 0);
    ExperimentSpec ft = ExperimentSpec::parse("variant full_transformer_ft\n" + base);
    CHECK(ft.policy().b == 4);
    CHECK_FALSE(ft.policy().conv_trainable);
}

TEST_CASE("downsampling an experiment removes the agreed share of negatives" *
          doctest::timeout(600)) {
    data::SyntheticConfig scfg;
    scfg.n = 400;
    scfg.seed = 29;
    auto manifest = data::generate_synthetic_manifest(scfg);
    size_t all_negative = 0;
    for (const auto& row : manifest.rows) {
        if (row.split != data::Split::train) continue;
        bool any = false;
        for (int j = 0; j < kNumTargets; ++j) any = any || row.labels.bits[size_t(j)] != 0;
        if (!any) ++all_negative;
    }

    ExperimentSpec spec = ExperimentSpec::parse(
        "variant downsample\n"
        "downsample { rho 0.5 }\n"
        "seeds 11\n"
        "dataset {\n"
        "  synth { n 400 seed 29 }\n"
        "}\n"
        "train { max_epochs 1 }\n");
    ExperimentResult res = run_experiment(spec);
    CHECK(res.downsample_before == all_negative);
    CHECK(res.downsample_removed == size_t(std::llround(0.5 * double(all_negative))));
    CHECK(res.rows[0].rho == 0.5);
    CHECK(res.rows[0].conv_trainable == 1);
}

TEST_CASE("an experiment row equals the hand-assembled pipeline bit for bit" *
          doctest::timeout(600)) {
    const std::string text =
        "variant partial_ft\n"
        "partial_ft { b 1 }\n"
        "seeds 3\n"
        "dataset {\n"
        "  synth { n 120 seed 5 }\n"
        "}\n"
        "train { max_epochs 2 batch 16 }\n";
    ExperimentSpec spec = ExperimentSpec::parse(text);
    ExperimentResult res = run_experiment(spec);

    data::SyntheticConfig scfg;
    scfg.n = 120;
    scfg.seed = 5;
    auto [manifest, waves] = data::generate_synthetic_cohort_mem(scfg);
    DataBundle bundle = build_bundle(manifest, waves);
    SeedTriple tr = derive_seeds(3);
    models::ConvTransformer model(models::BackboneConfig::transformer_mini(),
                                  models::FusionConfig{}, kNumTargets, tr.init);
    configure_model(model, models::AdaptationPolicy{false, 1, std::nullopt},
                    Rng::splitmix(tr.init ^ 0x10AAULL));
    TrainConfig cfg;
    cfg.batch = 16;
    cfg.max_epochs = 2;
    cfg.seed = tr.order;
    train_supervised(model, bundle, cfg);
    Eigen::MatrixXd probs = predict_probabilities(model, bundle.test, 64);
    eval::PredictionSet pred;
    pred.probabilities = probs;
    pred.record_ids = bundle.test.record_ids;
    pred.model_id = "manual";
    eval::MetricsReport report = eval::macro_report(pred, bundle.test.labels, 0.5);

    CHECK(res.rows[0].auroc == report.macro_auroc);
    CHECK(res.rows[0].auprc == report.macro_auprc);
    CHECK(res.rows[0].acc == report.macro_acc);
    CHECK(res.rows[0].f1 == report.macro_f1);
}

TEST_CASE("the adaptation stage never reads labels") {
    data::SyntheticConfig scfg;
    scfg.n = 60;
    scfg.seed = 47;
    auto [manifest, waves] = data::generate_synthetic_cohort_mem(scfg);
    auto permuted = manifest;
    // rotate every label vector one train row forward; waveforms untouched
    std::vector<size_t> train_rows;
    for (size_t i = 0; i < permuted.rows.size(); ++i)
        if (permuted.rows[i].split == data::Split::train) train_rows.push_back(i);
    for (size_t k = 0; k + 1 < train_rows.size(); ++k)
        std::swap(permuted.rows[train_rows[k]].labels, permuted.rows[train_rows[k + 1]].labels);

    DataBundle a = build_bundle(manifest, waves);
    DataBundle b = build_bundle(permuted, waves);

    SslConfig cfg;
    cfg.steps = 30;
    cfg.batch = 4;
    cfg.negatives = 20;
    cfg.seed = 77;
    auto run = [&](const DataBundle& bundle) {
        models::ConvTransformer m(tiny_transformer(), models::FusionConfig{}, kNumTargets, 15);
        ssl_pretrain(m.trunk(), m.store(), bundle.train.waves, cfg);
        return models::param_state_hash(m.store());
    };
    CHECK(run(a) == run(b));
}

TEST_CASE("result rows reproduce exactly, wall time aside") {
    const std::string text =
        "variant probe\n"
        "seeds 5\n"
        "dataset {\n"
        "  synth { n 96 seed 9 }\n"
        "}\n"
        "train { max_epochs 2 }\n";
    ExperimentSpec spec = ExperimentSpec::parse(text);
    ExperimentResult r1 = run_experiment(spec);
    ExperimentResult r2 = run_experiment(ExperimentSpec::parse(text));
    REQUIRE(r1.rows.size() == r2.rows.size());
    for (size_t i = 0; i < r1.rows.size(); ++i) {
        CHECK(r1.rows[i].seed == r2.rows[i].seed);
        CHECK(r1.rows[i].trainable_params == r2.rows[i].trainable_params);
        CHECK(r1.rows[i].auroc == r2.rows[i].auroc);
        CHECK(r1.rows[i].auprc == r2.rows[i].auprc);
        CHECK(r1.rows[i].acc == r2.rows[i].acc);
        CHECK(r1.rows[i].f1 == r2.rows[i].f1);
        CHECK(r1.rows[i].config_hash == r2.rows[i].config_hash);
    }

    // appending twice writes one header and accumulates rows
    TempDir tmp;
    const std::string path = tmp.file("results.csv");
    append_results_csv(path, r1.rows);
    append_results_csv(path, r2.rows);
    auto lines = split(trim(slurp_file(path)), '\n');
    REQUIRE(lines.size() == 1 + 2 * r1.rows.size());
    CHECK(lines[0] == kResultsHeader);
    CHECK(lines[1] != kResultsHeader);
}

TEST_CASE("a missing warm-start checkpoint is a hard error naming the path") {
    ExperimentSpec spec = ExperimentSpec::parse(
        "variant probe\n"
        "seeds 1\n"
        "dataset {\n"
        "  synth { n 60 seed 3 }\n"
        "}\n"
        "pretrained {\n"
        "  checkpoint /nonexistent/warm.bin\n"
        "  mapping /nonexistent/map.txt\n"
        "}\n"
        "train { max_epochs 1 }\n");
    try {
        run_experiment(spec);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.category() == ErrCat::io);
        CHECK(std::string(e.what()).find("/nonexistent/warm.bin") != std::string::npos);
    }
}
