#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <map>
#include <set>

#include "shdbench/io_util.hpp"
#include "shdbench/models/checkpoint.hpp"
#include "shdbench/models/common.hpp"
#include "shdbench/models/mofm.hpp"
#include "shdbench/models/resnet.hpp"
#include "shdbench/models/transformer.hpp"
#include "shdbench/rng.hpp"
#include "test_util.hpp"

using namespace shdbench;
using namespace shdbench::models;
using shdbench::test::TempDir;
using shdbench::test::thrown_category;

namespace {

Batch make_batch(int n, uint64_t seed, int out_dim) {
    Rng rng(seed);
    Batch b;
    b.wave.resize(size_t(n));
    for (auto& w : b.wave) {
        w.resize(kLeads, kSamples);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.normal();
    }
    b.cov.resize(n, 7);
    for (Eigen::Index j = 0; j < 7; ++j)
        for (Eigen::Index i = 0; i < n; ++i) b.cov(i, j) = rng.normal();
    b.y.resize(n, out_dim);
    for (Eigen::Index j = 0; j < out_dim; ++j)
        for (Eigen::Index i = 0; i < n; ++i) b.y(i, j) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    return b;
}

/// Mean binary cross-entropy over all logits, with gradient.
double bce_loss(const Eigen::MatrixXd& z, const Eigen::MatrixXd& y, Eigen::MatrixXd* dz) {
    double n = double(z.size());
    double loss = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j)
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            double v = z(i, j);
            loss += std::max(v, 0.0) - v * y(i, j) + std::log1p(std::exp(-std::abs(v)));
        }
    if (dz != nullptr) *dz = (sigmoid(z).array() - y.array()) / n;
    return loss / n;
}

void sgd_step(ParamStore& s, double lr) {
    for (const auto& p : s.all())
        if (p->trainable) p->v -= lr * p->g;
}

std::string group_key(const std::string& name) {
    GroupRef ref = classify_param(name);
    switch (ref.group) {
        case ParamGroup::conv: return "conv";
        case ParamGroup::block: return "block" + std::to_string(ref.block_index);
        case ParamGroup::lora: return "lora";
        case ParamGroup::tab: return "tab";
        case ParamGroup::head: return "head";
    }
    return "?";
}

std::map<std::string, uint64_t> group_hashes(const ParamStore& s) {
    std::map<std::string, std::string> bufs;
    for (const auto& p : s.all())
        bufs[group_key(p->name)].append(reinterpret_cast<const char*>(p->v.data()),
                                        size_t(p->v.size()) * 8);
    std::map<std::string, uint64_t> out;
    for (const auto& [k, buf] : bufs) out[k] = fnv1a64(buf);
    return out;
}

BackboneConfig tiny_transformer(int d = 16) {
    BackboneConfig c;
    c.family = BackboneConfig::Family::conv_transformer;
    c.conv = {{d / 2, 5, 5}, {d, 5, 5}, {d, 3, 2}};
    c.layers = 2;
    c.d_model = d;
    c.heads = 2;
    c.ff = 2 * d;
    c.head_hidden = 8;
    c.dropout = 0.0;
    return c;
}

BackboneConfig tiny_resnet() {
    BackboneConfig c;
    c.family = BackboneConfig::Family::resnet1d;
    c.stage_widths = {4, 4, 8, 8};
    c.embed_dim = 8;
    c.head_hidden = 4;
    c.dropout = 0.0;
    return c;
}

/// Central-difference check on n randomly chosen trainable scalars.
void gradcheck(NeuralModel& model, const Batch& batch, int n_scalars, uint64_t seed) {
    model.store().zero_grads();
    Eigen::MatrixXd z = model.forward(batch, false);
    Eigen::MatrixXd dz;
    bce_loss(z, batch.y, &dz);
    model.backward(dz);

    std::vector<std::pair<Param*, Eigen::Index>> slots;
    for (const auto& p : model.store().all())
        if (p->trainable)
            for (Eigen::Index i = 0; i < p->v.size(); ++i) slots.push_back({p.get(), i});
    REQUIRE(!slots.empty());
    Rng rng(seed);
    const double eps = 1e-5;
    for (int k = 0; k < n_scalars; ++k) {
        auto [p, i] = slots[size_t(rng.uniform_int(0, int(slots.size()) - 1))];
        double analytic = p->g.data()[i];
        double keep = p->v.data()[i];
        p->v.data()[i] = keep + eps;
        double lp = bce_loss(model.forward(batch, false), batch.y, nullptr);
        p->v.data()[i] = keep - eps;
        double lm = bce_loss(model.forward(batch, false), batch.y, nullptr);
        p->v.data()[i] = keep;
        double fd = (lp - lm) / (2 * eps);
        double rel = std::abs(fd - analytic) / std::max({1e-6, std::abs(fd), std::abs(analytic)});
        INFO(p->name << "[" << i << "] analytic=" << analytic << " fd=" << fd);
        CHECK(rel <= 1e-3);
    }
}

}  // namespace

TEST_CASE("config validation and token counts") {
    BackboneConfig full = BackboneConfig::transformer_full();
    CHECK(full.layers == 12);
    CHECK(full.d_model == 768);
    CHECK(full.heads == 12);
    CHECK(full.token_count() == 157);

    BackboneConfig mini = BackboneConfig::transformer_mini();
    CHECK(mini.layers == 4);
    CHECK(mini.d_model == 64);
    CHECK(mini.heads == 4);
    CHECK(mini.token_count() == 40);

    BackboneConfig bad = mini;
    bad.d_model = 66;  // not divisible by 4 heads; conv width also mismatches
    CHECK(thrown_category([&] { bad.validate(); }) == ErrCat::config);

    BackboneConfig zero = mini;
    zero.layers = 0;
    CHECK(thrown_category([&] { zero.validate(); }) == ErrCat::config);

    BackboneConfig res = BackboneConfig::resnet_full();
    CHECK(res.stage_widths == std::array<int, 4>{64, 128, 256, 512});
    CHECK(res.embed_dim == 768);

    FusionConfig fg;
    fg.mode = FusionConfig::Mode::gated;
    fg.d_e = 32;
    CHECK(thrown_category([&] { fg.validate(64); }) == ErrCat::config);
    fg.d_e = 64;
    CHECK(!thrown_category([&] { fg.validate(64); }));
}

TEST_CASE("sigmoid worked value") {
    Eigen::MatrixXd z(1, 1);
    z(0, 0) = 1.0;
    CHECK(sigmoid(z)(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
    z(0, 0) = 0.0;
    CHECK(sigmoid(z)(0, 0) == 0.5);
}

TEST_CASE("transformer forward shape and determinism") {
    BackboneConfig cfg = BackboneConfig::transformer_mini();
    Batch batch = make_batch(2, 11, kNumTargets);
    ConvTransformer m1(cfg, FusionConfig{}, kNumTargets, 77);
    ConvTransformer m2(cfg, FusionConfig{}, kNumTargets, 77);
    Eigen::MatrixXd z1 = m1.forward(batch, false);
    CHECK(z1.rows() == 2);
    CHECK(z1.cols() == kNumTargets);
    CHECK(z1.allFinite());
    // same seed, same input: bit-identical construction and output
    CHECK(group_hashes(m1.store()) == group_hashes(m2.store()));
    Eigen::MatrixXd z2 = m2.forward(batch, false);
    CHECK((z1 - z2).cwiseAbs().maxCoeff() == 0.0);
    // repeated eval-mode forward is stable
    Eigen::MatrixXd z3 = m1.forward(batch, false);
    CHECK((z1 - z3).cwiseAbs().maxCoeff() == 0.0);

    // probe fast path reproduces the full forward exactly
    Eigen::MatrixXd h = m1.pooled_embedding(batch);
    CHECK(h.rows() == 2);
    CHECK(h.cols() == cfg.d_model);
    Eigen::MatrixXd z4 = m1.forward_from_embedding(h, batch.cov, false);
    CHECK((z1 - z4).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("resnet forward shape and config echo") {
    Batch batch = make_batch(2, 13, kNumTargets);
    ResNet1D m(BackboneConfig::resnet_mini(), kNumTargets, 5);
    Eigen::MatrixXd z = m.forward(batch, false);
    CHECK(z.rows() == 2);
    CHECK(z.cols() == kNumTargets);
    CHECK(z.allFinite());
    CHECK(m.n_blocks() == 0);

    // full-scale preset: embedding projects the last stage width to 768
    ResNet1D full(BackboneConfig::resnet_full(), kNumTargets, 5);
    Param* emb = full.store().find("conv.embed.W");
    REQUIRE(emb != nullptr);
    CHECK(emb->v.rows() == 768);
    CHECK(emb->v.cols() == 512);
    ParamBudget budget = count_trainable(full.store(), 0);
    CHECK(budget.total == budget.conv + budget.head);
    CHECK(budget.total_trainable == budget.total);
}

TEST_CASE("freezing policy partitions the update") {
    BackboneConfig cfg = BackboneConfig::transformer_mini();
    Batch batch = make_batch(4, 21, kNumTargets);
    const int L = cfg.layers;
    std::vector<int64_t> trainable_by_b;
    for (bool conv_on : {false, true}) {
        for (int b = 0; b <= L; ++b) {
            ConvTransformer m(cfg, FusionConfig{}, kNumTargets, 3);
            AdaptationPolicy pol;
            pol.conv_trainable = conv_on;
            pol.b = b;
            ParamBudget budget = apply_freezing_policy(m, pol);
            if (!conv_on) {
                if (b == 0) CHECK(budget.total_trainable == budget.head);  // linear probe
                trainable_by_b.push_back(budget.total_trainable);
            }
            auto before = group_hashes(m.store());
            for (int step = 0; step < 5; ++step) {
                m.store().zero_grads();
                Eigen::MatrixXd dz;
                bce_loss(m.forward(batch, true), batch.y, &dz);
                m.backward(dz);
                sgd_step(m.store(), 1e-2);
            }
            auto after = group_hashes(m.store());
            CHECK((before.at("conv") != after.at("conv")) == conv_on);
            for (int i = 0; i < L; ++i) {
                std::string key = "block" + std::to_string(i);
                bool should_train = i >= L - b;
                CHECK((before.at(key) != after.at(key)) == should_train);
            }
            CHECK(before.at("head") != after.at("head"));
        }
    }
    // trainable counts strictly increase with b
    for (size_t i = 1; i < trainable_by_b.size(); ++i)
        CHECK(trainable_by_b[i] > trainable_by_b[i - 1]);

    // full model minus full transformer equals the conv group exactly
    ConvTransformer probe(cfg, FusionConfig{}, kNumTargets, 3);
    AdaptationPolicy full_model{true, L, std::nullopt};
    AdaptationPolicy full_tf{false, L, std::nullopt};
    int64_t with_conv = apply_freezing_policy(probe, full_model).total_trainable;
    ParamBudget ft = apply_freezing_policy(probe, full_tf);
    CHECK(with_conv - ft.total_trainable == ft.conv);

    // b beyond depth is rejected
    AdaptationPolicy bad{false, L + 1, std::nullopt};
    CHECK(thrown_category([&] { apply_freezing_policy(probe, bad); }) == ErrCat::parameter);

    // per-block counts match the closed-form width arithmetic
    int d = cfg.d_model, ff = cfg.ff;
    int64_t per_block = 4 * d * d + 9 * d + 2 * d * ff + ff;
    for (int i = 0; i < L; ++i) CHECK(ft.block[size_t(i)] == per_block);

    // freezing everything by hand leaves nothing trainable
    for (const auto& p : probe.store().all()) p->trainable = false;
    CHECK(count_trainable(probe.store(), L).total_trainable == 0);
}

TEST_CASE("head-only budget matches the closed form") {
    BackboneConfig cfg = BackboneConfig::transformer_mini();
    ConvTransformer m(cfg, FusionConfig{}, kNumTargets, 9);
    AdaptationPolicy probe{false, 0, std::nullopt};
    ParamBudget budget = apply_freezing_policy(m, probe);
    int h1 = cfg.head_hidden;
    int64_t want = int64_t(cfg.d_model) * h1 + h1 + int64_t(h1) * kNumTargets + kNumTargets;
    CHECK(budget.total_trainable == want);
    CHECK(budget.total_trainable == 2278);
}

TEST_CASE("gradcheck: transformer with gated fusion") {
    BackboneConfig cfg = tiny_transformer();
    FusionConfig fus;
    fus.mode = FusionConfig::Mode::gated;
    fus.d_e = cfg.d_model;
    ConvTransformer m(cfg, fus, 3, 41);
    AdaptationPolicy pol{true, cfg.layers, std::nullopt};
    apply_freezing_policy(m, pol);
    Batch batch = make_batch(2, 42, 3);
    gradcheck(m, batch, 20, 43);
}

TEST_CASE("gradcheck: transformer with cross-attention fusion") {
    BackboneConfig cfg = tiny_transformer();
    FusionConfig fus;
    fus.mode = FusionConfig::Mode::cross_attention;
    fus.d_e = 6;
    fus.heads = 2;
    ConvTransformer m(cfg, fus, 3, 51);
    AdaptationPolicy pol{true, cfg.layers, std::nullopt};
    apply_freezing_policy(m, pol);
    Batch batch = make_batch(2, 52, 3);
    gradcheck(m, batch, 12, 53);
}

TEST_CASE("gradcheck: resnet") {
    ResNet1D m(tiny_resnet(), 3, 61);
    Batch batch = make_batch(2, 62, 3);
    gradcheck(m, batch, 12, 63);
}

TEST_CASE("gradcheck: lora adapters") {
    BackboneConfig cfg = tiny_transformer();
    ConvTransformer m(cfg, FusionConfig{}, 3, 71);
    LoraConfig lc;
    lc.rank = 2;
    m.apply_lora(lc, 72);
    AdaptationPolicy pol{false, 0, lc};
    apply_freezing_policy(m, pol);
    Batch batch = make_batch(2, 73, 3);
    gradcheck(m, batch, 12, 74);
}

TEST_CASE("gradcheck: mixture with logit gating") {
    std::vector<BackboneConfig> cfgs = {tiny_transformer(16), tiny_transformer(8)};
    MoFMConfig mc;
    mc.fusion = MoFMConfig::Fusion::logit_moe;
    mc.d_c = 8;
    MoFM m(cfgs, mc, 3, 81);
    for (int k = 0; k < 2; ++k)
        m.apply_expert_policy(k, AdaptationPolicy{true, cfgs[size_t(k)].layers, std::nullopt});
    Batch batch = make_batch(2, 82, 3);
    gradcheck(m, batch, 12, 83);
}

TEST_CASE("lora identity at install and closed-form count") {
    CHECK(lora_adapter_count(12, 768, 16) == 589824);

    BackboneConfig cfg = BackboneConfig::transformer_mini();
    Batch batch = make_batch(2, 91, kNumTargets);
    ConvTransformer m(cfg, FusionConfig{}, kNumTargets, 92);
    Eigen::MatrixXd before = m.forward(batch, false);
    LoraConfig lc;
    lc.rank = 4;
    m.apply_lora(lc, 93);
    Eigen::MatrixXd after = m.forward(batch, false);
    CHECK((before - after).cwiseAbs().maxCoeff() <= 1e-6);

    // second install is rejected
    CHECK(thrown_category([&] { m.apply_lora(lc, 94); }) == ErrCat::config);

    // budget: adapters plus head are the only trainable tensors
    AdaptationPolicy pol{false, 0, lc};
    ParamBudget budget = apply_freezing_policy(m, pol);
    CHECK(budget.lora == lora_adapter_count(cfg.layers, cfg.d_model, lc.rank));
    CHECK(budget.total_trainable == budget.lora + budget.head);

    // adapters must not ride on a thawed backbone
    AdaptationPolicy bad1{true, 0, lc};
    CHECK(thrown_category([&] { apply_freezing_policy(m, bad1); }) == ErrCat::parameter);
    AdaptationPolicy bad2{false, 1, lc};
    CHECK(thrown_category([&] { apply_freezing_policy(m, bad2); }) == ErrCat::parameter);

    // adapted training moves adapters and head only, never the frozen W
    apply_freezing_policy(m, pol);
    auto before_h = group_hashes(m.store());
    for (int step = 0; step < 3; ++step) {
        m.store().zero_grads();
        Eigen::MatrixXd dz;
        bce_loss(m.forward(batch, true), batch.y, &dz);
        m.backward(dz);
        sgd_step(m.store(), 1e-2);
    }
    auto after_h = group_hashes(m.store());
    CHECK(before_h.at("conv") == after_h.at("conv"));
    for (int i = 0; i < cfg.layers; ++i)
        CHECK(before_h.at("block" + std::to_string(i)) ==
              after_h.at("block" + std::to_string(i)));
    CHECK(before_h.at("lora") != after_h.at("lora"));
    CHECK(before_h.at("head") != after_h.at("head"));
}

TEST_CASE("tabular embedder contracts") {
    ParamStore s;
    Rng rng(7);
    TabEmbed te;
    te.init(s, 8, rng);
    s.find("tab.l2.W")->v.setZero();
    s.find("tab.l2.b")->v.setZero();
    Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(3, 7);
    Eigen::MatrixXd e = te.forward(zeros);
    CHECK(e.rows() == 3);
    CHECK(e.cols() == 8);
    CHECK(e.cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd bad = zeros;
    bad(1, 3) = std::numeric_limits<double>::quiet_NaN();
    CHECK(thrown_category([&] { te.forward(bad); }) == ErrCat::data);
    Eigen::MatrixXd wrong(3, 6);
    wrong.setZero();
    CHECK(thrown_category([&] { te.forward(wrong); }) == ErrCat::alignment);
}

TEST_CASE("gated fusion algebra") {
    // worked example in d = 2
    ParamStore s;
    Rng rng(5);
    GatedFuse gf;
    gf.init(s, 2, rng);
    Eigen::MatrixXd h(1, 2), e(1, 2);
    h << 1.0, 0.0;
    e << 0.0, 1.0;
    Eigen::RowVectorXd lam(2);
    lam << 0.25, 0.75;
    gf.force_lambda = lam;
    Eigen::MatrixXd out = gf.forward(h, e);
    CHECK(out(0, 0) == 0.25);
    CHECK(out(0, 1) == 0.25);

    // lambda = 1 ignores covariates; lambda = 0 ignores the waveform
    BackboneConfig cfg = BackboneConfig::transformer_mini();
    FusionConfig fus;
    fus.mode = FusionConfig::Mode::gated;
    fus.d_e = cfg.d_model;
    ConvTransformer m(cfg, fus, kNumTargets, 101);
    Batch b1 = make_batch(2, 102, kNumTargets);
    Batch b2 = make_batch(2, 103, kNumTargets);  // all-different waves and covs

    m.gated_fuse()->force_lambda = Eigen::RowVectorXd::Ones(cfg.d_model);
    Eigen::MatrixXd z_cov1 = m.forward(b1, false);
    Batch mixed = b1;
    mixed.cov = b2.cov;
    Eigen::MatrixXd z_cov2 = m.forward(mixed, false);
    CHECK((z_cov1 - z_cov2).cwiseAbs().maxCoeff() == 0.0);

    m.gated_fuse()->force_lambda = Eigen::RowVectorXd::Zero(cfg.d_model);
    Eigen::MatrixXd z_wave1 = m.forward(b1, false);
    Batch mixed2 = b1;
    mixed2.wave = b2.wave;
    Eigen::MatrixXd z_wave2 = m.forward(mixed2, false);
    CHECK((z_wave1 - z_wave2).cwiseAbs().maxCoeff() == 0.0);

    // forcing lambda = 1 equals a waveform-only model with the same head
    ConvTransformer plain(cfg, FusionConfig{}, kNumTargets, 101);  // same seed: same trunk
    for (const char* name : {"head.l1.W", "head.l1.b", "head.l2.W", "head.l2.b"})
        plain.store().find(name)->v = m.store().find(name)->v;
    m.gated_fuse()->force_lambda = Eigen::RowVectorXd::Ones(cfg.d_model);
    Eigen::MatrixXd z_gated = m.forward(b1, false);
    Eigen::MatrixXd z_plain = plain.forward(b1, false);
    CHECK((z_gated - z_plain).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("concat and cross-attention fusion react to covariates") {
    BackboneConfig cfg = tiny_transformer();
    for (auto mode : {FusionConfig::Mode::concat, FusionConfig::Mode::cross_attention}) {
        FusionConfig fus;
        fus.mode = mode;
        fus.d_e = 6;
        fus.heads = 2;
        ConvTransformer m(cfg, fus, 3, 111);
        Batch b1 = make_batch(2, 112, 3);
        Eigen::MatrixXd z1 = m.forward(b1, false);
        CHECK(z1.allFinite());
        Batch b2 = b1;
        b2.cov.array() += 0.5;
        Eigen::MatrixXd z2 = m.forward(b2, false);
        CHECK((z1 - z2).cwiseAbs().maxCoeff() > 0.0);
    }
}

TEST_CASE("mixture gating contracts") {
    std::vector<BackboneConfig> cfgs = {tiny_transformer(16), tiny_transformer(16)};
    Batch batch = make_batch(3, 121, 3);

    MoFMConfig mc;
    mc.fusion = MoFMConfig::Fusion::logit_moe;
    MoFM m(cfgs, mc, 3, 122);

    // one-hot gates pick out single-expert logits; a uniform gate is their mean
    Eigen::RowVectorXd g0(2), g1(2), gu(2);
    g0 << 1.0, 0.0;
    g1 << 0.0, 1.0;
    gu << 0.5, 0.5;
    m.force_gate = g0;
    Eigen::MatrixXd z0 = m.forward(batch, false);
    m.force_gate = g1;
    Eigen::MatrixXd z1 = m.forward(batch, false);
    m.force_gate = gu;
    Eigen::MatrixXd zu = m.forward(batch, false);
    CHECK((zu - (0.5 * z0 + 0.5 * z1)).cwiseAbs().maxCoeff() <= 1e-12);

    // identical experts agree with either one-hot pick
    for (const auto& p : m.store().all()) {
        if (p->name.rfind("exp0.", 0) == 0) {
            Param* twin = m.store().find("exp1." + p->name.substr(5));
            REQUIRE(twin != nullptr);
            twin->v = p->v;
        }
        if (p->name.rfind("mofm.head0.", 0) == 0) {
            Param* twin = m.store().find("mofm.head1." + p->name.substr(11));
            REQUIRE(twin != nullptr);
            twin->v = p->v;
        }
    }
    m.force_gate = g0;
    Eigen::MatrixXd za = m.forward(batch, false);
    m.force_gate = gu;
    Eigen::MatrixXd zb = m.forward(batch, false);
    CHECK((za - zb).cwiseAbs().maxCoeff() <= 1e-12);

    // gates off the simplex are an internal error
    Eigen::RowVectorXd bad(2);
    bad << 0.3, 0.3;
    m.force_gate = bad;
    CHECK(thrown_category([&] { m.forward(batch, false); }) == ErrCat::internal);

    // a single expert is rejected
    std::vector<BackboneConfig> one = {tiny_transformer(16)};
    CHECK(thrown_category([&] { MoFM bad_m(one, mc, 3, 1); }) == ErrCat::config);
}

TEST_CASE("mixture is permutation equivariant in its experts") {
    std::vector<BackboneConfig> ab = {tiny_transformer(16), tiny_transformer(8)};
    std::vector<BackboneConfig> ba = {tiny_transformer(8), tiny_transformer(16)};
    Batch batch = make_batch(2, 131, 3);
    for (auto fusion : {MoFMConfig::Fusion::concat, MoFMConfig::Fusion::gated,
                        MoFMConfig::Fusion::logit_moe}) {
        MoFMConfig mc;
        mc.fusion = fusion;
        mc.d_c = 8;
        MoFM m1(ab, mc, 3, 132);
        MoFM m2(ba, mc, 3, 133);
        // copy m1's tensors into m2 with expert roles swapped
        auto rename = [](const std::string& name) -> std::string {
            if (name.rfind("exp0.", 0) == 0) return "exp1." + name.substr(5);
            if (name.rfind("exp1.", 0) == 0) return "exp0." + name.substr(5);
            if (name.rfind("mofm.proj0.", 0) == 0) return "mofm.proj1." + name.substr(11);
            if (name.rfind("mofm.proj1.", 0) == 0) return "mofm.proj0." + name.substr(11);
            if (name.rfind("mofm.head0.", 0) == 0) return "mofm.head1." + name.substr(11);
            if (name.rfind("mofm.head1.", 0) == 0) return "mofm.head0." + name.substr(11);
            return name;
        };
        int d0 = 16, d1 = 8;
        for (const auto& p : m1.store().all()) {
            Param* dst = m2.store().find(rename(p->name));
            REQUIRE(dst != nullptr);
            if (p->name == "mofm.gate.W") {
                // permute gate rows (expert order) and input column blocks
                dst->v.row(0) << p->v.row(1).segment(d0, d1), p->v.row(1).segment(0, d0);
                dst->v.row(1) << p->v.row(0).segment(d0, d1), p->v.row(0).segment(0, d0);
            } else if (p->name == "mofm.gate.b") {
                dst->v(0, 0) = p->v(1, 0);
                dst->v(1, 0) = p->v(0, 0);
            } else if (p->name == "head.l1.W" && fusion == MoFMConfig::Fusion::concat) {
                // head input blocks follow the projected experts
                int dc = mc.d_c;
                dst->v.leftCols(dc) = p->v.middleCols(dc, dc);
                dst->v.middleCols(dc, dc) = p->v.leftCols(dc);
            } else {
                dst->v = p->v;
            }
        }
        Eigen::MatrixXd z1 = m1.forward(batch, false);
        Eigen::MatrixXd z2 = m2.forward(batch, false);
        INFO("fusion mode " << to_string(fusion));
        CHECK((z1 - z2).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("mixture per-expert freezing") {
    std::vector<BackboneConfig> cfgs = {tiny_transformer(16), tiny_transformer(16)};
    MoFMConfig mc;
    mc.fusion = MoFMConfig::Fusion::concat;
    mc.d_c = 8;
    MoFM m(cfgs, mc, 3, 141);
    m.apply_expert_policy(0, AdaptationPolicy{false, 0, std::nullopt});  // frozen expert
    m.apply_expert_policy(1, AdaptationPolicy{true, cfgs[1].layers, std::nullopt});
    Batch batch = make_batch(2, 142, 3);
    auto hash_prefix = [&](const std::string& prefix) {
        std::string buf;
        for (const auto& p : m.store().all())
            if (p->name.rfind(prefix, 0) == 0)
                buf.append(reinterpret_cast<const char*>(p->v.data()), size_t(p->v.size()) * 8);
        return fnv1a64(buf);
    };
    uint64_t e0_before = hash_prefix("exp0.");
    uint64_t e1_before = hash_prefix("exp1.");
    for (int step = 0; step < 3; ++step) {
        m.store().zero_grads();
        Eigen::MatrixXd dz;
        bce_loss(m.forward(batch, true), batch.y, &dz);
        m.backward(dz);
        sgd_step(m.store(), 1e-2);
    }
    CHECK(hash_prefix("exp0.") == e0_before);
    CHECK(hash_prefix("exp1.") != e1_before);
}

TEST_CASE("masked trunk substitutes the mask token") {
    BackboneConfig cfg = tiny_transformer();
    ParamStore s;
    Rng rng(151);
    TransformerTrunk trunk;
    trunk.init(s, "", cfg, rng);
    Batch b1 = make_batch(2, 152, 1);
    Batch b2 = make_batch(2, 153, 1);
    int n = 2 * trunk.token_len();
    std::vector<uint8_t> all_masked(size_t(n), 1);
    Eigen::MatrixXd t1 = trunk.forward(b1.wave, &all_masked);
    Eigen::MatrixXd lat1 = trunk.conv_latents();
    Eigen::MatrixXd t2 = trunk.forward(b2.wave, &all_masked);
    // fully masked tokens are waveform-blind
    CHECK((t1 - t2).cwiseAbs().maxCoeff() == 0.0);
    // but the cached conv latents still reflect the input
    Eigen::MatrixXd lat2 = trunk.conv_latents();
    CHECK((lat1 - lat2).cwiseAbs().maxCoeff() > 0.0);

    std::vector<uint8_t> none(size_t(n), 0);
    Eigen::MatrixXd t3 = trunk.forward(b1.wave, &none);
    Eigen::MatrixXd t4 = trunk.forward(b1.wave, nullptr);
    CHECK((t3 - t4).cwiseAbs().maxCoeff() == 0.0);
    CHECK((t1 - t3).cwiseAbs().maxCoeff() > 0.0);

    std::vector<uint8_t> short_mask(size_t(n - 1), 1);
    CHECK(thrown_category([&] { trunk.forward(b1.wave, &short_mask); }) == ErrCat::alignment);
}

TEST_CASE("checkpoint round trip and integrity") {
    TempDir dir;
    BackboneConfig cfg = tiny_transformer();
    ConvTransformer m(cfg, FusionConfig{}, 3, 161);
    Batch batch = make_batch(2, 162, 3);
    Eigen::MatrixXd z = m.forward(batch, false);

    nlohmann::json config = {{"family", "conv_transformer"}, {"d_model", cfg.d_model}};
    nlohmann::json policy = {{"conv_trainable", true}, {"b", cfg.layers}};
    std::string path = dir.file("model.ckpt");
    save_checkpoint(path, m.store(), config, policy);

    LoadedCheckpoint ck = load_checkpoint(path);
    CHECK(ck.header["config"]["d_model"] == cfg.d_model);
    CHECK(ck.header["policy"]["b"] == cfg.layers);
    CHECK(ck.tensors.size() == m.store().all().size());

    ConvTransformer m2(cfg, FusionConfig{}, 3, 999);  // different init
    restore_params(m2.store(), ck);
    Eigen::MatrixXd z2 = m2.forward(batch, false);
    CHECK((z - z2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(param_state_hash(m.store()) == param_state_hash(m2.store()));

    // flip one blob byte: integrity failure
    std::string raw = slurp_file(path);
    raw[raw.size() - 3] = char(raw[raw.size() - 3] ^ 0x40);
    std::string bad = dir.file("bad.ckpt");
    spit_file(bad, raw);
    CHECK(thrown_category([&] { load_checkpoint(bad); }) == ErrCat::integrity);

    // not a checkpoint at all
    spit_file(dir.file("junk.ckpt"), "hello world\n");
    CHECK(thrown_category([&] { load_checkpoint(dir.file("junk.ckpt")); }) == ErrCat::format);

    // a store with tensors the checkpoint lacks cannot be restored
    ConvTransformer wider(cfg, FusionConfig{}, 4, 7);
    CHECK(thrown_category([&] { restore_params(wider.store(), ck); }) == ErrCat::integrity);
}

TEST_CASE("pretrained backbone loading through a name map") {
    TempDir dir;
    BackboneConfig cfg = tiny_transformer();
    ConvTransformer donor(cfg, FusionConfig{}, 3, 171);
    std::string ckpt = dir.file("donor.ckpt");
    save_checkpoint(ckpt, donor.store(), nlohmann::json::object(), nlohmann::json::object());

    ConvTransformer target(cfg, FusionConfig{}, 3, 172);

    // absent checkpoint: no error, keeps random init, says so
    PretrainedLoadResult miss =
        load_pretrained_backbone(target.store(), dir.file("nope.ckpt"), dir.file("map.txt"));
    CHECK(!miss.loaded);
    CHECK(miss.message.find("random init") != std::string::npos);

    spit_file(dir.file("map.txt"),
              "conv.c0.W = conv.c0.W\n"
              "block0.attn.q.W = block0.attn.q.W\n");
    PretrainedLoadResult res = load_pretrained_backbone(target.store(), ckpt, dir.file("map.txt"));
    CHECK(res.loaded);
    CHECK(res.tensors_loaded == 2);
    auto same = [&](const char* name) {
        return (target.store().find(name)->v - donor.store().find(name)->v).cwiseAbs().maxCoeff() ==
               0.0;
    };
    CHECK(same("conv.c0.W"));
    CHECK(same("block0.attn.q.W"));
    // unmapped tensors keep their own init
    CHECK(!same("block1.attn.q.W"));

    // shape clash through the map is an integrity error
    spit_file(dir.file("badmap.txt"), "conv.c0.W = conv.c0.b\n");
    CHECK(thrown_category([&] {
              load_pretrained_backbone(target.store(), ckpt, dir.file("badmap.txt"));
          }) == ErrCat::integrity);
}

TEST_CASE("parameter names all classify into freezing groups") {
    BackboneConfig cfg = tiny_transformer();
    FusionConfig fus;
    fus.mode = FusionConfig::Mode::cross_attention;
    fus.d_e = 6;
    fus.heads = 2;
    ConvTransformer m(cfg, fus, 3, 181);
    LoraConfig lc;
    lc.rank = 2;
    m.apply_lora(lc, 182);
    std::set<std::string> seen;
    for (const auto& p : m.store().all()) seen.insert(group_key(p->name));
    CHECK(seen.count("conv") == 1);
    CHECK(seen.count("block0") == 1);
    CHECK(seen.count("lora") == 1);
    CHECK(seen.count("tab") == 1);
    CHECK(seen.count("head") == 1);
    CHECK(thrown_category([] { classify_param("mystery.W"); }) == ErrCat::internal);
}
