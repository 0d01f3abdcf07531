#include "shdbench/models/resnet.hpp"

namespace shdbench::models {

void ResNet1D::ResBlock::init(ParamStore& s, const std::string& prefix, int cin, int cout,
                              int stride, Rng& rng) {
    c1.init(s, prefix + "c1.", cin, cout, 3, stride, rng);
    c2.init(s, prefix + "c2.", cout, cout, 3, 1, rng);
    n1.init(s, prefix + "n1.", cout);
    n2.init(s, prefix + "n2.", cout);
    if (cin != cout || stride != 1) {
        proj.emplace();
        proj->init(s, prefix + "proj.", cin, cout, 1, stride, rng);
    }
}

ChannelMap ResNet1D::ResBlock::forward(const ChannelMap& x) {
    ChannelMap main = n2.forward(c2.forward(a1.forward(n1.forward(c1.forward(x)))));
    ChannelMap skip = proj ? proj->forward(x) : x;
    main.a += skip.a;
    return a2.forward(main);
}

ChannelMap ResNet1D::ResBlock::backward(const ChannelMap& dy) {
    ChannelMap dsum = a2.backward(dy);
    ChannelMap dx = c1.backward(n1.backward(a1.backward(c2.backward(n2.backward(dsum)))));
    if (proj) {
        ChannelMap dskip = proj->backward(dsum);
        dx.a += dskip.a;
    } else {
        dx.a += dsum.a;
    }
    return dx;
}

ResNet1D::ResNet1D(const BackboneConfig& cfg, int out_dim, uint64_t init_seed)
    : cfg_(cfg), out_dim_(out_dim) {
    cfg.validate();
    require(cfg.family == BackboneConfig::Family::resnet1d, ErrCat::internal,
            "resnet model requires a resnet1d config");
    require(out_dim >= 1, ErrCat::config, "output width must be >= 1");
    Rng rng(init_seed);
    const auto& w = cfg.stage_widths;
    stem_.init(store_, "conv.stem.", kLeads, w[0], 7, 2, rng);
    stem_.input_grad = false;
    stem_norm_.init(store_, "conv.stem_norm.", w[0]);
    blocks_.resize(8);
    for (int s = 0; s < 4; ++s)
        for (int i = 0; i < 2; ++i) {
            int cin = i == 0 ? (s == 0 ? w[0] : w[size_t(s) - 1]) : w[size_t(s)];
            int stride = (i == 0 && s > 0) ? 2 : 1;
            blocks_[size_t(s) * 2 + i].init(
                store_, "conv.s" + std::to_string(s) + "b" + std::to_string(i) + ".", cin,
                w[size_t(s)], stride, rng);
        }
    embed_.init(store_, "conv.embed.", w[3], cfg.embed_dim, rng);
    head_.init(store_, "head.", cfg.embed_dim, cfg.head_hidden, out_dim, cfg.dropout, rng);
}

Eigen::MatrixXd ResNet1D::trunk_forward(const std::vector<Eigen::MatrixXd>& waves) {
    batch_ = int(waves.size());
    ChannelMap m = stack_waveforms(waves);
    m = stem_act_.forward(stem_norm_.forward(stem_.forward(m)));
    m = pool_.forward(m);
    for (auto& blk : blocks_) m = blk.forward(m);
    gap_len_ = m.len;
    Eigen::MatrixXd gap(batch_, m.a.rows());
    for (int r = 0; r < batch_; ++r)
        gap.row(r) = m.a.middleCols(Eigen::Index(r) * m.len, m.len).rowwise().mean().transpose();
    return embed_.forward(gap);
}

void ResNet1D::trunk_backward(const Eigen::MatrixXd& dembed) {
    Eigen::MatrixXd dgap = embed_.backward(dembed);
    ChannelMap dm;
    dm.batch = batch_;
    dm.len = gap_len_;
    dm.a.resize(dgap.cols(), Eigen::Index(batch_) * gap_len_);
    double inv = 1.0 / double(gap_len_);
    for (int r = 0; r < batch_; ++r)
        dm.a.middleCols(Eigen::Index(r) * gap_len_, gap_len_).colwise() =
            (dgap.row(r) * inv).transpose();
    for (int i = int(blocks_.size()) - 1; i >= 0; --i) dm = blocks_[size_t(i)].backward(dm);
    dm = pool_.backward(dm);
    stem_.backward(stem_norm_.backward(stem_act_.backward(dm)));
}

Eigen::MatrixXd ResNet1D::forward(const Batch& batch, bool train) {
    Eigen::MatrixXd emb = trunk_forward(batch.wave);
    return head_.forward(emb, train, drop_rng_);
}

void ResNet1D::backward(const Eigen::MatrixXd& dlogits) {
    trunk_backward(head_.backward(dlogits));
}

Eigen::MatrixXd ResNet1D::pooled_embedding(const Batch& batch) { return trunk_forward(batch.wave); }

}  // namespace shdbench::models
