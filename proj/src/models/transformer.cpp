#include "shdbench/models/transformer.hpp"

#include <cmath>

#include "shdbench/data/types.hpp"

namespace shdbench::models {

// ---------------------------------------------------------------------------
// TransformerTrunk

void TransformerTrunk::init(ParamStore& s, const std::string& prefix, const BackboneConfig& cfg,
                            Rng& rng) {
    cfg.validate();
    require(cfg.family == BackboneConfig::Family::conv_transformer, ErrCat::internal,
            "trunk requires a conv_transformer config");
    cfg_ = cfg;
    prefix_ = prefix;
    store_ = &s;
    int cin = kLeads;
    convs_.resize(cfg.conv.size());
    norms_.resize(cfg.conv.size());
    acts_.resize(cfg.conv.size());
    for (size_t i = 0; i < cfg.conv.size(); ++i) {
        const auto& st = cfg.conv[i];
        convs_[i].init(s, prefix + "conv.c" + std::to_string(i) + ".", cin, st.out_channels,
                       st.kernel, st.stride, rng);
        norms_[i].init(s, prefix + "conv.n" + std::to_string(i) + ".", st.out_channels);
        cin = st.out_channels;
    }
    convs_[0].input_grad = false;
    require(cin == cfg.d_model, ErrCat::config,
            "last conv stage width must equal the model width");
    t_ = cfg.token_count();
    pos_ = s.add(prefix + "conv.pos", t_, cfg.d_model);
    init_normal(pos_->v, 0.02, rng);
    mask_tok_ = s.add(prefix + "conv.mask_token", 1, cfg.d_model);
    init_normal(mask_tok_->v, 0.02, rng);
    blocks_.resize(size_t(cfg.layers));
    for (int i = 0; i < cfg.layers; ++i)
        blocks_[size_t(i)].init(s, prefix + "block" + std::to_string(i) + ".", cfg.d_model,
                                cfg.heads, cfg.ff, rng);
}

Eigen::MatrixXd TransformerTrunk::forward(const std::vector<Eigen::MatrixXd>& waves,
                                          const std::vector<uint8_t>* mask) {
    batch_ = int(waves.size());
    ChannelMap m = stack_waveforms(waves);
    for (size_t i = 0; i < convs_.size(); ++i) {
        m = convs_[i].forward(m);
        m = norms_[i].forward(m);
        m.a = acts_[i].forward(m.a);
    }
    require(m.len == t_, ErrCat::internal, "token count drifted from config");
    // transpose channel map into row-per-token layout
    Eigen::Index n = Eigen::Index(batch_) * t_;
    conv_lat_.resize(n, cfg_.d_model);
    for (Eigen::Index i = 0; i < n; ++i) conv_lat_.row(i) = m.a.col(i).transpose();
    Eigen::MatrixXd x = conv_lat_;
    mask_.assign(size_t(n), 0);
    if (mask != nullptr) {
        require(int(mask->size()) == n, ErrCat::alignment, "mask length mismatch");
        mask_ = *mask;
        for (Eigen::Index i = 0; i < n; ++i)
            if (mask_[size_t(i)] != 0) x.row(i) = mask_tok_->v.row(0);
    }
    for (int r = 0; r < batch_; ++r) x.middleRows(Eigen::Index(r) * t_, t_) += pos_->v;
    for (auto& blk : blocks_) x = blk.forward(x, batch_, t_);
    return x;
}

void TransformerTrunk::backward(const Eigen::MatrixXd& dtokens,
                                const Eigen::MatrixXd* dconv_extra) {
    // Find how deep gradients must descend: the lowest trainable block, or all
    // the way into the conv stack when it (or any adapter, or the mask path)
    // still trains.
    bool need_conv = dconv_extra != nullptr;
    int lowest = cfg_.layers;
    for (const auto& p : store_->all()) {
        if (!p->trainable || p->name.rfind(prefix_, 0) != 0) continue;
        GroupRef ref = classify_param(p->name);
        if (ref.group == ParamGroup::conv) need_conv = true;
        if (ref.group == ParamGroup::block) lowest = std::min(lowest, ref.block_index);
        if (ref.group == ParamGroup::lora) lowest = 0;
    }
    int stop = need_conv ? 0 : lowest;
    if (stop >= cfg_.layers && !need_conv) return;
    Eigen::MatrixXd dx = dtokens;
    for (int i = cfg_.layers - 1; i >= stop; --i) dx = blocks_[size_t(i)].backward(dx);
    if (!need_conv) return;
    if (pos_->trainable)
        for (int r = 0; r < batch_; ++r) pos_->g += dx.middleRows(Eigen::Index(r) * t_, t_);
    Eigen::MatrixXd dlat = Eigen::MatrixXd::Zero(dx.rows(), dx.cols());
    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
        if (mask_[size_t(i)] != 0) {
            if (mask_tok_->trainable) mask_tok_->g.row(0) += dx.row(i);
        } else {
            dlat.row(i) = dx.row(i);
        }
    }
    if (dconv_extra != nullptr) dlat += *dconv_extra;
    ChannelMap dm;
    dm.batch = batch_;
    dm.len = t_;
    dm.a.resize(cfg_.d_model, dlat.rows());
    for (Eigen::Index i = 0; i < dlat.rows(); ++i) dm.a.col(i) = dlat.row(i).transpose();
    for (int i = int(convs_.size()) - 1; i >= 0; --i) {
        dm.a = acts_[size_t(i)].backward(dm.a);
        dm = norms_[size_t(i)].backward(dm);
        dm = convs_[size_t(i)].backward(dm);
    }
}

void TransformerTrunk::enable_lora(const LoraConfig& lc, Rng& rng) {
    lc.validate();
    require(!has_lora(), ErrCat::config, "backbone already adapted");
    for (size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i].enable_lora(*store_, prefix_ + "block" + std::to_string(i) + ".", lc.rank,
                               lc.scale(), rng);
}

// ---------------------------------------------------------------------------
// TabEmbed

void TabEmbed::init(ParamStore& s, int d_e, Rng& rng) {
    l1_.init(s, "tab.l1.", int(data::kCovariateNames.size()), d_e, rng);
    l2_.init(s, "tab.l2.", d_e, d_e, rng);
}

Eigen::MatrixXd TabEmbed::forward(const Eigen::MatrixXd& cov) {
    require(cov.cols() == Eigen::Index(data::kCovariateNames.size()), ErrCat::alignment,
            "covariate matrix must have 7 columns");
    require(cov.allFinite(), ErrCat::data, "non-finite covariate input");
    return l2_.forward(act_.forward(l1_.forward(cov)));
}

Eigen::MatrixXd TabEmbed::backward(const Eigen::MatrixXd& de) {
    return l1_.backward(act_.backward(l2_.backward(de)));
}

// ---------------------------------------------------------------------------
// GatedFuse

void GatedFuse::init(ParamStore& s, int d, Rng& rng) {
    gate_.init(s, "fuse.gate.", 2 * d, d, rng);
}

Eigen::MatrixXd GatedFuse::forward(const Eigen::MatrixXd& h, const Eigen::MatrixXd& e) {
    h_ = h;
    e_ = e;
    forced_ = force_lambda.has_value();
    if (forced_) {
        require(force_lambda->size() == h.cols(), ErrCat::parameter,
                "forced lambda width mismatch");
        lam_ = force_lambda->replicate(h.rows(), 1);
    } else {
        Eigen::MatrixXd z(h.rows(), h.cols() + e.cols());
        z << h, e;
        lam_ = sigmoid(gate_.forward(z));
    }
    return lam_.array() * h.array() + (1.0 - lam_.array()) * e.array();
}

void GatedFuse::backward(const Eigen::MatrixXd& dout, Eigen::MatrixXd& dh, Eigen::MatrixXd& de) {
    dh = dout.array() * lam_.array();
    de = dout.array() * (1.0 - lam_.array());
    if (forced_) return;
    Eigen::MatrixXd dlam = dout.array() * (h_.array() - e_.array());
    Eigen::MatrixXd dpre = dlam.array() * lam_.array() * (1.0 - lam_.array());
    Eigen::MatrixXd dz = gate_.backward(dpre);
    dh += dz.leftCols(h_.cols());
    de += dz.rightCols(e_.cols());
}

// ---------------------------------------------------------------------------
// CrossAttnFuse

void CrossAttnFuse::init(ParamStore& s, int d, int d_e, int heads, Rng& rng) {
    d_ = d;
    heads_ = heads;
    dh_ = d / heads;
    q_.init(s, "fuse.q.", d_e, d, rng);
    k_.init(s, "fuse.k.", d, d, rng);
    v_.init(s, "fuse.v.", d, d, rng);
    o_.init(s, "fuse.o.", d, d, rng);
}

Eigen::MatrixXd CrossAttnFuse::forward(const Eigen::MatrixXd& e, const Eigen::MatrixXd& tokens,
                                       int batch, int t) {
    batch_ = batch;
    t_ = t;
    qm_ = q_.forward(e);        // B x d
    km_ = k_.forward(tokens);   // (B*T) x d
    vm_ = v_.forward(tokens);
    probs_.assign(size_t(batch) * heads_, Eigen::RowVectorXd());
    Eigen::MatrixXd ctx(batch, d_);
    double scale = 1.0 / std::sqrt(double(dh_));
    for (int r = 0; r < batch; ++r) {
        Eigen::Index row0 = Eigen::Index(r) * t;
        for (int h = 0; h < heads_; ++h) {
            auto kb = km_.block(row0, Eigen::Index(h) * dh_, t, dh_);
            auto vb = vm_.block(row0, Eigen::Index(h) * dh_, t, dh_);
            Eigen::RowVectorXd sc = qm_.row(r).segment(Eigen::Index(h) * dh_, dh_) *
                                    kb.transpose() * scale;
            double mx = sc.maxCoeff();
            sc = (sc.array() - mx).exp();
            sc /= sc.sum();
            probs_[size_t(r) * heads_ + h] = sc;
            ctx.row(r).segment(Eigen::Index(h) * dh_, dh_) = sc * vb;
        }
    }
    return o_.forward(ctx);
}

void CrossAttnFuse::backward(const Eigen::MatrixXd& datt, Eigen::MatrixXd& de,
                             Eigen::MatrixXd& dtokens) {
    Eigen::MatrixXd dctx = o_.backward(datt);
    Eigen::MatrixXd dq(batch_, d_);
    Eigen::MatrixXd dk = Eigen::MatrixXd::Zero(Eigen::Index(batch_) * t_, d_);
    Eigen::MatrixXd dv = Eigen::MatrixXd::Zero(Eigen::Index(batch_) * t_, d_);
    double scale = 1.0 / std::sqrt(double(dh_));
    for (int r = 0; r < batch_; ++r) {
        Eigen::Index row0 = Eigen::Index(r) * t_;
        for (int h = 0; h < heads_; ++h) {
            const Eigen::RowVectorXd& p = probs_[size_t(r) * heads_ + h];
            auto kb = km_.block(row0, Eigen::Index(h) * dh_, t_, dh_);
            auto vb = vm_.block(row0, Eigen::Index(h) * dh_, t_, dh_);
            Eigen::RowVectorXd dc = dctx.row(r).segment(Eigen::Index(h) * dh_, dh_);
            Eigen::RowVectorXd dp = dc * vb.transpose();
            dv.block(row0, Eigen::Index(h) * dh_, t_, dh_).noalias() = p.transpose() * dc;
            double dot = (dp.array() * p.array()).sum();
            Eigen::RowVectorXd ds = p.array() * (dp.array() - dot);
            dq.row(r).segment(Eigen::Index(h) * dh_, dh_).noalias() = ds * kb * scale;
            dk.block(row0, Eigen::Index(h) * dh_, t_, dh_).noalias() =
                ds.transpose() * qm_.row(r).segment(Eigen::Index(h) * dh_, dh_) * scale;
        }
    }
    de = q_.backward(dq);
    dtokens = k_.backward(dk);
    dtokens += v_.backward(dv);
}

// ---------------------------------------------------------------------------
// ConvTransformer

ConvTransformer::ConvTransformer(const BackboneConfig& cfg, const FusionConfig& fusion,
                                 int out_dim, uint64_t init_seed)
    : cfg_(cfg), fusion_(fusion), out_dim_(out_dim) {
    cfg.validate();
    fusion.validate(cfg.d_model);
    require(out_dim >= 1, ErrCat::config, "output width must be >= 1");
    Rng rng(init_seed);
    trunk_.init(store_, "", cfg, rng);
    int head_in = cfg.d_model;
    if (fusion.mode != FusionConfig::Mode::none) {
        tab_.emplace();
        tab_->init(store_, fusion.d_e, rng);
        switch (fusion.mode) {
            case FusionConfig::Mode::concat: head_in = cfg.d_model + fusion.d_e; break;
            case FusionConfig::Mode::gated:
                gated_.emplace();
                gated_->init(store_, cfg.d_model, rng);
                head_in = cfg.d_model;
                break;
            case FusionConfig::Mode::cross_attention:
                xattn_.emplace();
                xattn_->init(store_, cfg.d_model, fusion.d_e, fusion.heads, rng);
                head_in = cfg.d_model + fusion.d_e;
                break;
            default: break;
        }
    }
    head_.init(store_, "head.", head_in, cfg.head_hidden, out_dim, cfg.dropout, rng);
}

Eigen::MatrixXd ConvTransformer::pool(const Eigen::MatrixXd& tokens) const {
    int t = trunk_.token_len();
    Eigen::MatrixXd h(batch_, cfg_.d_model);
    for (int r = 0; r < batch_; ++r)
        h.row(r) = tokens.middleRows(Eigen::Index(r) * t, t).colwise().mean();
    return h;
}

Eigen::MatrixXd ConvTransformer::fuse_forward(const Eigen::MatrixXd& h, const Eigen::MatrixXd& cov,
                                              const Eigen::MatrixXd& tokens) {
    switch (fusion_.mode) {
        case FusionConfig::Mode::none: return h;
        case FusionConfig::Mode::concat: {
            Eigen::MatrixXd e = tab_->forward(cov);
            Eigen::MatrixXd rep(h.rows(), h.cols() + e.cols());
            rep << h, e;
            return rep;
        }
        case FusionConfig::Mode::gated: return gated_->forward(h, tab_->forward(cov));
        case FusionConfig::Mode::cross_attention: {
            Eigen::MatrixXd e = tab_->forward(cov);
            Eigen::MatrixXd att = xattn_->forward(e, tokens, batch_, trunk_.token_len());
            Eigen::MatrixXd rep(h.rows(), att.cols() + e.cols());
            rep << att, e;
            return rep;
        }
    }
    return h;
}

Eigen::MatrixXd ConvTransformer::forward(const Batch& batch, bool train) {
    from_cache_ = false;
    batch_ = int(batch.wave.size());
    tokens_ = trunk_.forward(batch.wave);
    Eigen::MatrixXd h = pool(tokens_);
    Eigen::MatrixXd rep = fuse_forward(h, batch.cov, tokens_);
    return head_.forward(rep, train, drop_rng_);
}

void ConvTransformer::fuse_backward(const Eigen::MatrixXd& drep, Eigen::MatrixXd& dh,
                                    Eigen::MatrixXd* dtokens) {
    switch (fusion_.mode) {
        case FusionConfig::Mode::none: dh = drep; return;
        case FusionConfig::Mode::concat: {
            dh = drep.leftCols(cfg_.d_model);
            tab_->backward(drep.rightCols(fusion_.d_e));
            return;
        }
        case FusionConfig::Mode::gated: {
            Eigen::MatrixXd de;
            gated_->backward(drep, dh, de);
            tab_->backward(de);
            return;
        }
        case FusionConfig::Mode::cross_attention: {
            Eigen::MatrixXd de_att, de_cat = drep.rightCols(fusion_.d_e);
            Eigen::MatrixXd dtok;
            xattn_->backward(drep.leftCols(cfg_.d_model), de_att, dtok);
            require(dtokens != nullptr, ErrCat::internal,
                    "cross-attention fusion has no embedding-cache path");
            *dtokens += dtok;
            dh = Eigen::MatrixXd::Zero(de_att.rows(), cfg_.d_model);
            tab_->backward(de_att + de_cat);
            return;
        }
    }
}

void ConvTransformer::backward(const Eigen::MatrixXd& dlogits) {
    require(!from_cache_, ErrCat::internal, "backward after a cached forward");
    Eigen::MatrixXd drep = head_.backward(dlogits);
    int t = trunk_.token_len();
    Eigen::MatrixXd dtokens = Eigen::MatrixXd::Zero(Eigen::Index(batch_) * t, cfg_.d_model);
    Eigen::MatrixXd dh;
    fuse_backward(drep, dh, &dtokens);
    double inv_t = 1.0 / double(t);
    for (int r = 0; r < batch_; ++r)
        dtokens.middleRows(Eigen::Index(r) * t, t).rowwise() += dh.row(r) * inv_t;
    trunk_.backward(dtokens);
}

Eigen::MatrixXd ConvTransformer::pooled_embedding(const Batch& batch) {
    batch_ = int(batch.wave.size());
    Eigen::MatrixXd tokens = trunk_.forward(batch.wave);
    return pool(tokens);
}

Eigen::MatrixXd ConvTransformer::forward_from_embedding(const Eigen::MatrixXd& h,
                                                        const Eigen::MatrixXd& cov, bool train) {
    require(supports_embedding_cache(), ErrCat::config,
            "cross-attention fusion cannot run from cached embeddings");
    from_cache_ = true;
    batch_ = int(h.rows());
    Eigen::MatrixXd rep = fuse_forward(h, cov, Eigen::MatrixXd());
    return head_.forward(rep, train, drop_rng_);
}

void ConvTransformer::backward_from_embedding(const Eigen::MatrixXd& dlogits) {
    require(from_cache_, ErrCat::internal, "no cached forward to backpropagate");
    Eigen::MatrixXd drep = head_.backward(dlogits);
    Eigen::MatrixXd dh;
    fuse_backward(drep, dh, nullptr);  // dh discarded: backbone is frozen on this path
}

void ConvTransformer::apply_lora(const LoraConfig& lc, uint64_t seed) {
    Rng rng(seed);
    trunk_.enable_lora(lc, rng);
}

}  // namespace shdbench::models
