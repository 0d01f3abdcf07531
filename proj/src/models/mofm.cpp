#include "shdbench/models/mofm.hpp"

#include <cmath>

namespace shdbench::models {

const char* to_string(MoFMConfig::Fusion f) {
    switch (f) {
        case MoFMConfig::Fusion::concat: return "concat";
        case MoFMConfig::Fusion::gated: return "gated";
        case MoFMConfig::Fusion::logit_moe: return "logit_moe";
    }
    return "concat";
}

MoFMConfig::Fusion mofm_fusion_from_string(const std::string& s) {
    if (s == "concat") return MoFMConfig::Fusion::concat;
    if (s == "gated") return MoFMConfig::Fusion::gated;
    if (s == "logit_moe") return MoFMConfig::Fusion::logit_moe;
    throw Error(ErrCat::config, "unknown mixture fusion: " + s);
}

MoFM::MoFM(const std::vector<BackboneConfig>& expert_cfgs, const MoFMConfig& mcfg, int out_dim,
           uint64_t init_seed)
    : mcfg_(mcfg), out_dim_(out_dim) {
    mcfg.validate();
    require(expert_cfgs.size() >= 2, ErrCat::config, "mixture needs at least 2 experts");
    require(out_dim >= 1, ErrCat::config, "output width must be >= 1");
    Rng rng(init_seed);
    int k_n = int(expert_cfgs.size());
    experts_.resize(size_t(k_n));
    int sum_d = 0;
    for (int k = 0; k < k_n; ++k) {
        experts_[size_t(k)].init(store_, "exp" + std::to_string(k) + ".", expert_cfgs[size_t(k)],
                                 rng);
        sum_d += expert_cfgs[size_t(k)].d_model;
    }
    // Head widths follow the first expert's preset so mini mixtures stay mini.
    int hidden = expert_cfgs[0].head_hidden;
    double dropout = expert_cfgs[0].dropout;
    switch (mcfg.fusion) {
        case MoFMConfig::Fusion::concat:
            proj_.resize(size_t(k_n));
            for (int k = 0; k < k_n; ++k)
                proj_[size_t(k)].init(store_, "mofm.proj" + std::to_string(k) + ".",
                                      expert_cfgs[size_t(k)].d_model, mcfg.d_c, rng);
            head_.emplace();
            head_->init(store_, "head.", k_n * mcfg.d_c, hidden, out_dim, dropout, rng);
            break;
        case MoFMConfig::Fusion::gated:
            proj_.resize(size_t(k_n));
            for (int k = 0; k < k_n; ++k)
                proj_[size_t(k)].init(store_, "mofm.proj" + std::to_string(k) + ".",
                                      expert_cfgs[size_t(k)].d_model, mcfg.d_c, rng);
            gate_.emplace();
            gate_->init(store_, "mofm.gate.", sum_d, k_n, rng);
            head_.emplace();
            head_->init(store_, "head.", mcfg.d_c, hidden, out_dim, dropout, rng);
            break;
        case MoFMConfig::Fusion::logit_moe:
            gate_.emplace();
            gate_->init(store_, "mofm.gate.", sum_d, k_n, rng);
            expert_heads_.resize(size_t(k_n));
            for (int k = 0; k < k_n; ++k)
                expert_heads_[size_t(k)].init(store_, "mofm.head" + std::to_string(k) + ".",
                                              expert_cfgs[size_t(k)].d_model, hidden, out_dim,
                                              dropout, rng);
            break;
    }
}

Eigen::MatrixXd MoFM::gate_values(const Eigen::MatrixXd& concat_emb) {
    gate_forced_ = force_gate.has_value();
    Eigen::MatrixXd g;
    if (gate_forced_) {
        require(force_gate->size() == n_experts(), ErrCat::parameter,
                "forced gate arity mismatch");
        g = force_gate->replicate(concat_emb.rows(), 1);
    } else {
        g = gate_->forward(concat_emb);
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
            double mx = g.row(i).maxCoeff();
            g.row(i) = (g.row(i).array() - mx).exp();
            g.row(i) /= g.row(i).sum();
        }
    }
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        require(std::abs(g.row(i).sum() - 1.0) <= 1e-6, ErrCat::internal,
                "gate does not lie on the simplex");
    return g;
}

Eigen::MatrixXd MoFM::forward(const Batch& batch, bool train) {
    batch_ = int(batch.wave.size());
    int k_n = n_experts();
    h_.assign(size_t(k_n), Eigen::MatrixXd());
    for (int k = 0; k < k_n; ++k) {
        TransformerTrunk& tr = experts_[size_t(k)];
        Eigen::MatrixXd tokens = tr.forward(batch.wave);
        int t = tr.token_len();
        Eigen::MatrixXd h(batch_, tr.width());
        for (int r = 0; r < batch_; ++r)
            h.row(r) = tokens.middleRows(Eigen::Index(r) * t, t).colwise().mean();
        h_[size_t(k)] = std::move(h);
    }
    Eigen::Index sum_d = 0;
    for (const auto& h : h_) sum_d += h.cols();
    Eigen::MatrixXd concat_emb(batch_, sum_d);
    Eigen::Index off = 0;
    for (const auto& h : h_) {
        concat_emb.middleCols(off, h.cols()) = h;
        off += h.cols();
    }
    switch (mcfg_.fusion) {
        case MoFMConfig::Fusion::concat: {
            pk_.assign(size_t(k_n), Eigen::MatrixXd());
            Eigen::MatrixXd rep(batch_, Eigen::Index(k_n) * mcfg_.d_c);
            for (int k = 0; k < k_n; ++k) {
                pk_[size_t(k)] = proj_[size_t(k)].forward(h_[size_t(k)]);
                rep.middleCols(Eigen::Index(k) * mcfg_.d_c, mcfg_.d_c) = pk_[size_t(k)];
            }
            return head_->forward(rep, train, drop_rng_);
        }
        case MoFMConfig::Fusion::gated: {
            gates_ = gate_values(concat_emb);
            pk_.assign(size_t(k_n), Eigen::MatrixXd());
            Eigen::MatrixXd mixed = Eigen::MatrixXd::Zero(batch_, mcfg_.d_c);
            for (int k = 0; k < k_n; ++k) {
                pk_[size_t(k)] = proj_[size_t(k)].forward(h_[size_t(k)]);
                mixed += (pk_[size_t(k)].array().colwise() * gates_.col(k).array()).matrix();
            }
            return head_->forward(mixed, train, drop_rng_);
        }
        case MoFMConfig::Fusion::logit_moe: {
            gates_ = gate_values(concat_emb);
            zk_.assign(size_t(k_n), Eigen::MatrixXd());
            Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(batch_, out_dim_);
            for (int k = 0; k < k_n; ++k) {
                zk_[size_t(k)] = expert_heads_[size_t(k)].forward(h_[size_t(k)], train, drop_rng_);
                logits += (zk_[size_t(k)].array().colwise() * gates_.col(k).array()).matrix();
            }
            return logits;
        }
    }
    throw Error(ErrCat::internal, "unreachable fusion branch");
}

void MoFM::backward(const Eigen::MatrixXd& dlogits) {
    int k_n = n_experts();
    std::vector<Eigen::MatrixXd> dh(static_cast<size_t>(k_n));
    Eigen::MatrixXd dgate;  // B x K, pre-softmax handled below
    switch (mcfg_.fusion) {
        case MoFMConfig::Fusion::concat: {
            Eigen::MatrixXd drep = head_->backward(dlogits);
            for (int k = 0; k < k_n; ++k)
                dh[size_t(k)] = proj_[size_t(k)].backward(
                    drep.middleCols(Eigen::Index(k) * mcfg_.d_c, mcfg_.d_c));
            break;
        }
        case MoFMConfig::Fusion::gated: {
            Eigen::MatrixXd dmixed = head_->backward(dlogits);
            dgate.resize(batch_, k_n);
            for (int k = 0; k < k_n; ++k) {
                dgate.col(k) = (dmixed.array() * pk_[size_t(k)].array()).rowwise().sum().matrix();
                Eigen::MatrixXd dpk = (dmixed.array().colwise() * gates_.col(k).array()).matrix();
                dh[size_t(k)] = proj_[size_t(k)].backward(dpk);
            }
            break;
        }
        case MoFMConfig::Fusion::logit_moe: {
            dgate.resize(batch_, k_n);
            for (int k = 0; k < k_n; ++k) {
                dgate.col(k) = (dlogits.array() * zk_[size_t(k)].array()).rowwise().sum().matrix();
                Eigen::MatrixXd dz = (dlogits.array().colwise() * gates_.col(k).array()).matrix();
                dh[size_t(k)] = expert_heads_[size_t(k)].backward(dz);
            }
            break;
        }
    }
    if (dgate.size() > 0 && !gate_forced_) {
        // softmax backward, then split the gate-input gradient across experts
        Eigen::MatrixXd dpre(batch_, k_n);
        for (Eigen::Index i = 0; i < dpre.rows(); ++i) {
            double dot = (dgate.row(i).array() * gates_.row(i).array()).sum();
            dpre.row(i) = gates_.row(i).array() * (dgate.row(i).array() - dot);
        }
        Eigen::MatrixXd dcat = gate_->backward(dpre);
        Eigen::Index off = 0;
        for (int k = 0; k < k_n; ++k) {
            dh[size_t(k)] += dcat.middleCols(off, h_[size_t(k)].cols());
            off += h_[size_t(k)].cols();
        }
    }
    for (int k = 0; k < k_n; ++k) {
        TransformerTrunk& tr = experts_[size_t(k)];
        int t = tr.token_len();
        Eigen::MatrixXd dtokens(Eigen::Index(batch_) * t, tr.width());
        double inv_t = 1.0 / double(t);
        for (int r = 0; r < batch_; ++r)
            dtokens.middleRows(Eigen::Index(r) * t, t) = (dh[size_t(k)].row(r) * inv_t).replicate(t, 1);
        tr.backward(dtokens);
    }
}

Eigen::MatrixXd MoFM::pooled_embedding(const Batch& batch) {
    forward(batch, false);
    Eigen::Index sum_d = 0;
    for (const auto& h : h_) sum_d += h.cols();
    Eigen::MatrixXd concat_emb(batch_, sum_d);
    Eigen::Index off = 0;
    for (const auto& h : h_) {
        concat_emb.middleCols(off, h.cols()) = h;
        off += h.cols();
    }
    return concat_emb;
}

void MoFM::apply_expert_policy(int k, const AdaptationPolicy& policy) {
    require(k >= 0 && k < n_experts(), ErrCat::parameter, "expert index out of range");
    policy.validate(experts_[size_t(k)].depth());
    std::string prefix = "exp" + std::to_string(k) + ".";
    int depth = experts_[size_t(k)].depth();
    for (const auto& p : store_.all()) {
        if (p->name.rfind(prefix, 0) != 0) continue;
        GroupRef ref = classify_param(p->name);
        switch (ref.group) {
            case ParamGroup::conv: p->trainable = policy.conv_trainable; break;
            case ParamGroup::block: p->trainable = ref.block_index >= depth - policy.b; break;
            case ParamGroup::lora: p->trainable = true; break;
            default: break;
        }
    }
}

void MoFM::apply_expert_lora(int k, const LoraConfig& lc, uint64_t seed) {
    require(k >= 0 && k < n_experts(), ErrCat::parameter, "expert index out of range");
    Rng rng(seed);
    experts_[size_t(k)].enable_lora(lc, rng);
}

}  // namespace shdbench::models
