#pragma once

#include <optional>

#include "shdbench/models/layers.hpp"

namespace shdbench::models {

/// Conv front-end plus pre-norm transformer stack. Emits one token per
/// downsampled frame; no final trunk norm, the head normalizes implicitly.
/// The optional mask substitutes the learned mask token for selected frames
/// (after the conv encoder, before positional embeddings) and keeps the
/// pre-mask conv latents around as contrastive targets.
class TransformerTrunk {
  public:
    void init(ParamStore& s, const std::string& prefix, const BackboneConfig& cfg, Rng& rng);

    Eigen::MatrixXd forward(const std::vector<Eigen::MatrixXd>& waves,
                            const std::vector<uint8_t>* mask = nullptr);
    /// Pre-mask, pre-position conv latents from the last forward ((B*T) x d).
    const Eigen::MatrixXd& conv_latents() const { return conv_lat_; }

    /// dtokens is the gradient at the block-stack output; dconv_extra, when
    /// given, adds directly onto the conv-latent gradient (contrastive target
    /// path). Backward stops descending once every lower layer is frozen.
    void backward(const Eigen::MatrixXd& dtokens, const Eigen::MatrixXd* dconv_extra = nullptr);

    void enable_lora(const LoraConfig& lc, Rng& rng);
    bool has_lora() const { return !blocks_.empty() && blocks_[0].has_lora(); }

    int token_len() const { return t_; }
    int width() const { return cfg_.d_model; }
    int depth() const { return cfg_.layers; }
    int last_batch() const { return batch_; }

  private:
    BackboneConfig cfg_;
    std::string prefix_;
    ParamStore* store_ = nullptr;
    std::vector<Conv1d> convs_;
    std::vector<ChannelNorm> norms_;
    std::vector<Gelu> acts_;
    Param* pos_ = nullptr;
    Param* mask_tok_ = nullptr;
    std::vector<TransformerBlock> blocks_;
    int t_ = 0;
    int batch_ = 0;
    std::vector<uint8_t> mask_;
    Eigen::MatrixXd conv_lat_;
};

/// Maps the 7 standardized covariates to a d_e-wide embedding. Rejects
/// non-finite inputs outright; imputation happens upstream.
class TabEmbed {
  public:
    void init(ParamStore& s, int d_e, Rng& rng);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& cov);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& de);

  private:
    Linear l1_, l2_;
    Gelu act_;
};

/// lambda = sigmoid(W_g [h; e] + b_g); out = lambda*h + (1-lambda)*e.
/// force_lambda bypasses the gate for algebraic tests.
class GatedFuse {
  public:
    void init(ParamStore& s, int d, Rng& rng);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& h, const Eigen::MatrixXd& e);
    void backward(const Eigen::MatrixXd& dout, Eigen::MatrixXd& dh, Eigen::MatrixXd& de);

    /// Test hook: fixes lambda per component for every record (gate bypassed).
    std::optional<Eigen::RowVectorXd> force_lambda;

  private:
    Linear gate_;
    Eigen::MatrixXd lam_, h_, e_;
    bool forced_ = false;
};

/// One query per record, projected from the tabular embedding, attends over
/// the waveform tokens; the attended vector is concatenated with e downstream.
class CrossAttnFuse {
  public:
    void init(ParamStore& s, int d, int d_e, int heads, Rng& rng);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& e, const Eigen::MatrixXd& tokens, int batch,
                            int t);
    void backward(const Eigen::MatrixXd& datt, Eigen::MatrixXd& de, Eigen::MatrixXd& dtokens);

  private:
    Linear q_, k_, v_, o_;
    int d_ = 0, heads_ = 0, dh_ = 0, batch_ = 0, t_ = 0;
    Eigen::MatrixXd qm_, km_, vm_;
    std::vector<Eigen::RowVectorXd> probs_;  // per (record, head)
};

/// Waveform transformer with optional tabular fusion and an MLP head.
class ConvTransformer : public NeuralModel {
  public:
    ConvTransformer(const BackboneConfig& cfg, const FusionConfig& fusion, int out_dim,
                    uint64_t init_seed);

    Eigen::MatrixXd forward(const Batch& batch, bool train) override;
    void backward(const Eigen::MatrixXd& dlogits) override;
    ParamStore& store() override { return store_; }
    const ParamStore& store() const override { return store_; }
    int n_blocks() const override { return cfg_.layers; }
    Eigen::MatrixXd pooled_embedding(const Batch& batch) override;
    void seed_dropout(uint64_t seed) override { drop_rng_ = Rng(seed); }

    /// Installs rank-r adapters on every block's query and value projections.
    void apply_lora(const LoraConfig& lc, uint64_t seed);

    /// Head-only pass over cached pooled embeddings (probe fast path).
    /// Unavailable under cross-attention fusion, which needs live tokens.
    bool supports_embedding_cache() const {
        return fusion_.mode != FusionConfig::Mode::cross_attention;
    }
    Eigen::MatrixXd forward_from_embedding(const Eigen::MatrixXd& h, const Eigen::MatrixXd& cov,
                                           bool train);
    void backward_from_embedding(const Eigen::MatrixXd& dlogits);

    TransformerTrunk& trunk() { return trunk_; }
    GatedFuse* gated_fuse() { return gated_ ? &*gated_ : nullptr; }
    const BackboneConfig& config() const { return cfg_; }
    const FusionConfig& fusion_config() const { return fusion_; }
    int out_dim() const { return out_dim_; }

  private:
    Eigen::MatrixXd pool(const Eigen::MatrixXd& tokens) const;
    Eigen::MatrixXd fuse_forward(const Eigen::MatrixXd& h, const Eigen::MatrixXd& cov,
                                 const Eigen::MatrixXd& tokens);
    // Fills dh; routes tabular/token gradients internally (dtokens accumulated).
    void fuse_backward(const Eigen::MatrixXd& drep, Eigen::MatrixXd& dh, Eigen::MatrixXd* dtokens);

    BackboneConfig cfg_;
    FusionConfig fusion_;
    int out_dim_;
    ParamStore store_;
    TransformerTrunk trunk_;
    std::optional<TabEmbed> tab_;
    std::optional<GatedFuse> gated_;
    std::optional<CrossAttnFuse> xattn_;
    HeadMlp head_;
    Rng drop_rng_{0};
    // forward caches
    Eigen::MatrixXd tokens_;
    int batch_ = 0;
    bool from_cache_ = false;
};

}  // namespace shdbench::models
