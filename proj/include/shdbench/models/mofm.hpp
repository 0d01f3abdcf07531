#pragma once

#include "shdbench/models/transformer.hpp"

namespace shdbench::models {

struct MoFMConfig {
    enum class Fusion { concat, gated, logit_moe };
    Fusion fusion = Fusion::concat;
    int d_c = 768;  // common projection width for concat / gated mixing

    void validate() const { require(d_c >= 1, ErrCat::config, "common width must be >= 1"); }
};

const char* to_string(MoFMConfig::Fusion f);
MoFMConfig::Fusion mofm_fusion_from_string(const std::string& s);

/// Composes two or more frozen-or-adapted waveform experts. Expert k's
/// parameters carry the "exp{k}." prefix so freezing applies per expert.
/// concat: project each pooled embedding to d_c, concatenate, shared head.
/// gated: softmax gate over experts mixes the projected embeddings.
/// logit_moe: per-expert heads; the gate mixes their logit vectors.
class MoFM : public NeuralModel {
  public:
    MoFM(const std::vector<BackboneConfig>& expert_cfgs, const MoFMConfig& mcfg, int out_dim,
         uint64_t init_seed);

    Eigen::MatrixXd forward(const Batch& batch, bool train) override;
    void backward(const Eigen::MatrixXd& dlogits) override;
    ParamStore& store() override { return store_; }
    const ParamStore& store() const override { return store_; }
    int n_blocks() const override { return experts_.empty() ? 0 : experts_[0].depth(); }
    Eigen::MatrixXd pooled_embedding(const Batch& batch) override;  // concatenated embeddings
    void seed_dropout(uint64_t seed) override { drop_rng_ = Rng(seed); }

    int n_experts() const { return int(experts_.size()); }
    const MoFMConfig& config() const { return mcfg_; }

    /// Freezing for one expert's backbone; head-side tensors stay trainable.
    void apply_expert_policy(int k, const AdaptationPolicy& policy);
    void apply_expert_lora(int k, const LoraConfig& lc, uint64_t seed);

    /// Test hook: overrides the gate with one fixed distribution for every
    /// record. The simplex check still applies.
    std::optional<Eigen::RowVectorXd> force_gate;

  private:
    Eigen::MatrixXd gate_values(const Eigen::MatrixXd& concat_emb);

    MoFMConfig mcfg_;
    int out_dim_;
    ParamStore store_;
    std::vector<TransformerTrunk> experts_;
    std::vector<Linear> proj_;       // concat / gated
    std::optional<Linear> gate_;     // gated / logit_moe
    std::vector<HeadMlp> expert_heads_;  // logit_moe
    std::optional<HeadMlp> head_;        // concat / gated
    Rng drop_rng_{0};
    // caches
    int batch_ = 0;
    std::vector<Eigen::MatrixXd> h_;     // pooled embedding per expert
    std::vector<Eigen::MatrixXd> pk_;    // projected embedding per expert
    std::vector<Eigen::MatrixXd> zk_;    // per-expert logits (logit_moe)
    Eigen::MatrixXd gates_;              // B x K
    bool gate_forced_ = false;
};

}  // namespace shdbench::models
