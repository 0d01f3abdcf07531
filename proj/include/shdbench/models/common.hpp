#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "shdbench/common.hpp"
#include "shdbench/rng.hpp"

namespace shdbench::models {

/// One named parameter tensor with its gradient accumulator. Names are the
/// contract for freezing and checkpoints: "conv.*" (front-end, positional
/// embedding, mask token), "block{i}.*", "*.lora.*" adapters, "tab.*",
/// "head.*" / "fuse.*" / "mofm.*" (always-trainable head side). An "exp{k}."
/// prefix scopes a mixture expert.
struct Param {
    std::string name;
    Eigen::MatrixXd v;
    Eigen::MatrixXd g;
    bool trainable = true;
};

class ParamStore {
  public:
    Param* add(const std::string& name, int rows, int cols) {
        for (const auto& p : params_)
            require(p->name != name, ErrCat::internal, "duplicate parameter name: " + name);
        auto p = std::make_unique<Param>();
        p->name = name;
        p->v.setZero(rows, cols);
        p->g.setZero(rows, cols);
        params_.push_back(std::move(p));
        return params_.back().get();
    }

    Param* find(const std::string& name) const {
        for (const auto& p : params_)
            if (p->name == name) return p.get();
        return nullptr;
    }

    void zero_grads() {
        for (auto& p : params_) p->g.setZero();
    }

    const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

  private:
    std::vector<std::unique_ptr<Param>> params_;
};

enum class ParamGroup { conv, block, lora, tab, head };

struct GroupRef {
    ParamGroup group = ParamGroup::conv;
    int block_index = -1;  // for ParamGroup::block
};

/// Group membership from the canonical name; unknown prefixes are an error so
/// misnamed tensors can never silently dodge a freezing policy.
GroupRef classify_param(const std::string& name);

/// Exact integer parameter counts by group. Group counts cover all tensors in
/// the group; total_trainable sums the tensors currently marked trainable
/// (policies act on whole groups, so it is always a sum of group counts).
struct ParamBudget {
    int64_t conv = 0;
    std::vector<int64_t> block;  // per transformer block index
    int64_t lora = 0;
    int64_t tab = 0;
    int64_t head = 0;
    int64_t total = 0;
    int64_t total_trainable = 0;

    int64_t block_sum() const {
        int64_t s = 0;
        for (auto b : block) s += b;
        return s;
    }
};

ParamBudget count_trainable(const ParamStore& store, int n_blocks);

/// Closed-form adapter count for rank-r LoRA on the query and value
/// projections of every block: L * 2 projections * (r*d + d*r).
int64_t lora_adapter_count(int layers, int d_model, int rank);

struct LoraConfig {
    int rank = 8;
    double alpha = -1.0;  // <= 0 means alpha = rank (unit scale)

    double scale() const { return (alpha <= 0.0 ? double(rank) : alpha) / double(rank); }
    void validate() const { require(rank >= 1, ErrCat::parameter, "lora rank must be >= 1"); }
};

/// Which parts of a backbone train: the uppermost b transformer blocks, the
/// conv front-end if flagged, adapters when present. The head always trains.
struct AdaptationPolicy {
    bool conv_trainable = true;
    int b = 0;
    std::optional<LoraConfig> lora;

    void validate(int n_blocks) const {
        require(b >= 0 && b <= n_blocks, ErrCat::parameter,
                "trainable block count b must lie in [0, L]");
        if (lora) {
            lora->validate();
            require(!conv_trainable && b == 0, ErrCat::parameter,
                    "lora requires a frozen backbone (conv frozen, b = 0)");
        }
    }
};

struct FusionConfig {
    enum class Mode { none, concat, gated, cross_attention };
    Mode mode = Mode::none;
    int d_e = 32;   // tabular embedding width
    int heads = 2;  // cross-attention heads

    void validate(int d_model) const {
        require(d_e >= 1, ErrCat::config, "tabular embedding width must be >= 1");
        if (mode == Mode::gated)
            require(d_e == d_model, ErrCat::config,
                    "gated fusion needs the tabular width to equal the model width");
        if (mode == Mode::cross_attention)
            require(d_model % heads == 0, ErrCat::config,
                    "cross-attention heads must divide the model width");
    }
};

const char* to_string(FusionConfig::Mode m);
FusionConfig::Mode fusion_mode_from_string(const std::string& s);

struct ConvStage {
    int out_channels = 0;
    int kernel = 0;
    int stride = 0;
};

struct BackboneConfig {
    enum class Family { resnet1d, conv_transformer };
    Family family = Family::conv_transformer;

    // conv_transformer
    std::vector<ConvStage> conv;  // front-end stages
    int layers = 12;              // L
    int d_model = 768;
    int heads = 12;
    int ff = 3072;

    // resnet1d
    std::array<int, 4> stage_widths = {64, 128, 256, 512};
    int embed_dim = 768;

    int head_hidden = 256;
    double dropout = 0.1;

    void validate() const;
    /// Token count after the conv front-end for a given input length.
    int token_count(int input_len = kSamples) const;

    static BackboneConfig transformer_full();
    static BackboneConfig transformer_mini();  // L=4, d=64, heads=4
    static BackboneConfig resnet_full();
    static BackboneConfig resnet_mini();
};

/// One training batch, already preprocessed and standardized.
struct Batch {
    std::vector<Eigen::MatrixXd> wave;  // each 12 x 2500
    Eigen::MatrixXd cov;                // B x 7
    Eigen::MatrixXd y;                  // B x output dim, {0,1}
};

class NeuralModel {
  public:
    virtual ~NeuralModel() = default;
    virtual Eigen::MatrixXd forward(const Batch& batch, bool train) = 0;  // B x out logits
    virtual void backward(const Eigen::MatrixXd& dlogits) = 0;
    virtual ParamStore& store() = 0;
    virtual const ParamStore& store() const = 0;
    virtual int n_blocks() const = 0;  // transformer depth; 0 for resnet
    /// Pooled waveform embedding (B x d), inference mode; the probe fast path
    /// caches these and trains the head alone.
    virtual Eigen::MatrixXd pooled_embedding(const Batch& batch) = 0;
    virtual void seed_dropout(uint64_t seed) = 0;
};

/// Marks trainable groups per the policy and returns the exact budget.
ParamBudget apply_freezing_policy(NeuralModel& model, const AdaptationPolicy& policy);

}  // namespace shdbench::models
