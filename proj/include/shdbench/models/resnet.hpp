#pragma once

#include <optional>

#include "shdbench/models/layers.hpp"

namespace shdbench::models {

/// 1-D residual network over the raw 12-lead waveform: stem conv (stride 2),
/// max pool, four stages of two basic blocks with stride-2 downsampling and a
/// 1x1 projection at each width increase, global average pool, then a linear
/// embedding and an MLP head. Waveform-only; the whole trunk is one freezing
/// group and has no transformer blocks.
class ResNet1D : public NeuralModel {
  public:
    ResNet1D(const BackboneConfig& cfg, int out_dim, uint64_t init_seed);

    Eigen::MatrixXd forward(const Batch& batch, bool train) override;
    void backward(const Eigen::MatrixXd& dlogits) override;
    ParamStore& store() override { return store_; }
    const ParamStore& store() const override { return store_; }
    int n_blocks() const override { return 0; }
    Eigen::MatrixXd pooled_embedding(const Batch& batch) override;
    void seed_dropout(uint64_t seed) override { drop_rng_ = Rng(seed); }

    const BackboneConfig& config() const { return cfg_; }
    int out_dim() const { return out_dim_; }

  private:
    struct ResBlock {
        Conv1d c1, c2;
        ChannelNorm n1, n2;
        Relu a1, a2;
        std::optional<Conv1d> proj;

        void init(ParamStore& s, const std::string& prefix, int cin, int cout, int stride,
                  Rng& rng);
        ChannelMap forward(const ChannelMap& x);
        ChannelMap backward(const ChannelMap& dy);
    };

    Eigen::MatrixXd trunk_forward(const std::vector<Eigen::MatrixXd>& waves);
    void trunk_backward(const Eigen::MatrixXd& dembed);

    BackboneConfig cfg_;
    int out_dim_;
    ParamStore store_;
    Conv1d stem_;
    ChannelNorm stem_norm_;
    Relu stem_act_;
    MaxPool1d pool_{3, 2, 1};
    std::vector<ResBlock> blocks_;
    Linear embed_;
    HeadMlp head_;
    Rng drop_rng_{0};
    int batch_ = 0;
    int gap_len_ = 0;
};

}  // namespace shdbench::models
