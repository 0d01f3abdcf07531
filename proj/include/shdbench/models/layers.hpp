#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "shdbench/models/common.hpp"
#include "shdbench/rng.hpp"

namespace shdbench::models {

/// All layers run in 64-bit floats. Forward caches what backward needs;
/// backward accumulates parameter gradients and returns the input gradient.
/// Token activations are row-per-token matrices X in R^{(B*T) x d} so the
/// heavy lifting stays in a few large GEMMs per layer.

void init_glorot(Eigen::MatrixXd& w, Rng& rng);
void init_normal(Eigen::MatrixXd& w, double stddev, Rng& rng);

class Linear {
  public:
    void init(ParamStore& s, const std::string& prefix, int in, int out, Rng& rng);
    /// Adds a rank-r low-rank bypass y += scale * (x A^T) B^T with B zero so
    /// the adapted map initially equals the frozen one.
    void enable_lora(ParamStore& s, const std::string& prefix, int rank, double scale, Rng& rng);
    bool has_lora() const { return la_ != nullptr; }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

    Param* W = nullptr;  // out x in
    Param* b = nullptr;  // out x 1

  private:
    Param* la_ = nullptr;  // rank x in
    Param* lb_ = nullptr;  // out x rank
    double lscale_ = 0.0;
    Eigen::MatrixXd x_, xa_;
};

class LayerNorm {
  public:
    void init(ParamStore& s, const std::string& prefix, int dim);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

    Param* gamma = nullptr;
    Param* beta = nullptr;

  private:
    Eigen::MatrixXd xhat_;
    Eigen::VectorXd inv_std_;
};

class Gelu {
  public:
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

  private:
    Eigen::MatrixXd x_;
};

class Dropout {
  public:
    explicit Dropout(double p = 0.0) : p_(p) {}
    void set_rate(double p) { p_ = p; }
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train, Rng& rng);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

  private:
    double p_;
    bool active_ = false;
    Eigen::MatrixXd mask_;
};

/// Multi-channel sequence activation: a is C x (batch*len) with record r
/// occupying the column block [r*len, (r+1)*len).
struct ChannelMap {
    Eigen::MatrixXd a;
    int batch = 0;
    int len = 0;
};

/// Stacks equally shaped lead-by-sample records into one channel map.
ChannelMap stack_waveforms(const std::vector<Eigen::MatrixXd>& waves);

class Conv1d {
  public:
    void init(ParamStore& s, const std::string& prefix, int cin, int cout, int kernel, int stride,
              Rng& rng);
    int out_len(int in_len) const;
    ChannelMap forward(const ChannelMap& x);
    ChannelMap backward(const ChannelMap& dy);

    Param* W = nullptr;  // cout x (cin*kernel)
    Param* b = nullptr;  // cout x 1
    bool input_grad = true;  // stems feeding raw data skip the scatter pass

  private:
    int cin_ = 0, cout_ = 0, k_ = 0, stride_ = 0, pad_ = 0;
    int in_len_ = 0, batch_ = 0;
    Eigen::MatrixXd col_;  // (cin*k) x (batch*out_len)
};

class MaxPool1d {
  public:
    MaxPool1d(int kernel, int stride, int pad) : k_(kernel), stride_(stride), pad_(pad) {}
    ChannelMap forward(const ChannelMap& x);
    ChannelMap backward(const ChannelMap& dy);

  private:
    int k_, stride_, pad_;
    int in_len_ = 0, batch_ = 0, channels_ = 0;
    Eigen::MatrixXi argmax_;
};

class Relu {
  public:
    ChannelMap forward(const ChannelMap& x);
    ChannelMap backward(const ChannelMap& dy);

  private:
    Eigen::MatrixXd x_;
};

/// Normalizes each (record, channel) row over time, then applies a per-channel
/// affine. Batch-independent, so eval equals train and records never interact.
class ChannelNorm {
  public:
    void init(ParamStore& s, const std::string& prefix, int channels);
    ChannelMap forward(const ChannelMap& x);
    ChannelMap backward(const ChannelMap& dy);

    Param* gamma = nullptr;
    Param* beta = nullptr;

  private:
    Eigen::MatrixXd xhat_;
    Eigen::MatrixXd inv_std_;  // C x batch
};

class MultiHeadAttention {
  public:
    void init(ParamStore& s, const std::string& prefix, int d_model, int heads, Rng& rng);
    void enable_lora(ParamStore& s, const std::string& prefix, int rank, double scale, Rng& rng);
    bool has_lora() const { return q_.has_lora(); }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int batch, int tokens);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

  private:
    Linear q_, k_, v_, o_;
    int d_ = 0, heads_ = 0, dh_ = 0;
    int batch_ = 0, tokens_ = 0;
    Eigen::MatrixXd qm_, km_, vm_;
    std::vector<Eigen::MatrixXd> probs_;  // softmax per (record, head)
};

/// Two-layer MLP head with dropout on the hidden activation.
class HeadMlp {
  public:
    void init(ParamStore& s, const std::string& prefix, int in, int hidden, int out, double dropout,
              Rng& rng);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, bool train, Rng& rng);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

  private:
    Linear l1_, l2_;
    Gelu act_;
    Dropout drop_;
};

class TransformerBlock {
  public:
    void init(ParamStore& s, const std::string& prefix, int d_model, int heads, int ff, Rng& rng);
    void enable_lora(ParamStore& s, const std::string& prefix, int rank, double scale, Rng& rng);
    bool has_lora() const { return attn_.has_lora(); }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int batch, int tokens);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& dy);

  private:
    LayerNorm ln1_, ln2_;
    MultiHeadAttention attn_;
    Linear fc1_, fc2_;
    Gelu act_;
};

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z);

}  // namespace shdbench::models
