#pragma once

#include <vector>

#include "shdbench/data/types.hpp"
#include "shdbench/models/transformer.hpp"
#include "shdbench/training/optim.hpp"

namespace shdbench::training {

struct SslConfig {
    double p_m = 0.065;   // per-frame span start probability
    int span = 10;        // frames masked per span start
    int negatives = 100;  // distractors per masked position
    double tau = 0.1;     // contrastive temperature
    int steps = 0;
    double lr = 1e-4;
    int batch = 16;
    uint64_t seed = 0;

    void validate() const;
};

/// Marks each frame as a span start with probability p_m and extends the mask
/// over the next `span` frames, truncated at the sequence end. An interior
/// frame is covered with probability 1-(1-p_m)^span.
std::vector<uint8_t> sample_span_mask(int t_len, double p_m, int span, Rng& rng);

struct SslResult {
    std::vector<double> loss;        // mean contrastive loss per step
    bool low_mask_warning = false;   // p_m*T < 1: expected span starts below one
};

/// One evaluation of the masked-latent contrastive objective on a fixed mask:
/// each masked position's block-stack output is scored against its own
/// pre-mask conv latent versus `negatives` latents drawn (by rng) from other
/// positions of the same record, cosine similarity at temperature tau.
/// Returns the mean loss over masked positions and writes the token- and
/// latent-side gradients. Exposed for finite-difference verification.
double ssl_contrastive(const Eigen::MatrixXd& tokens, const Eigen::MatrixXd& latents,
                       const std::vector<uint8_t>& mask, int batch, int t_len,
                       const SslConfig& cfg, Rng& rng, Eigen::MatrixXd& dtokens,
                       Eigen::MatrixXd& dlatents);

/// Contrastive adaptation of the waveform trunk. Updates conv-group and
/// block-group tensors only, never the head side, and reads no labels.
/// steps = 0 returns without touching the model or the rng.
SslResult ssl_pretrain(models::TransformerTrunk& trunk, models::ParamStore& store,
                       const std::vector<data::WaveformF>& waves, const SslConfig& cfg);

}  // namespace shdbench::training
