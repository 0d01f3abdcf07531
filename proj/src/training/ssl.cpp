#include "shdbench/training/ssl.hpp"

#include <cmath>

namespace shdbench::training {

void SslConfig::validate() const {
    require(p_m > 0.0 && p_m < 1.0, ErrCat::config, "mask start probability must lie in (0,1)");
    require(span >= 1, ErrCat::config, "span length must be >= 1");
    require(negatives >= 1, ErrCat::config, "negative count must be >= 1");
    require(tau > 0.0, ErrCat::config, "temperature must be positive");
    require(steps >= 0, ErrCat::config, "step count must be >= 0");
    require(lr > 0.0, ErrCat::config, "learning rate must be positive");
    require(batch >= 1, ErrCat::config, "batch size must be >= 1");
}

std::vector<uint8_t> sample_span_mask(int t_len, double p_m, int span, Rng& rng) {
    std::vector<uint8_t> mask(size_t(t_len), 0);
    for (int t = 0; t < t_len; ++t) {
        if (!rng.bernoulli(p_m)) continue;
        int end = std::min(t_len, t + span);
        for (int u = t; u < end; ++u) mask[size_t(u)] = 1;
    }
    return mask;
}

double ssl_contrastive(const Eigen::MatrixXd& tokens, const Eigen::MatrixXd& latents,
                       const std::vector<uint8_t>& mask, int batch, int t_len,
                       const SslConfig& cfg, Rng& rng, Eigen::MatrixXd& dtokens,
                       Eigen::MatrixXd& dlatents) {
    require(tokens.rows() == Eigen::Index(batch) * t_len && tokens.rows() == latents.rows(),
            ErrCat::alignment, "token and latent row counts disagree");
    require(mask.size() == size_t(tokens.rows()), ErrCat::alignment,
            "mask length does not match token rows");
    const int d = int(tokens.cols());
    const int k = cfg.negatives;
    dtokens.setZero(tokens.rows(), d);
    dlatents.setZero(latents.rows(), d);

    Eigen::VectorXd lat_norm = latents.rowwise().norm().cwiseMax(1e-12);
    Eigen::MatrixXd lat_hat = (latents.array().colwise() / lat_norm.array()).matrix();

    std::vector<int> cand(size_t(k) + 1);
    Eigen::VectorXd s(k + 1), p(k + 1);
    double total = 0.0;
    int n_masked = 0;
    for (int rec = 0; rec < batch; ++rec) {
        for (int t = 0; t < t_len; ++t) {
            const int row = rec * t_len + t;
            if (!mask[size_t(row)]) continue;
            ++n_masked;
            cand[0] = row;
            for (int j = 1; j <= k; ++j) {
                // uniform over the other t_len-1 positions of this record
                int o = int(rng.uniform_int(0, t_len - 2));
                if (o >= t) ++o;
                cand[size_t(j)] = rec * t_len + o;
            }
            const Eigen::RowVectorXd c = tokens.row(row);
            const double cn = std::max(c.norm(), 1e-12);
            const Eigen::RowVectorXd chat = c / cn;
            for (int j = 0; j <= k; ++j) s(j) = chat.dot(lat_hat.row(cand[size_t(j)])) / cfg.tau;
            const double mx = s.maxCoeff();
            p = (s.array() - mx).exp().matrix();
            const double z = p.sum();
            p /= z;
            total += -(s(0) - mx - std::log(z));
            Eigen::RowVectorXd dc = Eigen::RowVectorXd::Zero(d);
            for (int j = 0; j <= k; ++j) {
                const double ds = p(j) - (j == 0 ? 1.0 : 0.0);
                const double cosv = s(j) * cfg.tau;
                const auto zhat = lat_hat.row(cand[size_t(j)]);
                dc += (ds / cfg.tau) * (zhat - cosv * chat);
                dlatents.row(cand[size_t(j)]) +=
                    (ds / (cfg.tau * lat_norm(cand[size_t(j)]))) * (chat - cosv * zhat);
            }
            dtokens.row(row) += dc / cn;
        }
    }
    require(n_masked > 0, ErrCat::internal, "contrastive objective saw an empty mask");
    const double inv_m = 1.0 / double(n_masked);
    dtokens *= inv_m;
    dlatents *= inv_m;
    return total * inv_m;
}

SslResult ssl_pretrain(models::TransformerTrunk& trunk, models::ParamStore& store,
                       const std::vector<data::WaveformF>& waves, const SslConfig& cfg) {
    cfg.validate();
    SslResult res;
    if (cfg.steps == 0) return res;  // bit-identical no-op
    require(!waves.empty(), ErrCat::parameter, "no waveforms to adapt on");

    const int t_len = trunk.token_len();
    res.low_mask_warning = cfg.p_m * double(t_len) < 1.0;

    AdamConfig acfg;
    acfg.lr_backbone = cfg.lr;
    acfg.lr_head = cfg.lr;
    Adam adam(store, acfg, [](const models::Param& p) {
        auto g = models::classify_param(p.name).group;
        return g == models::ParamGroup::conv || g == models::ParamGroup::block;
    });

    Rng rng(cfg.seed);
    const int n = int(waves.size());
    std::vector<Eigen::MatrixXd> bw(size_t(cfg.batch));
    std::vector<uint8_t> mask;
    Eigen::MatrixXd dtok, dlat;
    for (int step = 0; step < cfg.steps; ++step) {
        for (int b = 0; b < cfg.batch; ++b)
            bw[size_t(b)] = waves[size_t(rng.uniform_int(0, n - 1))].cast<double>();
        int total_masked = 0;
        do {
            mask.assign(size_t(cfg.batch) * size_t(t_len), 0);
            total_masked = 0;
            for (int b = 0; b < cfg.batch; ++b) {
                auto m = sample_span_mask(t_len, cfg.p_m, cfg.span, rng);
                for (int t = 0; t < t_len; ++t) {
                    mask[size_t(b * t_len + t)] = m[size_t(t)];
                    total_masked += m[size_t(t)];
                }
            }
        } while (total_masked == 0);  // p_m > 0 terminates this with probability 1

        store.zero_grads();
        Eigen::MatrixXd tokens = trunk.forward(bw, &mask);
        double loss = ssl_contrastive(tokens, trunk.conv_latents(), mask, cfg.batch, t_len, cfg,
                                      rng, dtok, dlat);
        trunk.backward(dtok, &dlat);
        adam.step();
        res.loss.push_back(loss);
    }
    return res;
}

}  // namespace shdbench::training
