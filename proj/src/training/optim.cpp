#include "shdbench/training/optim.hpp"

#include <cmath>
#include <numbers>

namespace shdbench::training {

Adam::Adam(models::ParamStore& store, const AdamConfig& cfg, const Filter& filter) : cfg_(cfg) {
    require(cfg.lr_backbone > 0.0 && cfg.lr_head > 0.0, ErrCat::config,
            "learning rates must be positive");
    require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
            ErrCat::config, "adam betas must lie in [0,1)");
    for (const auto& p : store.all()) {
        if (!p->trainable) continue;
        if (filter && !filter(*p)) continue;
        models::GroupRef ref = models::classify_param(p->name);
        bool head_side =
            ref.group == models::ParamGroup::head || ref.group == models::ParamGroup::tab;
        Slot s;
        s.p = p.get();
        s.m.setZero(p->v.rows(), p->v.cols());
        s.v.setZero(p->v.rows(), p->v.cols());
        s.base_lr = head_side ? cfg.lr_head : cfg.lr_backbone;
        slots_.push_back(std::move(s));
    }
}

double Adam::current_lr_scale() const {
    if (cfg_.cosine_steps <= 0) return 1.0;
    double frac = double(std::min(t_, cfg_.cosine_steps)) / double(cfg_.cosine_steps);
    return 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

void Adam::step() {
    const double scale = current_lr_scale();
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_ + 1));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_ + 1));
    for (auto& s : slots_) {
        s.m = (cfg_.beta1 * s.m.array() + (1.0 - cfg_.beta1) * s.p->g.array()).matrix();
        s.v = (cfg_.beta2 * s.v.array() + (1.0 - cfg_.beta2) * s.p->g.array().square()).matrix();
        s.p->v.array() -=
            (s.base_lr * scale) * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps);
    }
    ++t_;
}

}  // namespace shdbench::training
