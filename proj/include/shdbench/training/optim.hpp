#pragma once

#include <functional>
#include <vector>

#include "shdbench/models/common.hpp"

namespace shdbench::training {

struct AdamConfig {
    double lr_backbone = 1e-4;
    double lr_head = 1e-3;  // head, fuse, mofm and tab tensors
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t cosine_steps = 0;  // 0 keeps the rates constant
};

/// Adam over the trainable subset of a store, with separate backbone and head
/// rates and an optional cosine decay to zero over cosine_steps. The slot set
/// is fixed at construction; freezing flags must not change afterwards.
class Adam {
  public:
    using Filter = std::function<bool(const models::Param&)>;

    Adam(models::ParamStore& store, const AdamConfig& cfg, const Filter& filter = nullptr);

    void step();
    int64_t steps_taken() const { return t_; }
    /// Cosine factor the next step() will apply.
    double current_lr_scale() const;
    size_t slot_count() const { return slots_.size(); }

  private:
    struct Slot {
        models::Param* p;
        Eigen::MatrixXd m;
        Eigen::MatrixXd v;
        double base_lr;
    };
    AdamConfig cfg_;
    std::vector<Slot> slots_;
    int64_t t_ = 0;
};

}  // namespace shdbench::training
