#include "shdbench/training/supervised.hpp"

#include <algorithm>
#include <cmath>

#include "shdbench/eval/metrics.hpp"
#include "shdbench/models/transformer.hpp"

namespace shdbench::training {

namespace {

/// Numerically safe scalar logistic.
double sigmoid1(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

void TrainConfig::validate() const {
    require(lr_backbone > 0.0 && lr_head > 0.0, ErrCat::config,
            "learning rates must be positive");
    require(batch >= 1, ErrCat::config, "batch size must be >= 1");
    require(max_epochs >= 1, ErrCat::config, "epoch budget must be >= 1");
    require(patience >= 1, ErrCat::config, "patience must be >= 1");
}

double bce_mean(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& y) {
    require(logits.rows() == y.rows() && logits.cols() == y.cols(), ErrCat::alignment,
            "logit and label shapes disagree");
    // max(z,0) - z*y + log1p(exp(-|z|)): exact for z = 0, never overflows
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            const double z = logits(i, j);
            total += std::max(z, 0.0) - z * y(i, j) + std::log1p(std::exp(-std::abs(z)));
        }
    return total / double(logits.size());
}

Eigen::MatrixXd bce_grad(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& y) {
    const double inv = 1.0 / double(logits.size());
    Eigen::MatrixXd g(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
            g(i, j) = (sigmoid1(logits(i, j)) - y(i, j)) * inv;
    return g;
}

namespace {

constexpr int kEvalBatch = 64;

std::vector<Eigen::MatrixXd> snapshot_params(const models::ParamStore& store) {
    std::vector<Eigen::MatrixXd> snap;
    snap.reserve(store.all().size());
    for (const auto& p : store.all()) snap.push_back(p->v);
    return snap;
}

void restore_snapshot(models::ParamStore& store, const std::vector<Eigen::MatrixXd>& snap) {
    require(snap.size() == store.all().size(), ErrCat::internal, "snapshot size mismatch");
    for (size_t i = 0; i < snap.size(); ++i) store.all()[i]->v = snap[i];
}

Eigen::MatrixXd clamp_probs(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i)
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
            p(i, j) = std::clamp(sigmoid1(logits(i, j)), 1e-12, 1.0 - 1e-12);
    return p;
}

std::vector<int> all_indices(int n) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
    return idx;
}

/// Macro AUROC of a probability matrix against split labels; single-class
/// labels are excluded as in the metric report, and an endpoint whose AUROC
/// is undefined scores 0.5 so early stopping stays well defined.
double macro_auroc_of(const Eigen::MatrixXd& probs, const SplitTensors& split, int endpoint) {
    if (endpoint >= 0) {
        std::vector<double> scores(size_t(probs.rows()));
        std::vector<uint8_t> lab(size_t(probs.rows()));
        for (Eigen::Index i = 0; i < probs.rows(); ++i) {
            scores[size_t(i)] = probs(i, 0);
            lab[size_t(i)] = split.labels[size_t(i)].bits[size_t(endpoint)];
        }
        auto a = eval::auroc(scores, lab);
        return a ? *a : 0.5;
    }
    eval::PredictionSet pred;
    pred.probabilities = probs;
    pred.record_ids = split.record_ids;
    pred.model_id = "train-val";
    eval::MetricsReport report = eval::macro_report(pred, split.labels, 0.5);
    if (report.included_labels().empty()) return 0.5;
    return report.macro_auroc;
}

Eigen::MatrixXd pooled_embeddings(models::NeuralModel& model, const SplitTensors& split) {
    Eigen::MatrixXd out;
    auto idx = all_indices(split.n());
    for (int start = 0; start < split.n(); start += kEvalBatch) {
        int len = std::min(kEvalBatch, split.n() - start);
        std::vector<int> chunk(idx.begin() + start, idx.begin() + start + len);
        Eigen::MatrixXd e = model.pooled_embedding(make_batch(split, chunk));
        if (out.size() == 0) out.resize(split.n(), e.cols());
        out.middleRows(start, len) = e;
    }
    return out;
}

}  // namespace

Eigen::MatrixXd predict_probabilities(models::NeuralModel& model, const SplitTensors& split,
                                      int batch) {
    require(batch >= 1, ErrCat::parameter, "batch size must be >= 1");
    Eigen::MatrixXd out;
    auto idx = all_indices(split.n());
    for (int start = 0; start < split.n(); start += batch) {
        int len = std::min(batch, split.n() - start);
        std::vector<int> chunk(idx.begin() + start, idx.begin() + start + len);
        Eigen::MatrixXd z = model.forward(make_batch(split, chunk), false);
        if (out.size() == 0) out.resize(split.n(), z.cols());
        out.middleRows(start, len) = clamp_probs(z);
    }
    return out;
}

models::ParamBudget configure_model(models::NeuralModel& model,
                                    const models::AdaptationPolicy& policy, uint64_t lora_seed) {
    if (policy.lora) {
        auto* ct = dynamic_cast<models::ConvTransformer*>(&model);
        require(ct != nullptr, ErrCat::config, "adapters need a transformer backbone");
        ct->apply_lora(*policy.lora, lora_seed);
    }
    return models::apply_freezing_policy(model, policy);
}

TrainResult train_supervised(models::NeuralModel& model, const DataBundle& bundle,
                             const TrainConfig& cfg, int endpoint) {
    cfg.validate();
    require(bundle.train.n() > 0 && bundle.val.n() > 0, ErrCat::data,
            "training needs non-empty train and val splits");

    models::ParamStore& store = model.store();
    models::ParamBudget budget = models::count_trainable(store, model.n_blocks());
    require(budget.total_trainable > 0, ErrCat::config,
            "no trainable parameters under this policy; refusing to train");

    // Frozen trunk: train the head over pooled embeddings computed once.
    bool trunk_frozen = true;
    for (const auto& p : store.all()) {
        auto g = models::classify_param(p->name).group;
        if ((g == models::ParamGroup::conv || g == models::ParamGroup::block ||
             g == models::ParamGroup::lora) &&
            p->trainable)
            trunk_frozen = false;
    }
    auto* ct = dynamic_cast<models::ConvTransformer*>(&model);
    const bool fast = trunk_frozen && ct != nullptr && ct->supports_embedding_cache();

    model.seed_dropout(Rng::splitmix(cfg.seed ^ 0xD201ULL));
    Rng order(cfg.seed);

    const int n = bundle.train.n();
    const int64_t steps_per_epoch = (n + cfg.batch - 1) / cfg.batch;
    AdamConfig acfg;
    acfg.lr_backbone = cfg.lr_backbone;
    acfg.lr_head = cfg.lr_head;
    acfg.cosine_steps = steps_per_epoch * cfg.max_epochs;
    Adam adam(store, acfg);

    Eigen::MatrixXd etrain, eval_emb;
    if (fast) {
        etrain = pooled_embeddings(model, bundle.train);
        eval_emb = pooled_embeddings(model, bundle.val);
    }
    auto eval_val = [&]() {
        Eigen::MatrixXd probs;
        if (fast) {
            probs = clamp_probs(ct->forward_from_embedding(eval_emb, bundle.val.cov, false));
        } else {
            probs = predict_probabilities(model, bundle.val, kEvalBatch);
        }
        return macro_auroc_of(probs, bundle.val, endpoint);
    };

    TrainResult res;
    res.trainable_params = budget.total_trainable;
    std::vector<Eigen::MatrixXd> best = snapshot_params(store);

    auto idx = all_indices(n);
    int stale = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        order.shuffle(idx);
        double loss_sum = 0.0;
        int64_t entries = 0;
        for (int start = 0; start < n; start += cfg.batch) {
            int len = std::min(cfg.batch, n - start);
            std::vector<int> chunk(idx.begin() + start, idx.begin() + start + len);
            models::Batch b = make_batch(bundle.train, chunk, endpoint);
            Eigen::MatrixXd z;
            if (fast) {
                Eigen::MatrixXd erows(len, etrain.cols());
                for (int r = 0; r < len; ++r) erows.row(r) = etrain.row(chunk[size_t(r)]);
                z = ct->forward_from_embedding(erows, b.cov, true);
            } else {
                z = model.forward(b, true);
            }
            require(z.cols() == b.y.cols(), ErrCat::alignment,
                    "model output width does not match the label width");
            double loss = bce_mean(z, b.y);
            if (!std::isfinite(loss)) {
                restore_snapshot(store, best);
                throw Error(ErrCat::divergence,
                            "non-finite training loss at epoch " + std::to_string(epoch + 1) +
                                "; best parameters restored");
            }
            loss_sum += loss * double(z.size());
            entries += z.size();
            store.zero_grads();
            Eigen::MatrixXd dz = bce_grad(z, b.y);
            if (fast) {
                ct->backward_from_embedding(dz);
            } else {
                model.backward(dz);
            }
            adam.step();
        }
        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / double(entries);
        log.val_auroc = eval_val();
        res.log.push_back(log);
        if (log.val_auroc > res.best_val_auroc || res.best_epoch < 0) {
            res.best_val_auroc = log.val_auroc;
            res.best_epoch = epoch;
            best = snapshot_params(store);
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    restore_snapshot(store, best);
    return res;
}

uint64_t suite_endpoint_seed(uint64_t seed, int endpoint) {
    return Rng::splitmix(seed ^ (0xB1A52ULL + 0x9E3779B97F4A7C15ULL * uint64_t(endpoint + 1)));
}

std::pair<std::unique_ptr<models::NeuralModel>, TrainResult> train_suite_endpoint(
    const DataBundle& bundle, const ModelFactory& make_model,
    const models::AdaptationPolicy& policy, const TrainConfig& cfg, int endpoint) {
    require(endpoint >= 0 && endpoint < kNumTargets, ErrCat::parameter,
            "endpoint index out of range");
    const uint64_t ep_seed = suite_endpoint_seed(cfg.seed, endpoint);
    auto model = make_model(1, Rng::splitmix(ep_seed ^ 0xA11CE5ULL));
    configure_model(*model, policy, Rng::splitmix(ep_seed ^ 0x10AAULL));
    TrainConfig ecfg = cfg;
    ecfg.seed = ep_seed;
    TrainResult res = train_supervised(*model, bundle, ecfg, endpoint);
    return {std::move(model), std::move(res)};
}

BinarySuiteResult train_binary_suite(const DataBundle& bundle, const ModelFactory& make_model,
                                     const models::AdaptationPolicy& policy,
                                     const TrainConfig& cfg) {
    BinarySuiteResult out;
    out.models.reserve(kNumTargets);
    for (int j = 0; j < kNumTargets; ++j) {
        auto [model, res] = train_suite_endpoint(bundle, make_model, policy, cfg, j);
        if (j == 0) out.single_trainable = res.trainable_params;
        require(res.trainable_params == out.single_trainable, ErrCat::internal,
                "suite members disagree on the trainable budget");
        out.logs[size_t(j)] = std::move(res);
        out.models.push_back(std::move(model));
    }
    out.total_trainable = int64_t(kNumTargets) * out.single_trainable;
    return out;
}

Eigen::MatrixXd predict_binary_suite(
    const std::vector<std::unique_ptr<models::NeuralModel>>& suite, const SplitTensors& split,
    int batch) {
    require(suite.size() == size_t(kNumTargets), ErrCat::parameter,
            "a binary suite holds exactly one model per endpoint");
    Eigen::MatrixXd out(split.n(), kNumTargets);
    for (int j = 0; j < kNumTargets; ++j) {
        Eigen::MatrixXd p = predict_probabilities(*suite[size_t(j)], split, batch);
        require(p.cols() == 1, ErrCat::alignment, "suite members must be single-logit models");
        out.col(j) = p.col(0);
    }
    return out;
}

}  // namespace shdbench::training
