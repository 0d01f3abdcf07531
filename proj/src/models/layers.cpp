#include "shdbench/models/layers.hpp"

#include <cmath>
#include <numbers>

namespace shdbench::models {

namespace {
constexpr double kNormEps = 1e-5;
}

ChannelMap stack_waveforms(const std::vector<Eigen::MatrixXd>& waves) {
    require(!waves.empty(), ErrCat::parameter, "empty batch");
    int c = int(waves[0].rows());
    int len = int(waves[0].cols());
    ChannelMap m;
    m.batch = int(waves.size());
    m.len = len;
    m.a.resize(c, Eigen::Index(waves.size()) * len);
    for (size_t r = 0; r < waves.size(); ++r) {
        require(int(waves[r].rows()) == c && int(waves[r].cols()) == len, ErrCat::alignment,
                "ragged waveform batch");
        m.a.middleCols(Eigen::Index(r) * len, len) = waves[r];
    }
    return m;
}

void init_glorot(Eigen::MatrixXd& w, Rng& rng) {
    double limit = std::sqrt(6.0 / double(w.rows() + w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-limit, limit);
}

void init_normal(Eigen::MatrixXd& w, double stddev, Rng& rng) {
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = stddev * rng.normal();
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
    });
}

// ---------------------------------------------------------------------------
// Linear

void Linear::init(ParamStore& s, const std::string& prefix, int in, int out, Rng& rng) {
    W = s.add(prefix + "W", out, in);
    b = s.add(prefix + "b", out, 1);
    init_glorot(W->v, rng);
}

void Linear::enable_lora(ParamStore& s, const std::string& prefix, int rank, double scale,
                         Rng& rng) {
    require(la_ == nullptr, ErrCat::config, "backbone already adapted: " + prefix);
    la_ = s.add(prefix + "A", rank, int(W->v.cols()));
    lb_ = s.add(prefix + "B", int(W->v.rows()), rank);
    init_normal(la_->v, 0.02, rng);  // B stays zero so the adapted map starts identical
    lscale_ = scale;
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& x) {
    x_ = x;
    Eigen::MatrixXd y = x * W->v.transpose();
    y.rowwise() += b->v.col(0).transpose();
    if (la_ != nullptr) {
        xa_ = x * la_->v.transpose();
        y.noalias() += lscale_ * (xa_ * lb_->v.transpose());
    }
    return y;
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& dy) {
    if (W->trainable) W->g.noalias() += dy.transpose() * x_;
    if (b->trainable) b->g.col(0) += dy.colwise().sum().transpose();
    Eigen::MatrixXd dx = dy * W->v;
    if (la_ != nullptr) {
        if (lb_->trainable) lb_->g.noalias() += lscale_ * (dy.transpose() * xa_);
        Eigen::MatrixXd dxa = lscale_ * (dy * lb_->v);
        if (la_->trainable) la_->g.noalias() += dxa.transpose() * x_;
        dx.noalias() += dxa * la_->v;
    }
    return dx;
}

// ---------------------------------------------------------------------------
// LayerNorm

void LayerNorm::init(ParamStore& s, const std::string& prefix, int dim) {
    gamma = s.add(prefix + "gamma", dim, 1);
    beta = s.add(prefix + "beta", dim, 1);
    gamma->v.setOnes();
}

Eigen::MatrixXd LayerNorm::forward(const Eigen::MatrixXd& x) {
    Eigen::Index n = x.rows(), d = x.cols();
    xhat_.resize(n, d);
    inv_std_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mu = x.row(i).mean();
        double var = (x.row(i).array() - mu).square().mean();
        double is = 1.0 / std::sqrt(var + kNormEps);
        inv_std_(i) = is;
        xhat_.row(i) = (x.row(i).array() - mu) * is;
    }
    Eigen::MatrixXd y = xhat_.array().rowwise() * gamma->v.col(0).transpose().array();
    y.array().rowwise() += beta->v.col(0).transpose().array();
    return y;
}

Eigen::MatrixXd LayerNorm::backward(const Eigen::MatrixXd& dy) {
    if (gamma->trainable) gamma->g.col(0) += (dy.array() * xhat_.array()).colwise().sum().matrix().transpose();
    if (beta->trainable) beta->g.col(0) += dy.colwise().sum().transpose();
    Eigen::MatrixXd dxh = dy.array().rowwise() * gamma->v.col(0).transpose().array();
    Eigen::MatrixXd dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        double m1 = dxh.row(i).mean();
        double m2 = (dxh.row(i).array() * xhat_.row(i).array()).mean();
        dx.row(i) = ((dxh.row(i).array() - m1) - xhat_.row(i).array() * m2) * inv_std_(i);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Gelu

Eigen::MatrixXd Gelu::forward(const Eigen::MatrixXd& x) {
    x_ = x;
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
}

Eigen::MatrixXd Gelu::backward(const Eigen::MatrixXd& dy) {
    Eigen::MatrixXd d = x_.unaryExpr([](double v) {
        double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
        double pdf = std::exp(-0.5 * v * v) * std::numbers::inv_sqrtpi * M_SQRT1_2;
        return cdf + v * pdf;
    });
    return dy.array() * d.array();
}

// ---------------------------------------------------------------------------
// Dropout

Eigen::MatrixXd Dropout::forward(const Eigen::MatrixXd& x, bool train, Rng& rng) {
    active_ = train && p_ > 0.0;
    if (!active_) return x;
    double keep = 1.0 - p_;
    mask_.resize(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            mask_(i, j) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return x.array() * mask_.array();
}

Eigen::MatrixXd Dropout::backward(const Eigen::MatrixXd& dy) {
    if (!active_) return dy;
    return dy.array() * mask_.array();
}

// ---------------------------------------------------------------------------
// Conv1d

void Conv1d::init(ParamStore& s, const std::string& prefix, int cin, int cout, int kernel,
                  int stride, Rng& rng) {
    cin_ = cin;
    cout_ = cout;
    k_ = kernel;
    stride_ = stride;
    pad_ = kernel / 2;
    W = s.add(prefix + "W", cout, cin * kernel);
    b = s.add(prefix + "b", cout, 1);
    init_glorot(W->v, rng);
}

int Conv1d::out_len(int in_len) const { return (in_len + 2 * pad_ - k_) / stride_ + 1; }

ChannelMap Conv1d::forward(const ChannelMap& x) {
    batch_ = x.batch;
    in_len_ = x.len;
    int to = out_len(x.len);
    col_.setZero(cin_ * k_, Eigen::Index(x.batch) * to);
    for (int r = 0; r < x.batch; ++r) {
        for (int t = 0; t < to; ++t) {
            Eigen::Index dst = Eigen::Index(r) * to + t;
            int base = t * stride_ - pad_;
            for (int j = 0; j < k_; ++j) {
                int pos = base + j;
                if (pos < 0 || pos >= x.len) continue;
                Eigen::Index src = Eigen::Index(r) * x.len + pos;
                for (int c = 0; c < cin_; ++c) col_(Eigen::Index(c) * k_ + j, dst) = x.a(c, src);
            }
        }
    }
    ChannelMap y;
    y.batch = x.batch;
    y.len = to;
    y.a.noalias() = W->v * col_;
    y.a.colwise() += b->v.col(0);
    return y;
}

ChannelMap Conv1d::backward(const ChannelMap& dy) {
    if (W->trainable) W->g.noalias() += dy.a * col_.transpose();
    if (b->trainable) b->g.col(0) += dy.a.rowwise().sum();
    ChannelMap dx;
    dx.batch = batch_;
    dx.len = in_len_;
    dx.a.setZero(cin_, Eigen::Index(batch_) * in_len_);
    if (!input_grad) return dx;
    Eigen::MatrixXd dcol = W->v.transpose() * dy.a;
    int to = dy.len;
    for (int r = 0; r < batch_; ++r) {
        for (int t = 0; t < to; ++t) {
            Eigen::Index src = Eigen::Index(r) * to + t;
            int base = t * stride_ - pad_;
            for (int j = 0; j < k_; ++j) {
                int pos = base + j;
                if (pos < 0 || pos >= in_len_) continue;
                Eigen::Index dst = Eigen::Index(r) * in_len_ + pos;
                for (int c = 0; c < cin_; ++c) dx.a(c, dst) += dcol(Eigen::Index(c) * k_ + j, src);
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// MaxPool1d

ChannelMap MaxPool1d::forward(const ChannelMap& x) {
    batch_ = x.batch;
    in_len_ = x.len;
    channels_ = int(x.a.rows());
    int to = (x.len + 2 * pad_ - k_) / stride_ + 1;
    ChannelMap y;
    y.batch = x.batch;
    y.len = to;
    y.a.resize(channels_, Eigen::Index(x.batch) * to);
    argmax_.resize(channels_, Eigen::Index(x.batch) * to);
    for (int r = 0; r < x.batch; ++r) {
        for (int t = 0; t < to; ++t) {
            Eigen::Index dst = Eigen::Index(r) * to + t;
            int lo = std::max(0, t * stride_ - pad_);
            int hi = std::min(x.len, t * stride_ - pad_ + k_);
            for (int c = 0; c < channels_; ++c) {
                double best = -std::numeric_limits<double>::infinity();
                int arg = lo;
                for (int pos = lo; pos < hi; ++pos) {
                    double v = x.a(c, Eigen::Index(r) * x.len + pos);
                    if (v > best) {
                        best = v;
                        arg = pos;
                    }
                }
                y.a(c, dst) = best;
                argmax_(c, dst) = arg;
            }
        }
    }
    return y;
}

ChannelMap MaxPool1d::backward(const ChannelMap& dy) {
    ChannelMap dx;
    dx.batch = batch_;
    dx.len = in_len_;
    dx.a.setZero(channels_, Eigen::Index(batch_) * in_len_);
    for (int r = 0; r < batch_; ++r)
        for (int t = 0; t < dy.len; ++t) {
            Eigen::Index src = Eigen::Index(r) * dy.len + t;
            for (int c = 0; c < channels_; ++c)
                dx.a(c, Eigen::Index(r) * in_len_ + argmax_(c, src)) += dy.a(c, src);
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Relu

ChannelMap Relu::forward(const ChannelMap& x) {
    x_ = x.a;
    ChannelMap y = x;
    y.a = x.a.cwiseMax(0.0);
    return y;
}

ChannelMap Relu::backward(const ChannelMap& dy) {
    ChannelMap dx = dy;
    dx.a = (x_.array() > 0.0).select(dy.a, 0.0);
    return dx;
}

// ---------------------------------------------------------------------------
// ChannelNorm

void ChannelNorm::init(ParamStore& s, const std::string& prefix, int channels) {
    gamma = s.add(prefix + "gamma", channels, 1);
    beta = s.add(prefix + "beta", channels, 1);
    gamma->v.setOnes();
}

ChannelMap ChannelNorm::forward(const ChannelMap& x) {
    int c_n = int(x.a.rows());
    xhat_.resize(c_n, x.a.cols());
    inv_std_.resize(c_n, x.batch);
    for (int r = 0; r < x.batch; ++r) {
        auto blk = x.a.middleCols(Eigen::Index(r) * x.len, x.len);
        auto xb = xhat_.middleCols(Eigen::Index(r) * x.len, x.len);
        for (int c = 0; c < c_n; ++c) {
            double mu = blk.row(c).mean();
            double var = (blk.row(c).array() - mu).square().mean();
            double is = 1.0 / std::sqrt(var + kNormEps);
            inv_std_(c, r) = is;
            xb.row(c) = (blk.row(c).array() - mu) * is;
        }
    }
    ChannelMap y;
    y.batch = x.batch;
    y.len = x.len;
    y.a = xhat_.array().colwise() * gamma->v.col(0).array();
    y.a.array().colwise() += beta->v.col(0).array();
    return y;
}

ChannelMap ChannelNorm::backward(const ChannelMap& dy) {
    if (gamma->trainable) gamma->g.col(0) += (dy.a.array() * xhat_.array()).rowwise().sum().matrix();
    if (beta->trainable) beta->g.col(0) += dy.a.rowwise().sum();
    Eigen::MatrixXd dxh = dy.a.array().colwise() * gamma->v.col(0).array();
    ChannelMap dx;
    dx.batch = dy.batch;
    dx.len = dy.len;
    dx.a.resize(dy.a.rows(), dy.a.cols());
    for (int r = 0; r < dy.batch; ++r) {
        auto dh = dxh.middleCols(Eigen::Index(r) * dy.len, dy.len);
        auto xb = xhat_.middleCols(Eigen::Index(r) * dy.len, dy.len);
        auto out = dx.a.middleCols(Eigen::Index(r) * dy.len, dy.len);
        for (Eigen::Index c = 0; c < dy.a.rows(); ++c) {
            double m1 = dh.row(c).mean();
            double m2 = (dh.row(c).array() * xb.row(c).array()).mean();
            out.row(c) = ((dh.row(c).array() - m1) - xb.row(c).array() * m2) * inv_std_(c, r);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// MultiHeadAttention

void MultiHeadAttention::init(ParamStore& s, const std::string& prefix, int d_model, int heads,
                              Rng& rng) {
    d_ = d_model;
    heads_ = heads;
    dh_ = d_model / heads;
    q_.init(s, prefix + "q.", d_model, d_model, rng);
    k_.init(s, prefix + "k.", d_model, d_model, rng);
    v_.init(s, prefix + "v.", d_model, d_model, rng);
    o_.init(s, prefix + "o.", d_model, d_model, rng);
}

void MultiHeadAttention::enable_lora(ParamStore& s, const std::string& prefix, int rank,
                                     double scale, Rng& rng) {
    q_.enable_lora(s, prefix + "q.lora.", rank, scale, rng);
    v_.enable_lora(s, prefix + "v.lora.", rank, scale, rng);
}

Eigen::MatrixXd MultiHeadAttention::forward(const Eigen::MatrixXd& x, int batch, int tokens) {
    batch_ = batch;
    tokens_ = tokens;
    qm_ = q_.forward(x);
    km_ = k_.forward(x);
    vm_ = v_.forward(x);
    probs_.assign(size_t(batch) * heads_, Eigen::MatrixXd());
    Eigen::MatrixXd ctx(x.rows(), d_);
    double scale = 1.0 / std::sqrt(double(dh_));
    for (int r = 0; r < batch; ++r) {
        Eigen::Index row0 = Eigen::Index(r) * tokens;
        for (int h = 0; h < heads_; ++h) {
            auto qb = qm_.block(row0, Eigen::Index(h) * dh_, tokens, dh_);
            auto kb = km_.block(row0, Eigen::Index(h) * dh_, tokens, dh_);
            auto vb = vm_.block(row0, Eigen::Index(h) * dh_, tokens, dh_);
            Eigen::MatrixXd sc = (qb * kb.transpose()) * scale;
            for (Eigen::Index i = 0; i < sc.rows(); ++i) {
                double mx = sc.row(i).maxCoeff();
                sc.row(i) = (sc.row(i).array() - mx).exp();
                sc.row(i) /= sc.row(i).sum();
            }
            probs_[size_t(r) * heads_ + h] = sc;
            ctx.block(row0, Eigen::Index(h) * dh_, tokens, dh_).noalias() = sc * vb;
        }
    }
    return o_.forward(ctx);
}

Eigen::MatrixXd MultiHeadAttention::backward(const Eigen::MatrixXd& dy) {
    Eigen::MatrixXd dctx = o_.backward(dy);
    Eigen::MatrixXd dq(dy.rows(), d_), dk(dy.rows(), d_), dv(dy.rows(), d_);
    double scale = 1.0 / std::sqrt(double(dh_));
    for (int r = 0; r < batch_; ++r) {
        Eigen::Index row0 = Eigen::Index(r) * tokens_;
        for (int h = 0; h < heads_; ++h) {
            const Eigen::MatrixXd& p = probs_[size_t(r) * heads_ + h];
            auto qb = qm_.block(row0, Eigen::Index(h) * dh_, tokens_, dh_);
            auto kb = km_.block(row0, Eigen::Index(h) * dh_, tokens_, dh_);
            auto vb = vm_.block(row0, Eigen::Index(h) * dh_, tokens_, dh_);
            auto dc = dctx.block(row0, Eigen::Index(h) * dh_, tokens_, dh_);
            Eigen::MatrixXd dp = dc * vb.transpose();
            dv.block(row0, Eigen::Index(h) * dh_, tokens_, dh_).noalias() = p.transpose() * dc;
            Eigen::VectorXd rowdot = (dp.array() * p.array()).rowwise().sum();
            Eigen::MatrixXd ds = p.array() * (dp.colwise() - rowdot).array();
            dq.block(row0, Eigen::Index(h) * dh_, tokens_, dh_).noalias() = ds * kb * scale;
            dk.block(row0, Eigen::Index(h) * dh_, tokens_, dh_).noalias() =
                ds.transpose() * qb * scale;
        }
    }
    Eigen::MatrixXd dx = q_.backward(dq);
    dx += k_.backward(dk);
    dx += v_.backward(dv);
    return dx;
}

// ---------------------------------------------------------------------------
// HeadMlp

void HeadMlp::init(ParamStore& s, const std::string& prefix, int in, int hidden, int out,
                   double dropout, Rng& rng) {
    l1_.init(s, prefix + "l1.", in, hidden, rng);
    l2_.init(s, prefix + "l2.", hidden, out, rng);
    drop_.set_rate(dropout);
}

Eigen::MatrixXd HeadMlp::forward(const Eigen::MatrixXd& x, bool train, Rng& rng) {
    return l2_.forward(drop_.forward(act_.forward(l1_.forward(x)), train, rng));
}

Eigen::MatrixXd HeadMlp::backward(const Eigen::MatrixXd& dy) {
    return l1_.backward(act_.backward(drop_.backward(l2_.backward(dy))));
}

// ---------------------------------------------------------------------------
// TransformerBlock

void TransformerBlock::init(ParamStore& s, const std::string& prefix, int d_model, int heads,
                            int ff, Rng& rng) {
    ln1_.init(s, prefix + "ln1.", d_model);
    attn_.init(s, prefix + "attn.", d_model, heads, rng);
    ln2_.init(s, prefix + "ln2.", d_model);
    fc1_.init(s, prefix + "mlp.fc1.", d_model, ff, rng);
    fc2_.init(s, prefix + "mlp.fc2.", ff, d_model, rng);
}

void TransformerBlock::enable_lora(ParamStore& s, const std::string& prefix, int rank,
                                   double scale, Rng& rng) {
    attn_.enable_lora(s, prefix + "attn.", rank, scale, rng);
}

Eigen::MatrixXd TransformerBlock::forward(const Eigen::MatrixXd& x, int batch, int tokens) {
    Eigen::MatrixXd h = x + attn_.forward(ln1_.forward(x), batch, tokens);
    return h + fc2_.forward(act_.forward(fc1_.forward(ln2_.forward(h))));
}

Eigen::MatrixXd TransformerBlock::backward(const Eigen::MatrixXd& dy) {
    Eigen::MatrixXd dh = dy + ln2_.backward(fc1_.backward(act_.backward(fc2_.backward(dy))));
    return dh + ln1_.backward(attn_.backward(dh));
}

}  // namespace shdbench::models
