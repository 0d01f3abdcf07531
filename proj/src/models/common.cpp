#include "shdbench/models/common.hpp"

#include <cctype>

namespace shdbench::models {

namespace {

bool strip_prefix(std::string& s, const char* pre) {
    size_t n = std::string_view(pre).size();
    if (s.rfind(pre, 0) != 0) return false;
    s.erase(0, n);
    return true;
}

}  // namespace

GroupRef classify_param(const std::string& name) {
    std::string s = name;
    if (s.rfind("exp", 0) == 0) {
        size_t i = 3;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
        if (i > 3 && i < s.size() && s[i] == '.') s.erase(0, i + 1);
    }
    if (s.find(".lora.") != std::string::npos) return {ParamGroup::lora, -1};
    if (strip_prefix(s, "conv.")) return {ParamGroup::conv, -1};
    if (s.rfind("block", 0) == 0) {
        size_t i = 5;
        int idx = 0;
        bool any = false;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
            idx = idx * 10 + (s[i] - '0');
            ++i;
            any = true;
        }
        require(any && i < s.size() && s[i] == '.', ErrCat::internal,
                "malformed block parameter name: " + name);
        return {ParamGroup::block, idx};
    }
    if (strip_prefix(s, "tab.")) return {ParamGroup::tab, -1};
    if (s.rfind("head.", 0) == 0 || s.rfind("fuse.", 0) == 0 || s.rfind("mofm.", 0) == 0)
        return {ParamGroup::head, -1};
    throw Error(ErrCat::internal, "parameter name outside any known group: " + name);
}

ParamBudget count_trainable(const ParamStore& store, int n_blocks) {
    ParamBudget b;
    b.block.assign(std::max(n_blocks, 0), 0);
    for (const auto& p : store.all()) {
        int64_t n = int64_t(p->v.rows()) * p->v.cols();
        GroupRef ref = classify_param(p->name);
        switch (ref.group) {
            case ParamGroup::conv: b.conv += n; break;
            case ParamGroup::block:
                require(ref.block_index < int(b.block.size()), ErrCat::internal,
                        "block index exceeds depth: " + p->name);
                b.block[size_t(ref.block_index)] += n;
                break;
            case ParamGroup::lora: b.lora += n; break;
            case ParamGroup::tab: b.tab += n; break;
            case ParamGroup::head: b.head += n; break;
        }
        b.total += n;
        if (p->trainable) b.total_trainable += n;
    }
    return b;
}

int64_t lora_adapter_count(int layers, int d_model, int rank) {
    return int64_t(layers) * 2 * 2 * int64_t(d_model) * rank;
}

const char* to_string(FusionConfig::Mode m) {
    switch (m) {
        case FusionConfig::Mode::none: return "none";
        case FusionConfig::Mode::concat: return "concat";
        case FusionConfig::Mode::gated: return "gated";
        case FusionConfig::Mode::cross_attention: return "cross_attention";
    }
    return "none";
}

FusionConfig::Mode fusion_mode_from_string(const std::string& s) {
    if (s == "none") return FusionConfig::Mode::none;
    if (s == "concat") return FusionConfig::Mode::concat;
    if (s == "gated") return FusionConfig::Mode::gated;
    if (s == "cross_attention") return FusionConfig::Mode::cross_attention;
    throw Error(ErrCat::config, "unknown fusion mode: " + s);
}

void BackboneConfig::validate() const {
    if (family == Family::conv_transformer) {
        require(layers >= 1, ErrCat::config, "transformer depth must be >= 1");
        require(d_model >= 1 && heads >= 1, ErrCat::config, "model width and heads must be >= 1");
        require(d_model % heads == 0, ErrCat::config,
                "model width must be divisible by the head count");
        require(!conv.empty(), ErrCat::config, "conv front-end must have at least one stage");
        require(ff >= 1, ErrCat::config, "feed-forward width must be >= 1");
    } else {
        for (int w : stage_widths)
            require(w >= 1, ErrCat::config, "stage widths must be >= 1");
        require(embed_dim >= 1, ErrCat::config, "embedding width must be >= 1");
    }
    for (const auto& st : conv)
        require(st.out_channels >= 1 && st.kernel >= 1 && st.stride >= 1, ErrCat::config,
                "conv stage fields must be >= 1");
    require(head_hidden >= 1, ErrCat::config, "head hidden width must be >= 1");
    require(dropout >= 0.0 && dropout < 1.0, ErrCat::config, "dropout must lie in [0, 1)");
}

int BackboneConfig::token_count(int input_len) const {
    int t = input_len;
    for (const auto& st : conv) {
        int pad = st.kernel / 2;
        t = (t + 2 * pad - st.kernel) / st.stride + 1;
        require(t >= 1, ErrCat::config, "conv front-end collapses the sequence");
    }
    return t;
}

BackboneConfig BackboneConfig::transformer_full() {
    BackboneConfig c;
    c.family = Family::conv_transformer;
    c.conv = {{384, 7, 2}, {384, 5, 2}, {768, 3, 2}, {768, 3, 2}};
    c.layers = 12;
    c.d_model = 768;
    c.heads = 12;
    c.ff = 3072;
    c.head_hidden = 256;
    c.dropout = 0.1;
    return c;
}

BackboneConfig BackboneConfig::transformer_mini() {
    BackboneConfig c;
    c.family = Family::conv_transformer;
    c.conv = {{32, 7, 4}, {32, 5, 4}, {64, 3, 2}, {64, 3, 2}};
    c.layers = 4;
    c.d_model = 64;
    c.heads = 4;
    c.ff = 256;
    c.head_hidden = 32;
    c.dropout = 0.1;
    return c;
}

BackboneConfig BackboneConfig::resnet_full() {
    BackboneConfig c;
    c.family = Family::resnet1d;
    c.stage_widths = {64, 128, 256, 512};
    c.embed_dim = 768;
    c.head_hidden = 256;
    c.dropout = 0.1;
    return c;
}

BackboneConfig BackboneConfig::resnet_mini() {
    BackboneConfig c;
    c.family = Family::resnet1d;
    c.stage_widths = {8, 16, 32, 64};
    c.embed_dim = 64;
    c.head_hidden = 32;
    c.dropout = 0.1;
    return c;
}

ParamBudget apply_freezing_policy(NeuralModel& model, const AdaptationPolicy& policy) {
    int L = model.n_blocks();
    policy.validate(L);
    for (const auto& p : model.store().all()) {
        GroupRef ref = classify_param(p->name);
        switch (ref.group) {
            case ParamGroup::conv: p->trainable = policy.conv_trainable; break;
            case ParamGroup::block: p->trainable = ref.block_index >= L - policy.b; break;
            case ParamGroup::lora: p->trainable = true; break;
            case ParamGroup::tab: p->trainable = true; break;
            case ParamGroup::head: p->trainable = true; break;
        }
    }
    return count_trainable(model.store(), L);
}

}  // namespace shdbench::models
