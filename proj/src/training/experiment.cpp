#include "shdbench/training/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shdbench/data/manifest.hpp"
#include "shdbench/data/waveform_store.hpp"
#include "shdbench/eval/metrics.hpp"
#include "shdbench/eval/predictions_io.hpp"
#include "shdbench/features/extract.hpp"
#include "shdbench/features/gbdt.hpp"
#include "shdbench/io_util.hpp"
#include "shdbench/models/checkpoint.hpp"
#include "shdbench/models/mofm.hpp"
#include "shdbench/models/resnet.hpp"

namespace shdbench::training {

namespace {

std::vector<std::string> ws_tokens(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

/// Rejects keys outside the declared vocabulary and keys used with the wrong
/// shape (value where a block is expected or vice versa).
void expect_keys(const KvNode& node, const std::string& where,
                 const std::set<std::string>& value_keys, const std::set<std::string>& block_keys) {
    for (const auto& [k, v] : node.values) {
        if (block_keys.count(k))
            throw Error(ErrCat::config, "'" + k + "' in " + where + " must be a block");
        require(value_keys.count(k) > 0, ErrCat::config, "unknown key '" + k + "' in " + where);
    }
    for (const auto& [k, v] : node.children) {
        if (value_keys.count(k))
            throw Error(ErrCat::config, "'" + k + "' in " + where + " must be a single value");
        require(block_keys.count(k) > 0, ErrCat::config, "unknown block '" + k + "' in " + where);
    }
}

const std::string& need_value(const KvNode& node, const std::string& key, const std::string& where) {
    auto it = node.values.find(key);
    require(it != node.values.end(), ErrCat::config, "missing '" + key + "' in " + where);
    return it->second;
}

double opt_double(const KvNode& node, const std::string& key, double fallback) {
    auto it = node.values.find(key);
    return it == node.values.end() ? fallback : parse_double(it->second);
}

int opt_int(const KvNode& node, const std::string& key, int fallback) {
    auto it = node.values.find(key);
    return it == node.values.end() ? fallback : static_cast<int>(parse_int(it->second));
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& n : names) {
        if (!out.empty()) out += ", ";
        out += n;
    }
    return out;
}

bool is_transformer_variant(const std::string& v) {
    static const std::set<std::string> t = {"probe",  "partial_ft", "full_transformer_ft",
                                            "full_model_ft", "lora",       "fusion",
                                            "mofm",          "binary_suite"};
    return t.count(v) > 0;
}

}  // namespace

KvNode parse_kv(const std::string& text) {
    KvNode root;
    std::vector<KvNode*> stack = {&root};
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto toks = ws_tokens(line);
        if (toks.empty()) continue;
        const std::string where = "line " + std::to_string(line_no);
        if (toks.size() == 1 && toks[0] == "}") {
            require(stack.size() > 1, ErrCat::format, "unmatched '}' at " + where);
            stack.pop_back();
            continue;
        }
        KvNode& top = *stack.back();
        if (toks.size() == 2 && toks[1] == "{") {
            require(!top.has(toks[0]), ErrCat::config,
                    "duplicate key '" + toks[0] + "' at " + where);
            stack.push_back(&top.children[toks[0]]);
            continue;
        }
        if (toks.size() > 2 && toks[1] == "{" && toks.back() == "}") {
            // one-line block: key { k1 v1 k2 v2 }
            require(!top.has(toks[0]), ErrCat::config,
                    "duplicate key '" + toks[0] + "' at " + where);
            KvNode& child = top.children[toks[0]];
            const size_t inner = toks.size() - 3;
            require(inner % 2 == 0, ErrCat::format,
                    "inline block needs key-value pairs at " + where);
            for (size_t i = 2; i + 1 < toks.size() - 1; i += 2) {
                require(toks[i] != "{" && toks[i] != "}" && toks[i + 1] != "{" &&
                            toks[i + 1] != "}",
                        ErrCat::format, "inline blocks cannot nest at " + where);
                require(!child.has(toks[i]), ErrCat::config,
                        "duplicate key '" + toks[i] + "' at " + where);
                child.values[toks[i]] = toks[i + 1];
            }
            continue;
        }
        require(toks.size() >= 2, ErrCat::format,
                "expected 'key value' or 'key {' at " + where);
        require(!top.has(toks[0]), ErrCat::config, "duplicate key '" + toks[0] + "' at " + where);
        std::string value = toks[1];
        for (size_t i = 2; i < toks.size(); ++i) value += " " + toks[i];
        top.values[toks[0]] = value;
    }
    require(stack.size() == 1, ErrCat::format, "unclosed block at end of input");
    return root;
}

const std::vector<std::string>& ExperimentSpec::variant_names() {
    static const std::vector<std::string> names = {
        "baselineA",     "baselineB", "probe", "partial_ft", "full_transformer_ft",
        "full_model_ft", "lora",      "fusion", "mofm",      "binary_suite",
        "downsample"};
    return names;
}

ExperimentSpec ExperimentSpec::parse(const std::string& text) {
    ExperimentSpec spec;
    KvNode doc = parse_kv(text);
    expect_keys(doc, "the experiment",
                {"variant", "seeds"},
                {"dataset", "model", "ssl", "train", "pretrained", "partial_ft", "lora", "fusion",
                 "mofm", "binary_suite", "downsample"});

    spec.variant = need_value(doc, "variant", "the experiment");
    const auto& names = variant_names();
    require(std::find(names.begin(), names.end(), spec.variant) != names.end(), ErrCat::config,
            "unknown variant '" + spec.variant + "'; valid variants: " + join_names(names));

    for (const std::string& tok : ws_tokens(need_value(doc, "seeds", "the experiment")))
        spec.seeds.push_back(static_cast<uint64_t>(parse_int(tok)));

    auto ds_it = doc.children.find("dataset");
    require(ds_it != doc.children.end(), ErrCat::config, "missing 'dataset' block");
    const KvNode& ds = ds_it->second;
    expect_keys(ds, "dataset", {"path"}, {"synth"});
    const bool has_path = ds.values.count("path") > 0;
    const bool has_synth = ds.children.count("synth") > 0;
    require(has_path != has_synth, ErrCat::config,
            "dataset needs exactly one of 'path' or a 'synth' block");
    if (has_path) {
        spec.dataset_dir = ds.values.at("path");
    } else {
        const KvNode& sy = ds.children.at("synth");
        expect_keys(sy, "dataset.synth",
                    {"n", "seed", "signal", "val_fraction", "test_fraction", "prevalence"}, {});
        data::SyntheticConfig sc;
        sc.n = static_cast<size_t>(parse_int(need_value(sy, "n", "dataset.synth")));
        sc.seed = static_cast<uint64_t>(parse_int(need_value(sy, "seed", "dataset.synth")));
        sc.signal_strength = opt_double(sy, "signal", sc.signal_strength);
        sc.val_fraction = opt_double(sy, "val_fraction", sc.val_fraction);
        sc.test_fraction = opt_double(sy, "test_fraction", sc.test_fraction);
        if (sy.values.count("prevalence")) {
            auto toks = ws_tokens(sy.values.at("prevalence"));
            require(int(toks.size()) == kNumTargets, ErrCat::config,
                    "prevalence needs exactly 6 values");
            for (int j = 0; j < kNumTargets; ++j)
                sc.prevalence[size_t(j)] = parse_double(toks[size_t(j)]);
        }
        spec.synth = sc;
    }

    if (doc.children.count("model")) {
        const KvNode& m = doc.children.at("model");
        expect_keys(m, "model", {"preset", "fusion", "d_e", "heads"}, {});
        spec.preset = m.values.count("preset") ? m.values.at("preset") : "";
        if (m.values.count("fusion")) {
            require(spec.variant != "fusion", ErrCat::config,
                    "the fusion variant sets its mode in the 'fusion' block, not under model");
            spec.fusion.mode = models::fusion_mode_from_string(m.values.at("fusion"));
        }
        spec.fusion.d_e = opt_int(m, "d_e", spec.fusion.d_e);
        spec.fusion.heads = opt_int(m, "heads", spec.fusion.heads);
    }

    for (const auto& name : {"partial_ft", "lora", "fusion", "mofm", "binary_suite", "downsample"})
        if (doc.children.count(name))
            require(spec.variant == name, ErrCat::config,
                    std::string("block '") + name + "' only applies to variant '" + name + "'");
    if (spec.variant == "partial_ft" || spec.variant == "binary_suite") {
        auto it = doc.children.find(spec.variant);
        if (it != doc.children.end()) {
            expect_keys(it->second, spec.variant, {"b"}, {});
            spec.b = opt_int(it->second, "b", spec.b);
        }
    }
    if (spec.variant == "lora" && doc.children.count("lora")) {
        const KvNode& l = doc.children.at("lora");
        expect_keys(l, "lora", {"rank", "alpha"}, {});
        spec.lora.rank = opt_int(l, "rank", spec.lora.rank);
        spec.lora.alpha = opt_double(l, "alpha", spec.lora.alpha);
    }
    if (spec.variant == "fusion") {
        auto it = doc.children.find("fusion");
        require(it != doc.children.end(), ErrCat::config,
                "variant fusion needs a 'fusion' block with a mode");
        expect_keys(it->second, "fusion", {"mode", "d_e", "heads"}, {});
        spec.fusion.mode =
            models::fusion_mode_from_string(need_value(it->second, "mode", "fusion"));
        spec.fusion.d_e = opt_int(it->second, "d_e", spec.fusion.d_e);
        spec.fusion.heads = opt_int(it->second, "heads", spec.fusion.heads);
    }
    if (spec.variant == "mofm" && doc.children.count("mofm")) {
        const KvNode& m = doc.children.at("mofm");
        expect_keys(m, "mofm", {"mode", "experts"}, {});
        if (m.values.count("mode")) spec.mofm_mode = m.values.at("mode");
        spec.mofm_experts = opt_int(m, "experts", spec.mofm_experts);
    }
    if (spec.variant == "downsample") {
        auto it = doc.children.find("downsample");
        require(it != doc.children.end(), ErrCat::config,
                "variant downsample needs a 'downsample' block with rho");
        expect_keys(it->second, "downsample", {"rho"}, {});
        spec.rho = parse_double(need_value(it->second, "rho", "downsample"));
    }

    if (doc.children.count("ssl")) {
        const KvNode& s = doc.children.at("ssl");
        expect_keys(s, "ssl", {"steps", "p_m", "span", "negatives", "tau", "lr", "batch"}, {});
        spec.ssl.steps = opt_int(s, "steps", spec.ssl.steps);
        spec.ssl.p_m = opt_double(s, "p_m", spec.ssl.p_m);
        spec.ssl.span = opt_int(s, "span", spec.ssl.span);
        spec.ssl.negatives = opt_int(s, "negatives", spec.ssl.negatives);
        spec.ssl.tau = opt_double(s, "tau", spec.ssl.tau);
        spec.ssl.lr = opt_double(s, "lr", spec.ssl.lr);
        spec.ssl.batch = opt_int(s, "batch", spec.ssl.batch);
    }
    if (doc.children.count("train")) {
        const KvNode& t = doc.children.at("train");
        expect_keys(t, "train",
                    {"batch", "max_epochs", "patience", "lr_backbone", "lr_head"}, {});
        spec.train.batch = opt_int(t, "batch", spec.train.batch);
        spec.train.max_epochs = opt_int(t, "max_epochs", spec.train.max_epochs);
        spec.train.patience = opt_int(t, "patience", spec.train.patience);
        spec.train.lr_backbone = opt_double(t, "lr_backbone", spec.train.lr_backbone);
        spec.train.lr_head = opt_double(t, "lr_head", spec.train.lr_head);
    }
    if (doc.children.count("pretrained")) {
        const KvNode& p = doc.children.at("pretrained");
        expect_keys(p, "pretrained", {"checkpoint", "mapping"}, {});
        spec.pretrained_ckpt = need_value(p, "checkpoint", "pretrained");
        spec.pretrained_map = need_value(p, "mapping", "pretrained");
    }

    if (spec.variant != "baselineA" && spec.fusion.mode == models::FusionConfig::Mode::gated)
        spec.fusion.d_e = spec.backbone().d_model;

    spec.validate();
    return spec;
}

models::BackboneConfig ExperimentSpec::backbone() const {
    std::string name = preset;
    if (name.empty()) name = (variant == "baselineB") ? "resnet_mini" : "transformer_mini";
    if (name == "transformer_full") return models::BackboneConfig::transformer_full();
    if (name == "transformer_mini") return models::BackboneConfig::transformer_mini();
    if (name == "resnet_full") return models::BackboneConfig::resnet_full();
    if (name == "resnet_mini") return models::BackboneConfig::resnet_mini();
    throw Error(ErrCat::config,
                "unknown preset '" + name +
                    "'; presets: transformer_full, transformer_mini, resnet_full, resnet_mini");
}

models::AdaptationPolicy ExperimentSpec::policy() const {
    models::AdaptationPolicy pol;
    const bool transformer =
        variant != "baselineA" &&
        backbone().family == models::BackboneConfig::Family::conv_transformer;
    const int depth = transformer ? backbone().layers : 0;
    if (variant == "probe" || variant == "mofm") {
        pol = {false, 0, std::nullopt};
    } else if (variant == "lora") {
        pol = {false, 0, lora};
    } else if (variant == "partial_ft" || variant == "binary_suite") {
        pol = {false, b, std::nullopt};
    } else if (variant == "full_transformer_ft") {
        pol = {false, depth, std::nullopt};
    } else {
        // baselineB, full_model_ft, fusion, downsample: everything trains
        pol = {true, depth, std::nullopt};
    }
    return pol;
}

void ExperimentSpec::validate() const {
    const auto& names = variant_names();
    require(std::find(names.begin(), names.end(), variant) != names.end(), ErrCat::config,
            "unknown variant '" + variant + "'; valid variants: " + join_names(names));
    require(!seeds.empty(), ErrCat::config, "seeds must list at least one value");
    require(synth.has_value() || !dataset_dir.empty(), ErrCat::config,
            "dataset must name a path or a synth block");

    if (variant == "baselineA") {
        require(preset.empty(), ErrCat::config, "baselineA takes no backbone preset");
        require(ssl.steps == 0, ErrCat::config, "baselineA has no adaptation stage");
        require(pretrained_ckpt.empty(), ErrCat::config, "baselineA takes no checkpoint");
        train.validate();
        return;
    }

    models::BackboneConfig bc = backbone();
    bc.validate();
    const bool is_resnet = bc.family == models::BackboneConfig::Family::resnet1d;
    if (variant == "baselineB")
        require(is_resnet, ErrCat::config, "baselineB uses a residual backbone preset");
    if (is_transformer_variant(variant))
        require(!is_resnet, ErrCat::config,
                "variant " + variant + " needs a transformer backbone preset");

    models::AdaptationPolicy pol = policy();
    pol.validate(is_resnet ? 0 : bc.layers);
    fusion.validate(is_resnet ? bc.embed_dim : bc.d_model);

    if (variant == "downsample")
        require(rho > 0.0 && rho <= 1.0, ErrCat::config,
                "retention fraction rho must lie in (0, 1]");
    if (variant == "mofm") {
        require(mofm_experts >= 2, ErrCat::config, "a mixture needs at least 2 experts");
        models::mofm_fusion_from_string(mofm_mode);
    }
    ssl.validate();
    if (ssl.steps > 0) {
        require(!is_resnet && variant != "mofm" && variant != "binary_suite", ErrCat::config,
                "the adaptation stage needs a single transformer backbone");
    }
    train.validate();
}

std::string ExperimentSpec::canonical() const {
    std::ostringstream out;
    out << "variant=" << variant << ";";
    if (synth) {
        out << "dataset=synth:" << synth->n << ":" << synth->seed << ":"
            << format_double(synth->signal_strength) << ":" << format_double(synth->val_fraction)
            << ":" << format_double(synth->test_fraction);
        for (double p : synth->prevalence) out << ":" << format_double(p);
        out << ";";
    } else {
        out << "dataset=path:" << dataset_dir << ";";
    }
    out << "seeds=";
    for (size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
    out << ";";
    if (variant != "baselineA") {
        std::string name = preset;
        if (name.empty()) name = (variant == "baselineB") ? "resnet_mini" : "transformer_mini";
        out << "preset=" << name << ";";
        out << "fusion=" << models::to_string(fusion.mode) << ":" << fusion.d_e << ":"
            << fusion.heads << ";";
        models::AdaptationPolicy pol = policy();
        out << "policy=" << (pol.conv_trainable ? 1 : 0) << ":" << pol.b << ";";
        if (variant == "lora")
            out << "lora=" << lora.rank << ":" << format_double(lora.scale()) << ";";
        if (variant == "mofm") out << "mofm=" << mofm_mode << ":" << mofm_experts << ";";
        if (variant == "downsample") out << "rho=" << format_double(rho) << ";";
        out << "ssl=" << ssl.steps << ":" << format_double(ssl.p_m) << ":" << ssl.span << ":"
            << ssl.negatives << ":" << format_double(ssl.tau) << ":" << format_double(ssl.lr)
            << ":" << ssl.batch << ";";
        if (!pretrained_ckpt.empty()) out << "pretrained=" << pretrained_ckpt << ";";
    }
    out << "train=" << train.batch << ":" << train.max_epochs << ":" << train.patience << ":"
        << format_double(train.lr_backbone) << ":" << format_double(train.lr_head);
    return out.str();
}

std::string ExperimentSpec::config_hash() const { return hex64(fnv1a64(canonical())); }

SeedTriple derive_seeds(uint64_t row_seed) {
    SeedTriple t;
    t.data = Rng::splitmix(row_seed ^ 0xDA7A5EEDULL);
    t.init = Rng::splitmix(row_seed ^ 0x1217A15EULL);
    t.order = Rng::splitmix(row_seed ^ 0x08DE0C8AULL);
    return t;
}

void append_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
    bool need_header = true;
    {
        std::error_code ec;
        auto size = std::filesystem::file_size(path, ec);
        need_header = ec || size == 0;
    }
    std::ofstream out(path, std::ios::app);
    require(out.good(), ErrCat::io, "cannot open results file: " + path);
    if (need_header) out << kResultsHeader << "\n";
    for (const auto& r : rows) {
        out << r.variant << "," << r.seed << "," << r.b << "," << r.conv_trainable << ","
            << r.lora_rank << "," << r.fusion << "," << format_double(r.rho) << ","
            << r.trainable_params << "," << format_double(r.auroc) << ","
            << format_double(r.auprc) << "," << format_double(r.acc) << ","
            << format_double(r.f1) << "," << format_double(r.wall_time_s) << ","
            << r.config_hash << "\n";
    }
    require(out.good(), ErrCat::io, "write failed: " + path);
}

namespace {

struct SeedOutcome {
    Eigen::MatrixXd probs;
    int64_t trainable = 0;
};

SeedOutcome run_neural_seed(const ExperimentSpec& spec, const DataBundle& bundle,
                            const SeedTriple& tr, const std::string& out_dir, uint64_t row_seed,
                            std::vector<std::string>& notes) {
    SeedOutcome out;
    models::BackboneConfig bc = spec.backbone();
    const models::AdaptationPolicy pol = spec.policy();
    TrainConfig cfg = spec.train;
    cfg.policy = pol;
    cfg.fusion = spec.fusion;
    cfg.seed = tr.order;

    if (spec.variant == "binary_suite") {
        ModelFactory factory = [&](int out_dim, uint64_t init_seed) {
            return std::unique_ptr<models::NeuralModel>(
                new models::ConvTransformer(bc, spec.fusion, out_dim, init_seed));
        };
        BinarySuiteResult suite = train_binary_suite(bundle, factory, pol, cfg);
        out.trainable = suite.total_trainable;
        out.probs = predict_binary_suite(suite.models, bundle.test, 64);
        return out;
    }

    std::unique_ptr<models::NeuralModel> model;
    if (spec.variant == "mofm") {
        std::vector<models::BackboneConfig> cfgs(size_t(spec.mofm_experts), bc);
        models::MoFMConfig mc;
        mc.fusion = models::mofm_fusion_from_string(spec.mofm_mode);
        mc.d_c = bc.d_model;
        auto mofm = std::make_unique<models::MoFM>(cfgs, mc, kNumTargets, tr.init);
        for (int k = 0; k < spec.mofm_experts; ++k) mofm->apply_expert_policy(k, pol);
        model = std::move(mofm);
        out.trainable = models::count_trainable(model->store(), model->n_blocks()).total_trainable;
    } else if (bc.family == models::BackboneConfig::Family::resnet1d) {
        model = std::make_unique<models::ResNet1D>(bc, kNumTargets, tr.init);
    } else {
        model = std::make_unique<models::ConvTransformer>(bc, spec.fusion, kNumTargets, tr.init);
    }

    if (!spec.pretrained_ckpt.empty()) {
        auto loaded =
            models::load_pretrained_backbone(model->store(), spec.pretrained_ckpt,
                                             spec.pretrained_map);
        notes.push_back("seed " + std::to_string(row_seed) + ": " + loaded.message);
    }
    if (spec.ssl.steps > 0) {
        auto* ct = dynamic_cast<models::ConvTransformer*>(model.get());
        require(ct != nullptr, ErrCat::config,
                "the adaptation stage needs a single transformer backbone");
        SslConfig sc = spec.ssl;
        sc.seed = Rng::splitmix(tr.order ^ 0x55E1F0ADULL);
        SslResult sres = ssl_pretrain(ct->trunk(), ct->store(), bundle.train.waves, sc);
        if (sres.low_mask_warning)
            notes.push_back("seed " + std::to_string(row_seed) +
                            ": expected span starts per sequence fall below one");
    }

    if (spec.variant != "mofm") {
        auto budget = configure_model(*model, pol, Rng::splitmix(tr.init ^ 0x10AAULL));
        out.trainable = budget.total_trainable;
    }
    train_supervised(*model, bundle, cfg);
    out.probs = predict_probabilities(*model, bundle.test, 64);

    if (!out_dir.empty()) {
        CsvTable t;
        t.header.push_back("record_id");
        Eigen::MatrixXd emb;
        const int n = bundle.test.n();
        for (int at = 0; at < n; at += 64) {
            std::vector<int> chunk;
            for (int i = at; i < std::min(n, at + 64); ++i) chunk.push_back(i);
            Eigen::MatrixXd e = model->pooled_embedding(make_batch(bundle.test, chunk));
            if (emb.size() == 0) emb.resize(n, e.cols());
            emb.middleRows(at, e.rows()) = e;
        }
        for (Eigen::Index j = 0; j < emb.cols(); ++j) t.header.push_back("e" + std::to_string(j));
        for (int i = 0; i < n; ++i) {
            std::vector<std::string> row;
            row.reserve(size_t(emb.cols()) + 1);
            row.push_back(bundle.test.record_ids[size_t(i)]);
            for (Eigen::Index j = 0; j < emb.cols(); ++j) row.push_back(format_double(emb(i, j)));
            t.rows.push_back(std::move(row));
        }
        write_csv(out_dir + "/embeddings_seed" + std::to_string(row_seed) + ".csv", t);
    }

    if (!out_dir.empty() && spec.variant != "mofm") {
        nlohmann::json cj = {{"variant", spec.variant},
                             {"seed", row_seed},
                             {"config_hash", spec.config_hash()},
                             {"fusion", models::to_string(spec.fusion.mode)}};
        nlohmann::json pj = {
            {"conv_trainable", pol.conv_trainable}, {"b", pol.b}, {"lora_rank", pol.lora ? pol.lora->rank : 0}};
        models::save_checkpoint(out_dir + "/ckpt_seed" + std::to_string(row_seed) + ".bin",
                                model->store(), cj, pj);
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir,
                                bool zero_wall_time) {
    spec.validate();
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    data::CohortManifest manifest;
    std::vector<data::WaveformF> waves;
    if (spec.synth) {
        auto pair = data::generate_synthetic_cohort_mem(*spec.synth);
        manifest = std::move(pair.first);
        waves = std::move(pair.second);
    } else {
        manifest = data::read_manifest(spec.dataset_dir + "/manifest.csv");
        waves = data::read_waveform_store(spec.dataset_dir + "/waveforms.bin", std::nullopt,
                                          manifest.store_checksum);
        require(manifest.rows.size() == waves.size(), ErrCat::alignment,
                "manifest and waveform store row counts differ");
    }
    if (!spec.pretrained_ckpt.empty()) {
        require(std::filesystem::exists(spec.pretrained_ckpt), ErrCat::io,
                "backbone checkpoint not found: " + spec.pretrained_ckpt);
        require(std::filesystem::exists(spec.pretrained_map), ErrCat::io,
                "backbone name mapping not found: " + spec.pretrained_map);
    }

    const bool per_seed_data = spec.variant == "downsample";
    std::optional<DataBundle> shared;
    if (!per_seed_data) shared = build_bundle(manifest, waves);

    std::optional<features::FeatureMatrix> fm_train, fm_test;
    if (spec.variant == "baselineA") {
        auto catalog = features::default_catalog();
        fm_train =
            features::extract_matrix(shared->train.waves, shared->train.record_ids, catalog);
        fm_test = features::extract_matrix(shared->test.waves, shared->test.record_ids, catalog);
    }

    ExperimentResult result;
    const std::string hash = spec.config_hash();
    const models::AdaptationPolicy pol = spec.policy();

    for (uint64_t s : spec.seeds) {
        const auto t0 = std::chrono::steady_clock::now();
        SeedTriple tr = derive_seeds(s);
        result.triples.push_back(tr);

        DataBundle local;
        const DataBundle* bundle = nullptr;
        if (per_seed_data) {
            auto dsr = data::downsample_all_negative(manifest, spec.rho, tr.data);
            result.downsample_before = dsr.all_negative_before;
            result.downsample_removed = dsr.removed;
            std::vector<data::WaveformF> sub;
            sub.reserve(dsr.retained.size());
            for (size_t i : dsr.retained) sub.push_back(waves[i]);
            local = build_bundle(dsr.manifest, sub);
            bundle = &local;
        } else {
            bundle = &*shared;
        }
        require(bundle->test.n() > 0, ErrCat::data, "empty test split");

        ResultRow row;
        row.variant = spec.variant;
        row.seed = std::to_string(s);
        row.b = pol.b;
        row.conv_trainable = pol.conv_trainable ? 1 : 0;
        row.lora_rank = (spec.variant == "lora") ? spec.lora.rank : 0;
        row.fusion = models::to_string(spec.fusion.mode);
        row.rho = (spec.variant == "downsample") ? spec.rho : 1.0;
        row.config_hash = hash;

        Eigen::MatrixXd probs;
        if (spec.variant == "baselineA") {
            features::GbdtParams params;
            auto suite =
                features::train_gbdt_ovr(fm_train->values, bundle->train.labels, params, tr.init);
            probs = features::predict_ovr(suite, fm_test->values);
            row.trainable_params = 0;
        } else {
            SeedOutcome o = run_neural_seed(spec, *bundle, tr, out_dir, s, result.notes);
            probs = std::move(o.probs);
            row.trainable_params = o.trainable;
        }

        eval::PredictionSet pred;
        pred.probabilities = std::move(probs);
        pred.record_ids = bundle->test.record_ids;
        pred.model_id = spec.variant;
        pred.config_hash = hash;
        eval::MetricsReport report = eval::macro_report(pred, bundle->test.labels, 0.5);
        row.auroc = report.macro_auroc;
        row.auprc = report.macro_auprc;
        row.acc = report.macro_acc;
        row.f1 = report.macro_f1;
        row.wall_time_s =
            zero_wall_time
                ? 0.0
                : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.rows.push_back(row);
        if (!out_dir.empty())
            eval::write_predictions_csv(
                out_dir + "/predictions_seed" + std::to_string(s) + ".csv", pred,
                data::TargetSpec::standard());
    }

    ResultRow agg = result.rows.front();
    agg.seed = "mean";
    agg.auroc = agg.auprc = agg.acc = agg.f1 = agg.wall_time_s = 0.0;
    for (const auto& r : result.rows) {
        agg.auroc += r.auroc;
        agg.auprc += r.auprc;
        agg.acc += r.acc;
        agg.f1 += r.f1;
        agg.wall_time_s += r.wall_time_s;
    }
    const double inv = 1.0 / double(result.rows.size());
    agg.auroc *= inv;
    agg.auprc *= inv;
    agg.acc *= inv;
    agg.f1 *= inv;
    agg.wall_time_s *= inv;
    result.rows.push_back(agg);

    if (!out_dir.empty()) {
        append_results_csv(out_dir + "/results.csv", result.rows);
        std::ostringstream log;
        log << "config " << spec.canonical() << "\n";
        log << "config_hash " << hash << "\n";
        for (size_t i = 0; i < spec.seeds.size(); ++i)
            log << "seed " << spec.seeds[i] << " data " << result.triples[i].data << " init "
                << result.triples[i].init << " order " << result.triples[i].order << "\n";
        if (per_seed_data)
            log << "downsample all_negative_before " << result.downsample_before << " removed "
                << result.downsample_removed << "\n";
        for (const auto& n : result.notes) log << "note " << n << "\n";
        spit_file(out_dir + "/run.log", log.str());
    }
    return result;
}

}  // namespace shdbench::training
