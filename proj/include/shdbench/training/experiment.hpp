#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shdbench/data/cohort.hpp"
#include "shdbench/data/synthetic.hpp"
#include "shdbench/training/ssl.hpp"
#include "shdbench/training/supervised.hpp"

namespace shdbench::training {

/// Nested key-value document: "key value..." lines, "key {" block openers and
/// bare "}" closers. Duplicate keys within a block are rejected.
struct KvNode {
    std::map<std::string, std::string> values;
    std::map<std::string, KvNode> children;

    bool has(const std::string& key) const {
        return values.count(key) > 0 || children.count(key) > 0;
    }
};

KvNode parse_kv(const std::string& text);

struct ExperimentSpec {
    std::string variant;
    std::optional<data::SyntheticConfig> synth;
    std::string dataset_dir;  // manifest.csv + waveforms.bin under this directory
    std::vector<uint64_t> seeds;
    std::string preset;  // backbone preset name, defaulted per variant
    models::FusionConfig fusion;
    int b = 0;                // partial_ft / binary_suite depth
    models::LoraConfig lora;  // lora variant
    std::string mofm_mode = "concat";
    int mofm_experts = 2;
    double rho = 1.0;  // downsample variant
    SslConfig ssl;     // steps = 0 skips the stage
    TrainConfig train;
    std::string pretrained_ckpt;
    std::string pretrained_map;

    static ExperimentSpec parse(const std::string& text);
    static const std::vector<std::string>& variant_names();

    models::BackboneConfig backbone() const;  // resolved preset
    models::AdaptationPolicy policy() const;  // resolved per variant
    void validate() const;
    /// Normalized field rendering; its hash travels on every results row.
    std::string canonical() const;
    std::string config_hash() const;
};

/// Row seed expanded into the independent streams one experiment row uses.
struct SeedTriple {
    uint64_t data = 0;   // data-level sampling (downsampling)
    uint64_t init = 0;   // parameter initialization
    uint64_t order = 0;  // batch order, dropout, adaptation sampling
};
SeedTriple derive_seeds(uint64_t row_seed);

struct ResultRow {
    std::string variant;
    std::string seed;  // decimal row seed, or "mean" on the aggregate row
    int b = 0;
    int conv_trainable = 0;
    int lora_rank = 0;
    std::string fusion = "none";
    double rho = 1.0;
    int64_t trainable_params = 0;
    double auroc = 0.0, auprc = 0.0, acc = 0.0, f1 = 0.0;
    double wall_time_s = 0.0;
    std::string config_hash;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;  // one per seed, then one aggregate
    std::vector<SeedTriple> triples;
    size_t downsample_before = 0;  // all-negative train rows before removal
    size_t downsample_removed = 0;
    std::vector<std::string> notes;
};

inline constexpr const char* kResultsHeader =
    "variant,seed,b,conv_trainable,lora_rank,fusion,rho,trainable_params,auroc,auprc,acc,f1,"
    "wall_time_s,config_hash";

/// Appends rows, writing the header first when the file is new or empty.
void append_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

/// Runs the variant pipeline per seed (optional contrastive adaptation, then
/// freezing policy, supervised training, test-set metrics) and adds an
/// aggregate row. out_dir, when set, receives results.csv, a run log,
/// per-seed test predictions, pooled test embeddings for neural variants,
/// and per-seed checkpoints for single-model neural variants.
/// zero_wall_time pins the wall_time_s column to 0 so reruns with the same
/// seeds and inputs produce byte-identical artifacts.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& out_dir = "",
                                bool zero_wall_time = false);

}  // namespace shdbench::training
