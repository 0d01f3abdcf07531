#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shdbench/models/common.hpp"

namespace shdbench::models {

/// Self-describing checkpoint container: magic line, JSON header (config and
/// policy echo, tensor directory, blob hash), then raw little-endian f64
/// tensor data in directory order. Tensors are addressed by their canonical
/// parameter names, so freezing groups survive a round trip.
inline constexpr const char* kCheckpointMagic = "shdbench-ckpt-v1";

struct LoadedCheckpoint {
    nlohmann::json header;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

    const Eigen::MatrixXd* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& config, const nlohmann::json& policy);

LoadedCheckpoint load_checkpoint(const std::string& path);

/// Copies checkpoint tensors into the store by name; every store parameter
/// must be present with a matching shape.
void restore_params(ParamStore& store, const LoadedCheckpoint& ckpt);

/// Hash of all parameter values in store order (training-state fingerprint).
uint64_t param_state_hash(const ParamStore& store);

struct PretrainedLoadResult {
    bool loaded = false;
    int tensors_loaded = 0;
    std::string message;
};

/// Seeds a model from an externally produced checkpoint through a sidecar
/// name map (lines of "external_name = canonical_name"). A missing checkpoint
/// or map is not an error: the model keeps its random initialization and the
/// result carries a warning message instead.
PretrainedLoadResult load_pretrained_backbone(ParamStore& store, const std::string& ckpt_path,
                                              const std::string& mapping_path);

}  // namespace shdbench::models
