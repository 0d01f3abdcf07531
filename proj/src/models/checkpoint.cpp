#include "shdbench/models/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "shdbench/io_util.hpp"

namespace shdbench::models {

namespace {

uint64_t blob_hash(const std::vector<char>& blob) { return fnv1a64(blob.data(), blob.size()); }

}  // namespace

const Eigen::MatrixXd* LoadedCheckpoint::find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

uint64_t param_state_hash(const ParamStore& store) {
    std::string buf;
    for (const auto& p : store.all()) {
        buf.append(p->name);
        buf.push_back('\0');
        buf.append(reinterpret_cast<const char*>(p->v.data()), size_t(p->v.size()) * 8);
    }
    return fnv1a64(buf);
}

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const nlohmann::json& config, const nlohmann::json& policy) {
    nlohmann::json dir = nlohmann::json::array();
    std::vector<char> blob;
    uint64_t offset = 0;
    for (const auto& p : store.all()) {
        size_t bytes = size_t(p->v.size()) * 8;
        dir.push_back({{"name", p->name},
                       {"rows", p->v.rows()},
                       {"cols", p->v.cols()},
                       {"trainable", p->trainable},
                       {"offset", offset}});
        size_t at = blob.size();
        blob.resize(at + bytes);
        std::memcpy(blob.data() + at, p->v.data(), bytes);
        offset += bytes;
    }
    nlohmann::json header = {{"version", kVersion},
                             {"config", config},
                             {"policy", policy},
                             {"tensors", dir},
                             {"state_hash", hex64(blob_hash(blob))}};
    std::string h = header.dump();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrCat::io, "cannot open checkpoint for writing: " + path);
    f << kCheckpointMagic << "\n";
    uint64_t hlen = h.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(h.data(), std::streamsize(h.size()));
    f.write(blob.data(), std::streamsize(blob.size()));
    require(f.good(), ErrCat::io, "checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), ErrCat::io, "cannot open checkpoint: " + path);
    std::string magic;
    std::getline(f, magic);
    require(magic == kCheckpointMagic, ErrCat::format, "not a checkpoint file: " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    require(f.good() && hlen > 0 && hlen < (1ull << 30), ErrCat::format,
            "corrupt checkpoint header length");
    std::string h(hlen, '\0');
    f.read(h.data(), std::streamsize(hlen));
    require(f.good(), ErrCat::format, "truncated checkpoint header");
    LoadedCheckpoint out;
    try {
        out.header = nlohmann::json::parse(h);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrCat::format, std::string("bad checkpoint header: ") + e.what());
    }
    std::vector<char> blob{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    require(out.header.contains("tensors") && out.header["tensors"].is_array(), ErrCat::format,
            "checkpoint header lacks a tensor directory");
    std::string want = out.header.value("state_hash", "");
    require(hex64(blob_hash(blob)) == want, ErrCat::integrity,
            "checkpoint blob hash mismatch (file damaged or tampered)");
    for (const auto& t : out.header["tensors"]) {
        std::string name = t.at("name").get<std::string>();
        Eigen::Index rows = t.at("rows").get<Eigen::Index>();
        Eigen::Index cols = t.at("cols").get<Eigen::Index>();
        uint64_t off = t.at("offset").get<uint64_t>();
        size_t bytes = size_t(rows) * size_t(cols) * 8;
        require(off + bytes <= blob.size(), ErrCat::format, "tensor overruns checkpoint blob");
        Eigen::MatrixXd m(rows, cols);
        std::memcpy(m.data(), blob.data() + off, bytes);
        out.tensors.emplace_back(std::move(name), std::move(m));
    }
    return out;
}

void restore_params(ParamStore& store, const LoadedCheckpoint& ckpt) {
    for (const auto& p : store.all()) {
        const Eigen::MatrixXd* t = ckpt.find(p->name);
        require(t != nullptr, ErrCat::integrity, "checkpoint misses tensor: " + p->name);
        require(t->rows() == p->v.rows() && t->cols() == p->v.cols(), ErrCat::integrity,
                "checkpoint shape mismatch for " + p->name);
        p->v = *t;
    }
}

PretrainedLoadResult load_pretrained_backbone(ParamStore& store, const std::string& ckpt_path,
                                              const std::string& mapping_path) {
    PretrainedLoadResult res;
    if (ckpt_path.empty() || !std::filesystem::exists(ckpt_path)) {
        res.message = "pretrained checkpoint not found; keeping random initialization";
        return res;
    }
    require(std::filesystem::exists(mapping_path), ErrCat::io,
            "tensor name map not found: " + mapping_path);
    auto mapping = read_kv_file(mapping_path);
    LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    for (const auto& [external, canonical] : mapping) {
        const Eigen::MatrixXd* t = ckpt.find(external);
        require(t != nullptr, ErrCat::integrity, "mapped tensor missing in checkpoint: " + external);
        Param* p = store.find(canonical);
        require(p != nullptr, ErrCat::integrity, "mapped tensor unknown to the model: " + canonical);
        require(t->rows() == p->v.rows() && t->cols() == p->v.cols(), ErrCat::integrity,
                "pretrained shape mismatch for " + canonical);
        p->v = *t;
        ++res.tensors_loaded;
    }
    res.loaded = res.tensors_loaded > 0;
    res.message = res.loaded ? "loaded pretrained tensors" : "name map was empty";
    return res;
}

}  // namespace shdbench::models
