#pragma once

#include <string>
#include <vector>

namespace shdbench::cli {

inline constexpr const char* kToolName = "shdbench";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kRunManifestName = "run_manifest.json";
inline constexpr const char* kLockName = ".shdbench.lock";

/// Exclusive advisory lock on an output directory, held for the lifetime of
/// the object. Two live invocations writing the same directory is a usage
/// error; the second acquisition fails instead of interleaving artifacts.
class DirLock {
  public:
    explicit DirLock(const std::string& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    std::string path_;
};

/// Provenance record for one command invocation. Exactly one lives in each
/// output directory; reruns into the same directory replace it.
struct RunManifest {
    std::string tool = kToolName;
    std::string version = kToolVersion;
    std::string command;                 // argv joined with single spaces
    std::string config_hash;             // experiment hash, or a hash of the command
    std::vector<std::string> artifacts;  // paths relative to the directory
    std::string started;                 // ISO 8601 UTC; empty in deterministic mode
    std::string finished;
};

void write_run_manifest(const std::string& dir, const RunManifest& m);
RunManifest read_run_manifest(const std::string& path);

/// Wall-clock in ISO 8601 UTC, or "" when deterministic output was requested.
std::string timestamp_utc(bool deterministic);

}  // namespace shdbench::cli
