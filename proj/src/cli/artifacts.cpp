#include "shdbench/cli/artifacts.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "shdbench/error.hpp"
#include "shdbench/io_util.hpp"

namespace shdbench::cli {

DirLock::DirLock(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrCat::io, "cannot create output directory: " + dir);
    path_ = dir + "/" + kLockName;
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        path_.clear();
        throw Error(ErrCat::io,
                    "output directory is locked by another run (remove " + dir + "/" + kLockName +
                        " if that run is dead)");
    }
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%ld\n", static_cast<long>(::getpid()));
    if (len > 0) {
        const ssize_t written = ::write(fd, buf, static_cast<size_t>(len));
        (void)written;  // lock existence is the contract, content is a hint
    }
    ::close(fd);
}

DirLock::~DirLock() {
    if (!path_.empty()) ::unlink(path_.c_str());
}

void write_run_manifest(const std::string& dir, const RunManifest& m) {
    nlohmann::json j;
    j["tool"] = m.tool;
    j["version"] = m.version;
    j["command"] = m.command;
    j["config_hash"] = m.config_hash;
    j["artifacts"] = m.artifacts;
    j["started"] = m.started;
    j["finished"] = m.finished;
    spit_file(dir + "/" + kRunManifestName, j.dump(2) + "\n");
}

RunManifest read_run_manifest(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(slurp_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrCat::format, "bad run manifest " + path + ": " + e.what());
    }
    RunManifest m;
    try {
        m.tool = j.at("tool").get<std::string>();
        m.version = j.at("version").get<std::string>();
        m.command = j.at("command").get<std::string>();
        m.config_hash = j.at("config_hash").get<std::string>();
        m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
        m.started = j.at("started").get<std::string>();
        m.finished = j.at("finished").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrCat::format, "run manifest missing field in " + path + ": " + e.what());
    }
    return m;
}

std::string timestamp_utc(bool deterministic) {
    if (deterministic) return "";
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace shdbench::cli
