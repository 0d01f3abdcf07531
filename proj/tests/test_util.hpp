#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "shdbench/common.hpp"

namespace shdbench::test {

/// Runs f, swallowing the typed error; empty when nothing was thrown.
inline std::optional<ErrCat> thrown_category(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.category();
    }
    return std::nullopt;
}

/// Self-deleting temporary directory.
class TempDir {
  public:
    TempDir() {
        char tmpl[] = "/tmp/shdbench_test_XXXXXX";
        const char* p = mkdtemp(tmpl);
        require(p != nullptr, ErrCat::io, "mkdtemp failed");
        path_ = p;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const { return path_ + "/" + name; }

  private:
    std::string path_;
};

}  // namespace shdbench::test
