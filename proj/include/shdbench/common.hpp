#pragma once

#include <stdexcept>
#include <string>

namespace shdbench {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kLeads = 12;
inline constexpr int kSamples = 2500;
inline constexpr double kSampleRateHz = 250.0;
inline constexpr int kNumTargets = 6;

/// Error categories map onto the CLI exit-status contract:
/// usage/config/parameter -> 2, data/format/alignment -> 3, divergence -> 4.
enum class ErrCat {
    usage,
    config,
    parameter,
    format,
    io,
    data,
    alignment,
    integrity,
    divergence,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrCat cat, const std::string& msg) : std::runtime_error(msg), cat_(cat) {}

    ErrCat category() const { return cat_; }

    const char* category_name() const {
        switch (cat_) {
            case ErrCat::usage: return "usage";
            case ErrCat::config: return "config";
            case ErrCat::parameter: return "parameter";
            case ErrCat::format: return "format";
            case ErrCat::io: return "io";
            case ErrCat::data: return "data";
            case ErrCat::alignment: return "alignment";
            case ErrCat::integrity: return "integrity";
            case ErrCat::divergence: return "divergence";
            case ErrCat::internal: return "internal";
        }
        return "internal";
    }

    int exit_code() const {
        switch (cat_) {
            case ErrCat::usage:
            case ErrCat::config:
            case ErrCat::parameter:
                return 2;
            case ErrCat::format:
            case ErrCat::io:
            case ErrCat::data:
            case ErrCat::alignment:
            case ErrCat::integrity:
                return 3;
            case ErrCat::divergence:
                return 4;
            case ErrCat::internal:
                return 1;
        }
        return 1;
    }

private:
    ErrCat cat_;
};

inline void require(bool cond, ErrCat cat, const std::string& msg) {
    if (!cond) throw Error(cat, msg);
}

}  // namespace shdbench
