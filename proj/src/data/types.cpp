#include "shdbench/data/types.hpp"

namespace shdbench::data {

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw Error(ErrCat::format, "unknown split '" + s + "'");
}

std::string to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Grade grade_from_string(const std::string& s) {
    if (s == "none") return Grade::none;
    if (s == "mild") return Grade::mild;
    if (s == "moderate") return Grade::moderate;
    if (s == "severe") return Grade::severe;
    throw Error(ErrCat::format, "unknown grade '" + s + "'");
}

std::string to_string(Grade g) {
    switch (g) {
        case Grade::none: return "none";
        case Grade::mild: return "mild";
        case Grade::moderate: return "moderate";
        case Grade::severe: return "severe";
    }
    return "?";
}

void EchoMeasurements::validate() const {
    if (lvef) require(*lvef >= 0.0 && *lvef <= 100.0, ErrCat::data, "lvef out of [0,100]");
    if (ivs) require(*ivs >= 0.0, ErrCat::data, "ivs must be >= 0");
    if (lvpw) require(*lvpw >= 0.0, ErrCat::data, "lvpw must be >= 0");
}

TargetSpec TargetSpec::standard() {
    TargetSpec t;
    t.endpoints[0] = {"reduced_lvef", EndpointRule::lvef_le, 45.0, -1};
    t.endpoints[1] = {"increased_lvwt", EndpointRule::max_wall_ge, 1.3, -1};
    t.endpoints[2] = {"aortic_stenosis", EndpointRule::grade_ge_moderate, 0.0, 0};
    t.endpoints[3] = {"mitral_regurgitation", EndpointRule::grade_ge_moderate, 0.0, 1};
    t.endpoints[4] = {"tricuspid_regurgitation", EndpointRule::grade_ge_moderate, 0.0, 2};
    t.endpoints[5] = {"rv_dysfunction", EndpointRule::grade_ge_moderate, 0.0, 3};
    return t;
}

int TargetSpec::index_of(const std::string& name) const {
    for (int i = 0; i < kNumTargets; ++i)
        if (endpoints[i].name == name) return i;
    return -1;
}

}  // namespace shdbench::data
