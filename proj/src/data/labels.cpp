#include "shdbench/data/labels.hpp"

#include <algorithm>

namespace shdbench::data {

DerivedLabels derive_labels(const EchoMeasurements& m, const TargetSpec& spec, bool strict) {
    m.validate();
    const std::array<const std::optional<Grade>*, 4> grades = {&m.as_grade, &m.mr_grade,
                                                               &m.tr_grade, &m.rv_grade};
    DerivedLabels out;
    for (int j = 0; j < kNumTargets; ++j) {
        const auto& def = spec.endpoints[j];
        auto miss = [&](const char* what) {
            require(!strict, ErrCat::data,
                    std::string("derive_labels: missing ") + what + " for " + def.name);
            out.missing.missing[j] = true;
            out.labels.bits[j] = 0;
        };
        switch (def.rule) {
            case EndpointRule::lvef_le:
                if (!m.lvef) {
                    miss("lvef");
                    break;
                }
                out.labels.bits[j] = (*m.lvef <= def.threshold) ? 1 : 0;
                break;
            case EndpointRule::max_wall_ge:
                if (!m.ivs || !m.lvpw) {
                    miss("ivs/lvpw");
                    break;
                }
                out.labels.bits[j] = (std::max(*m.ivs, *m.lvpw) >= def.threshold) ? 1 : 0;
                break;
            case EndpointRule::grade_ge_moderate: {
                const auto& g = *grades[def.grade_index];
                if (!g) {
                    miss("grade");
                    break;
                }
                out.labels.bits[j] = (*g >= Grade::moderate) ? 1 : 0;
                break;
            }
        }
    }
    return out;
}

}  // namespace shdbench::data
