#pragma once

#include <string>

#include "shdbench/data/types.hpp"

namespace shdbench::data {

// Manifest CSV. Fixed header:
//   record_id,patient_id,split,sex,ventricular_rate,atrial_rate,pr_interval,
//   qrs_duration,qtc,age,y_lvef,y_lvwt,y_as,y_mr,y_tr,y_rv
// plus optional raw-measurement columns lvef,ivs,lvpw,as_grade,mr_grade,
// tr_grade,rv_grade. The store checksum travels in a "# store_checksum=..."
// comment line before the header.

CohortManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const CohortManifest& manifest);

}  // namespace shdbench::data
