#pragma once

#include <string>

#include "ftr/scenario.hpp"

namespace ftr {

/// Write the six result tables as CSV plus summary.json and solution.json
/// into `dir` (created if missing). CSV cells carry four decimals and fixed
/// column order, so identical runs produce identical bytes. Throws IoError.
void emit_tables(const RunReport& report, const std::string& dir);

/// The metrics-only subset: zeta, fcp/rcp and bounds tables.
void emit_metric_tables(const RunReport& report, const std::string& dir);

}  // namespace ftr
