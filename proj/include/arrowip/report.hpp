#pragma once

// Text and JSON renderings of a solve: convergence log, phase timings and
// the grid solution.

#include <ostream>
#include <string>

#include "arrowip/grid.hpp"
#include "arrowip/ipm.hpp"

namespace arrowip {

/// One header line, then one whitespace-separated row per iteration:
/// iter objective inf_pr inf_du mu alpha delta_w sigma sections
void write_log(std::ostream& os, const ConvergenceReport& r);
std::string format_log_row(const LogRow& row);

/// Seconds per phase with three decimals.
void write_timings(std::ostream& os, const PhaseTimes& t);

std::string solution_json(const grid::GridSolution& s, const grid::GridCase& c,
                          const ConvergenceReport& r);

}  // namespace arrowip
