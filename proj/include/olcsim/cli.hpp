#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "olcsim/dynamics.hpp"
#include "olcsim/scenario.hpp"

namespace olcsim {

/// Stable process exit codes of the olc-sim tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,  // also: one or more checks failed in `check`
  kExitParse = 2,
  kExitSchema = 3,
  kExitValidation = 4,
  kExitSolver = 5,
  kExitDivergence = 6,
  kExitOutput = 7,
};

/// Maps the library's exception taxonomy onto exit codes; used by every
/// subcommand so error behavior stays uniform.
int guarded_run(const std::function<int()>& body, std::ostream& err);

/// Names of the shipped scenario library, resolvable through the case dir.
const std::vector<std::string>& builtin_cases();

/// Resolves a scenario argument: an existing path is used as-is, otherwise
/// the name is looked up in $OLC_SIM_CASE_DIR (or the compiled-in default),
/// with and without a .json suffix.
std::string resolve_case_path(const std::string& arg);

/// Solution document of the `solve` subcommand. Per-bus arrays follow the
/// input file's bus order, flows the input line order.
nlohmann::ordered_json solution_document(const Network& net,
                                         const OlcSolution& sol);

/// Trajectory CSV contract:
///   t,omega_<bus>...,P_<from>-<to>...,d_<bus>...,dhat_<bus>...,U,
///   kkt_stationarity,kkt_sync
/// with every float printed to 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Network& net,
                          const Trajectory& traj);

struct CheckRow {
  std::string name;
  enum class Status { Pass, Fail, NotApplicable } status;
  std::string detail;
};

struct CheckReport {
  std::vector<CheckRow> rows;
  int failures() const;
};

/// All solve/simulate cross-checks for one scenario.
CheckReport run_checks(const Scenario& scenario, double warn_threshold);

int cmd_solve(const Scenario& scenario, double warn_threshold,
              std::ostream& out, std::ostream& err);
int cmd_simulate(const Scenario& scenario, const std::string& out_path,
                 double warn_threshold, std::ostream& out, std::ostream& err);
int cmd_check(const Scenario& scenario, double warn_threshold,
              std::ostream& out, std::ostream& err);

/// Full argument parsing and dispatch; this is main() minus process glue.
int run_cli(int argc, const char* const* argv);

}  // namespace olcsim
