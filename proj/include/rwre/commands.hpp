#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rwre/config.hpp"

namespace rwre {

enum ExitCode : int {
  kExitOk = 0,
  kExitFalsified = 1,
  kExitBudget = 2,
  kExitInconclusive = 3,
  kExitUsage = 64,
};

struct FamilyResult {
  std::string family;
  int checks = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  std::string worst_case;  ///< which check produced `worst`
  bool ok() const { return worst <= tolerance; }
};

/// The exact-oracle suite behind `verify`: tilt invariants, both forms of the
/// change-of-measure identity, decomposition coincidence, the one-step psi
/// identity and the enumerated psi identity. Throws BudgetError when an
/// enumeration exceeds its budget.
std::vector<FamilyResult> run_verification(const ExperimentConfig& cfg, const RunSettings& run);

// Subcommands. Each prints a summary to `out`, writes its artifacts below
// run.out_dir when that is non-empty, and maps failures to exit codes
// (diagnostics go to `err`).
int cmd_verify(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err);
int cmd_gap(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err);
int cmd_rate(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err);
int cmd_env_sample(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err);
int cmd_tau_stats(const ExperimentConfig& cfg, const RunSettings& run, std::ostream& out, std::ostream& err);

/// The JSON document cmd_gap writes to gap_report.json.
std::string gap_report_document(const ExperimentConfig& cfg, const RunSettings& run, int* exit_code = nullptr);

/// Rejects an empty grid and any point outside D (ConfigError).
void validate_rate_grid(const ExperimentConfig& cfg);

}  // namespace rwre
